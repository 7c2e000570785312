//! Discrete slab energy, the planar Ginzburg-Landau comparison energy, the
//! vertical average, and the coupling/averaging inequality checks.
//!
//! Quadrature: node values own their clipped dual cells in-plane; layer
//! integrals use trapezoid weights; the vertical derivative is the interval
//! difference quotient, so the vertical term is the exact Dirichlet energy of
//! the piecewise-linear interpolant in x3. With that choice the discrete
//! analogues of the coupling inequality and the averaging lemma hold for
//! arbitrary admissible fields, not just resolved ones. All reductions are
//! sequential in node order, so results are bitwise reproducible.

use crate::domain::NodeKind;
use crate::error::{Error, Result};
use crate::field::{DirectorField, PlanarField};
use crate::params::ScalingParams;

/// Energy split: in-plane gradients, vertical gradients (with the 1/eta^2
/// factor), and the face anchoring penalty (with the 1/(2 eps^2) factor).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub bulk_horizontal: f64,
    pub bulk_vertical: f64,
    pub anchoring: f64,
}

impl EnergyBreakdown {
    pub const ZERO: Self = Self { bulk_horizontal: 0.0, bulk_vertical: 0.0, anchoring: 0.0 };

    pub fn total(&self) -> f64 {
        self.bulk_horizontal + self.bulk_vertical + self.anchoring
    }

    /// CSV row `eps,eta,bulk_h,bulk_v,anchor,total`.
    pub fn csv_row(&self, p: &ScalingParams) -> String {
        format!(
            "{},{},{},{},{},{}",
            p.eps(),
            p.eta(),
            self.bulk_horizontal,
            self.bulk_vertical,
            self.anchoring,
            self.total()
        )
    }

    pub const CSV_HEADER: &'static str = "eps,eta,bulk_h,bulk_v,anchor,total";
}

/// Full slab energy of an admissible director field.
pub fn energy_full(u: &DirectorField, p: &ScalingParams) -> EnergyBreakdown {
    energy_masked(u, p, None)
}

/// Energy restricted to the columns over a node subset of the cross-section.
pub fn energy_restricted(u: &DirectorField, p: &ScalingParams, subset: &[usize]) -> Result<EnergyBreakdown> {
    let dom = &u.grid.domain;
    let mut keep = vec![false; dom.n_nodes()];
    for &idx in subset {
        if idx >= dom.n_nodes() {
            return Err(Error::ShapeMismatch(format!("node index {idx} out of range")));
        }
        if dom.mask(idx) == NodeKind::Exterior {
            return Err(Error::ShapeMismatch(format!("node {idx} lies outside the domain")));
        }
        keep[idx] = true;
    }
    Ok(energy_masked(u, p, Some(&keep)))
}

fn energy_masked(u: &DirectorField, p: &ScalingParams, keep: Option<&[bool]>) -> EnergyBreakdown {
    let grid = &u.grid;
    let dom = &grid.domain;
    let n2 = dom.n_nodes();
    let nl = grid.n_layers;
    let wts = dom.weights();
    let vals = u.values();

    let included = |idx: usize| keep.map_or(true, |k| k[idx]);

    let mut bulk_h = 0.0;
    for k in 0..nl {
        let tz = grid.layer_weight(k);
        let layer = &vals[k * n2..(k + 1) * n2];
        let mut acc = 0.0;
        for idx in 0..n2 {
            let w = wts[idx];
            if w == 0.0 || !included(idx) {
                continue;
            }
            let sx = dom.stencil_x(idx);
            let sy = dom.stencil_y(idx);
            let (ap, am) = (layer[sx.plus as usize], layer[sx.minus as usize]);
            let (bp, bm) = (layer[sy.plus as usize], layer[sy.minus as usize]);
            let mut g2 = 0.0;
            for c in 0..3 {
                let dx = (ap[c] - am[c]) * sx.inv;
                let dy = (bp[c] - bm[c]) * sy.inv;
                g2 += dx * dx + dy * dy;
            }
            acc += w * g2;
        }
        bulk_h += 0.5 * tz * acc;
    }

    let mut vert = 0.0;
    for k in 0..nl - 1 {
        let lo = &vals[k * n2..(k + 1) * n2];
        let hi = &vals[(k + 1) * n2..(k + 2) * n2];
        let mut acc = 0.0;
        for idx in 0..n2 {
            let w = wts[idx];
            if w == 0.0 || !included(idx) {
                continue;
            }
            let mut d2 = 0.0;
            for c in 0..3 {
                let d = hi[idx][c] - lo[idx][c];
                d2 += d * d;
            }
            acc += w * d2;
        }
        vert += acc;
    }
    let eta = p.eta();
    let bulk_v = vert / (2.0 * eta * eta * grid.hz);

    let mut anchor = 0.0;
    for k in [0, nl - 1] {
        let layer = &vals[k * n2..(k + 1) * n2];
        let mut acc = 0.0;
        for idx in 0..n2 {
            let w = wts[idx];
            if w == 0.0 || !included(idx) {
                continue;
            }
            acc += w * layer[idx][2] * layer[idx][2];
        }
        anchor += acc;
    }
    let eps = p.eps();
    let anchoring = anchor / (2.0 * eps * eps);

    EnergyBreakdown { bulk_horizontal: bulk_h, bulk_vertical: bulk_v, anchoring }
}

/// Exact gradient of the discrete energy with respect to every node value.
/// Pinned (lateral) nodes receive contributions like any other; the solver
/// masks them out.
pub fn energy_grad(u: &DirectorField, p: &ScalingParams, grad: &mut Vec<[f64; 3]>) {
    let grid = &u.grid;
    let dom = &grid.domain;
    let n2 = dom.n_nodes();
    let nl = grid.n_layers;
    let wts = dom.weights();
    let vals = u.values();

    grad.clear();
    grad.resize(n2 * nl, [0.0; 3]);

    for k in 0..nl {
        let tz = grid.layer_weight(k);
        let base = k * n2;
        for idx in 0..n2 {
            let w = wts[idx];
            if w == 0.0 {
                continue;
            }
            let c0 = tz * w;
            let sx = dom.stencil_x(idx);
            let sy = dom.stencil_y(idx);
            let (pxi, mxi) = (base + sx.plus as usize, base + sx.minus as usize);
            let (pyi, myi) = (base + sy.plus as usize, base + sy.minus as usize);
            for c in 0..3 {
                let dx = (vals[pxi][c] - vals[mxi][c]) * sx.inv;
                let gx = c0 * sx.inv * dx;
                grad[pxi][c] += gx;
                grad[mxi][c] -= gx;
                let dy = (vals[pyi][c] - vals[myi][c]) * sy.inv;
                let gy = c0 * sy.inv * dy;
                grad[pyi][c] += gy;
                grad[myi][c] -= gy;
            }
        }
    }

    let eta = p.eta();
    let cv = 1.0 / (eta * eta * grid.hz);
    for k in 0..nl - 1 {
        let (lo_base, hi_base) = (k * n2, (k + 1) * n2);
        for idx in 0..n2 {
            let w = wts[idx];
            if w == 0.0 {
                continue;
            }
            let c0 = cv * w;
            for c in 0..3 {
                let d = vals[hi_base + idx][c] - vals[lo_base + idx][c];
                grad[hi_base + idx][c] += c0 * d;
                grad[lo_base + idx][c] -= c0 * d;
            }
        }
    }

    let eps = p.eps();
    let ca = 1.0 / (eps * eps);
    for k in [0, nl - 1] {
        let base = k * n2;
        for idx in 0..n2 {
            let w = wts[idx];
            if w == 0.0 {
                continue;
            }
            grad[base + idx][2] += ca * w * vals[base + idx][2];
        }
    }
}

/// Trapezoid average of the planar projection across the height.
pub fn vertical_average(u: &DirectorField) -> PlanarField {
    let grid = &u.grid;
    let dom = &grid.domain;
    let n2 = dom.n_nodes();
    let vals = u.values();
    let mut out = PlanarField::zeros(dom);
    for k in 0..grid.n_layers {
        let tz = grid.layer_weight(k);
        let layer = &vals[k * n2..(k + 1) * n2];
        for idx in 0..n2 {
            if dom.mask(idx) == NodeKind::Exterior {
                continue;
            }
            out.values_mut()[idx][0] += tz * layer[idx][0];
            out.values_mut()[idx][1] += tz * layer[idx][1];
        }
    }
    out
}

/// Extract one layer of the planar projection.
pub fn layer_planar(u: &DirectorField, k: usize) -> PlanarField {
    let dom = &u.grid.domain;
    let n2 = dom.n_nodes();
    let layer = &u.values()[k * n2..(k + 1) * n2];
    let mut out = PlanarField::zeros(dom);
    for idx in 0..n2 {
        if dom.mask(idx) == NodeKind::Exterior {
            continue;
        }
        out.values_mut()[idx] = [layer[idx][0], layer[idx][1]];
    }
    out
}

/// Half the in-plane Dirichlet integral of a planar field.
pub fn dirichlet_energy(u: &PlanarField) -> f64 {
    let dom = &u.domain;
    let vals = u.values();
    let mut acc = 0.0;
    for idx in 0..dom.n_nodes() {
        let w = dom.weight(idx);
        if w == 0.0 {
            continue;
        }
        let sx = dom.stencil_x(idx);
        let sy = dom.stencil_y(idx);
        let mut g2 = 0.0;
        for c in 0..2 {
            let dx = (vals[sx.plus as usize][c] - vals[sx.minus as usize][c]) * sx.inv;
            let dy = (vals[sy.plus as usize][c] - vals[sy.minus as usize][c]) * sy.inv;
            g2 += dx * dx + dy * dy;
        }
        acc += w * g2;
    }
    0.5 * acc
}

/// Ginzburg-Landau energy of a planar field, with the same quadrature rules
/// as the slab energy.
pub fn gl_energy(u: &PlanarField, eps: f64) -> f64 {
    let dom = &u.domain;
    let vals = u.values();
    let mut pot = 0.0;
    for idx in 0..dom.n_nodes() {
        let w = dom.weight(idx);
        if w == 0.0 {
            continue;
        }
        let m2 = vals[idx][0] * vals[idx][0] + vals[idx][1] * vals[idx][1];
        let q = 1.0 - m2;
        pot += w * q * q;
    }
    dirichlet_energy(u) + pot / (4.0 * eps * eps)
}

/// Exact gradient of `gl_energy` with respect to the node values.
pub fn gl_grad(u: &PlanarField, eps: f64, grad: &mut Vec<[f64; 2]>) {
    let dom = &u.domain;
    let vals = u.values();
    grad.clear();
    grad.resize(dom.n_nodes(), [0.0; 2]);
    let cp = 1.0 / (eps * eps);
    for idx in 0..dom.n_nodes() {
        let w = dom.weight(idx);
        if w == 0.0 {
            continue;
        }
        let sx = dom.stencil_x(idx);
        let sy = dom.stencil_y(idx);
        for c in 0..2 {
            let dx = (vals[sx.plus as usize][c] - vals[sx.minus as usize][c]) * sx.inv;
            let gx = w * sx.inv * dx;
            grad[sx.plus as usize][c] += gx;
            grad[sx.minus as usize][c] -= gx;
            let dy = (vals[sy.plus as usize][c] - vals[sy.minus as usize][c]) * sy.inv;
            let gy = w * sy.inv * dy;
            grad[sy.plus as usize][c] += gy;
            grad[sy.minus as usize][c] -= gy;
        }
        let m2 = vals[idx][0] * vals[idx][0] + vals[idx][1] * vals[idx][1];
        let f = cp * w * (m2 - 1.0);
        grad[idx][0] += f * vals[idx][0];
        grad[idx][1] += f * vals[idx][1];
    }
}

/// Report of one inequality check. The slack is reported, never silently
/// absorbed into the operands.
#[derive(Debug, Clone, Copy)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

fn grid_slack(dom: &crate::domain::Domain2D, scale: f64) -> f64 {
    let h = dom.hx.max(dom.hy);
    1e-6 * scale.abs() + h * h
}

/// `GL_eps(u-bar) <= F_eps(U)` in the regime, with the `max(1, 2 eta^2/eps^2)`
/// factor outside it.
pub fn check_gl_bound(u: &DirectorField, p: &ScalingParams) -> BoundReport {
    let ubar = vertical_average(u);
    let lhs = gl_energy(&ubar, p.eps());
    let total = energy_full(u, p).total();
    let factor = if p.bbh_regime() {
        1.0
    } else {
        let r = p.eta() / p.eps();
        (2.0 * r * r).max(1.0)
    };
    let rhs = factor * total;
    let slack = grid_slack(&u.grid.domain, rhs);
    BoundReport { lhs, rhs, slack, holds: lhs <= rhs + slack }
}

/// Sharper coupling bound available under the stronger scaling assumption
/// `2 eta^2 <= (1 - c_star) eps^2`: the vertical-gradient term rejoins the
/// left-hand side with weight `c_star / (2 eta^2)`. The constant is not
/// prescribed anywhere; callers pick it.
pub fn check_gl_bound_strict(u: &DirectorField, p: &ScalingParams, c_star: f64) -> Result<BoundReport> {
    if !(0.0..1.0).contains(&c_star) {
        return Err(Error::InvalidParameter(format!("c_star must lie in [0, 1), got {c_star}")));
    }
    let eta2 = p.eta() * p.eta();
    let eps2 = p.eps() * p.eps();
    if 2.0 * eta2 > (1.0 - c_star) * eps2 * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "strict bound needs 2 eta^2 <= (1 - c_star) eps^2; got eta = {}, eps = {}, c_star = {c_star}",
            p.eta(),
            p.eps()
        )));
    }
    let ubar = vertical_average(u);
    let breakdown = energy_full(u, p);
    // the assembled vertical term is (1/(2 eta^2)) ||d3 U||^2
    let lhs = gl_energy(&ubar, p.eps()) + c_star * breakdown.bulk_vertical;
    let rhs = breakdown.total();
    let slack = grid_slack(&u.grid.domain, rhs);
    Ok(BoundReport { lhs, rhs, slack, holds: lhs <= rhs + slack })
}

/// Layer-wise averaging report: L2 distance of each layer slice to the
/// vertical average against the vertical-gradient budget.
#[derive(Debug, Clone)]
pub struct AverageBoundReport {
    /// Per layer: L2 distance of the slice to the average.
    pub layer_lhs: Vec<f64>,
    /// `(1/sqrt(2)) * ||d U / d x3||_{L2(Q)}`.
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

/// `||u-bar - u(., x3)|| <= (1/sqrt 2) ||dU/dx3||` for every layer.
pub fn check_average_bound(u: &DirectorField) -> AverageBoundReport {
    let grid = &u.grid;
    let dom = &grid.domain;
    let n2 = dom.n_nodes();
    let wts = dom.weights();
    let vals = u.values();
    let ubar = vertical_average(u);

    let mut vert2 = 0.0;
    for k in 0..grid.n_layers - 1 {
        let lo = &vals[k * n2..(k + 1) * n2];
        let hi = &vals[(k + 1) * n2..(k + 2) * n2];
        for idx in 0..n2 {
            let w = wts[idx];
            if w == 0.0 {
                continue;
            }
            let mut d2 = 0.0;
            for c in 0..3 {
                let d = hi[idx][c] - lo[idx][c];
                d2 += d * d;
            }
            vert2 += w * d2;
        }
    }
    let rhs = (vert2 / grid.hz).sqrt() / std::f64::consts::SQRT_2;

    let mut layer_lhs = Vec::with_capacity(grid.n_layers);
    for k in 0..grid.n_layers {
        let layer = &vals[k * n2..(k + 1) * n2];
        let mut acc = 0.0;
        for idx in 0..n2 {
            let w = wts[idx];
            if w == 0.0 {
                continue;
            }
            let dx = ubar.values()[idx][0] - layer[idx][0];
            let dy = ubar.values()[idx][1] - layer[idx][1];
            acc += w * (dx * dx + dy * dy);
        }
        layer_lhs.push(acc.sqrt());
    }

    let slack = grid_slack(dom, rhs);
    let holds = layer_lhs.iter().all(|&l| l <= rhs + slack);
    AverageBoundReport { layer_lhs, rhs, slack, holds }
}

/// Plain inner product of two node-value arrays (used by the solver and the
/// first-variation check).
pub(crate) fn dot3(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x[0] * y[0] + x[1] * y[1] + x[2] * y[2]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{extrude, make_domain, power_law_datum, DomainKind, Grid3D};
    use crate::field::{random_admissible, DirectorField};
    use proptest::prelude::*;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn grid(kind: DomainKind, res: usize, layers: usize) -> Arc<Grid3D> {
        let dom = make_domain(kind, res, res).unwrap();
        Arc::new(extrude(&dom, layers).unwrap())
    }

    fn params(eps: f64, eta: f64) -> ScalingParams {
        ScalingParams::new(eps, eta).unwrap()
    }

    #[test]
    fn constant_in_plane_field_has_zero_energy() {
        let g = grid(DomainKind::Disk { radius: 1.0 }, 48, 6);
        let u = DirectorField::constant(&g, [1.0, 0.0, 0.0]);
        let e = energy_full(&u, &params(0.1, 0.05));
        assert_eq!(e.total(), 0.0);
    }

    #[test]
    fn vertical_constant_field_pays_anchoring_only() {
        let g = grid(DomainKind::Disk { radius: 1.0 }, 256, 4);
        let u = DirectorField::constant(&g, [0.0, 0.0, 1.0]);
        let e = energy_full(&u, &params(0.1, 0.05));
        assert_eq!(e.bulk_horizontal, 0.0);
        assert_eq!(e.bulk_vertical, 0.0);
        let expect = PI / 0.01;
        assert!((e.anchoring - expect).abs() / expect < 0.01, "{}", e.anchoring);
    }

    #[test]
    fn hedgehog_annulus_energy_matches_log_law() {
        let g = grid(DomainKind::Annulus { r_in: 0.25, r_out: 0.5 }, 128, 6);
        let u = DirectorField::from_fn(&g, |x, y, _| {
            let r = x.hypot(y).max(1e-300);
            [x / r, y / r, 0.0]
        });
        let e = energy_full(&u, &params(0.1, 0.05));
        let expect = PI * 2.0f64.ln();
        assert!((e.total() - expect).abs() / expect < 0.02, "total {} vs {}", e.total(), expect);
    }

    #[test]
    fn restricted_energy_full_and_empty() {
        let g = grid(DomainKind::Disk { radius: 1.0 }, 48, 5);
        let gd = power_law_datum(&g.domain, 1);
        let u = random_admissible(&g, &gd, 3, 0.5, 1);
        let p = params(0.2, 0.1);
        let all: Vec<usize> =
            (0..g.domain.n_nodes()).filter(|&i| g.domain.mask(i) != NodeKind::Exterior).collect();
        let full = energy_full(&u, &p);
        let restr = energy_restricted(&u, &p, &all).unwrap();
        assert!((full.total() - restr.total()).abs() <= 1e-12 * full.total().abs());
        let empty = energy_restricted(&u, &p, &[]).unwrap();
        assert_eq!(empty.total(), 0.0);
        // exterior node is a shape error
        let ext = (0..g.domain.n_nodes()).find(|&i| g.domain.mask(i) == NodeKind::Exterior).unwrap();
        assert!(energy_restricted(&u, &p, &[ext]).is_err());
    }

    #[test]
    fn restricted_energy_is_additive() {
        let g = grid(DomainKind::Disk { radius: 1.0 }, 48, 5);
        let gd = power_law_datum(&g.domain, 1);
        let u = random_admissible(&g, &gd, 11, 0.7, 0);
        let p = params(0.15, 0.07);
        let valid: Vec<usize> =
            (0..g.domain.n_nodes()).filter(|&i| g.domain.mask(i) != NodeKind::Exterior).collect();
        // split deterministically into two disjoint halves
        let a: Vec<usize> = valid.iter().copied().filter(|i| i % 3 == 0).collect();
        let b: Vec<usize> = valid.iter().copied().filter(|i| i % 3 != 0).collect();
        let mut joined = a.clone();
        joined.extend(&b);
        let ea = energy_restricted(&u, &p, &a).unwrap();
        let eb = energy_restricted(&u, &p, &b).unwrap();
        let ej = energy_restricted(&u, &p, &joined).unwrap();
        assert!((ea.total() + eb.total() - ej.total()).abs() <= 1e-10 * ej.total().max(1.0));
    }

    #[test]
    fn vertical_average_examples() {
        let g = grid(DomainKind::Disk { radius: 1.0 }, 32, 64);
        let u = DirectorField::from_fn(&g, |_, _, z| {
            let a = 2.0 * PI * z;
            [a.cos(), a.sin(), 0.0]
        });
        let ub = vertical_average(&u);
        let max_norm = ub
            .values()
            .iter()
            .map(|v| v[0].hypot(v[1]))
            .fold(0.0f64, f64::max);
        assert!(max_norm < 1e-2, "rotating column averages out, got {max_norm}");

        let w = DirectorField::constant(&g, [0.0, 0.0, 1.0]);
        let wb = vertical_average(&w);
        assert!(wb.values().iter().all(|v| v[0] == 0.0 && v[1] == 0.0));

        let s = DirectorField::from_fn(&g, |x, y, _| {
            let r = x.hypot(y).max(0.3);
            [x / r, y / r, 0.0]
        });
        let sb = vertical_average(&s);
        for idx in 0..g.domain.n_nodes() {
            if g.domain.mask(idx) != NodeKind::Exterior {
                let p = g.domain.node_pos(idx);
                let r = p[0].hypot(p[1]).max(0.3);
                assert!((sb.values()[idx][0] - p[0] / r).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn gl_identity_field_on_disk() {
        let dom = make_domain(DomainKind::Disk { radius: 1.0 }, 256, 256).unwrap();
        let u = PlanarField::from_fn(&dom, |x, y| [x, y]);
        let e = gl_energy(&u, 1.0);
        let expect = PI + PI / 12.0;
        assert!((e - expect).abs() / expect < 0.01, "{e} vs {expect}");
    }

    #[test]
    fn gl_constant_is_zero_and_hedgehog_annulus_logs() {
        let dom = make_domain(DomainKind::Disk { radius: 1.0 }, 64, 64).unwrap();
        let c = PlanarField::from_fn(&dom, |_, _| [1.0, 0.0]);
        assert_eq!(gl_energy(&c, 0.5), 0.0);

        let ann = make_domain(DomainKind::Annulus { r_in: 0.25, r_out: 0.5 }, 192, 192).unwrap();
        let h = PlanarField::from_fn(&ann, |x, y| {
            let r = x.hypot(y).max(1e-300);
            [x / r, y / r]
        });
        let e = gl_energy(&h, 0.1);
        let expect = PI * 2.0f64.ln();
        assert!((e - expect).abs() / expect < 0.02, "{e} vs {expect}");
    }

    #[test]
    fn gl_bound_examples() {
        let g = grid(DomainKind::Disk { radius: 1.0 }, 48, 6);
        let p = params(0.1, 0.05);
        // x3-independent unit planar field: lhs equals the horizontal bulk
        let u = DirectorField::from_fn(&g, |x, y, _| {
            let a = 0.7 * x + 0.3 * y;
            [a.cos(), a.sin(), 0.0]
        });
        let rep = check_gl_bound(&u, &p);
        assert!(rep.holds);
        let e = energy_full(&u, &p);
        assert!((rep.lhs - e.bulk_horizontal).abs() <= 1e-9 * e.bulk_horizontal.max(1.0));

        let v = DirectorField::constant(&g, [0.0, 0.0, 1.0]);
        let rv = check_gl_bound(&v, &p);
        assert!(rv.holds);
        assert!((rv.lhs - rv.rhs / 4.0).abs() <= 1e-9 * rv.rhs);
    }

    #[test]
    fn average_bound_examples() {
        let g = grid(DomainKind::Disk { radius: 1.0 }, 40, 9);
        let u = DirectorField::from_fn(&g, |x, _, _| [x.cos(), x.sin(), 0.0]);
        let rep = check_average_bound(&u);
        assert!(rep.holds);
        assert!(rep.rhs == 0.0 && rep.layer_lhs.iter().all(|&l| l <= 1e-13));

        let a = PI / 4.0;
        let v = DirectorField::from_fn(&g, |_, _, z| [(a * z).cos(), (a * z).sin(), 0.0]);
        let rv = check_average_bound(&v);
        assert!(rv.holds);
        let max_lhs = rv.layer_lhs.iter().cloned().fold(0.0f64, f64::max);
        assert!(max_lhs < rv.rhs, "measured ratio stays below 1/sqrt(2)");
    }

    #[test]
    fn sign_flip_leaves_energy_unchanged() {
        let g = grid(DomainKind::Disk { radius: 1.0 }, 48, 6);
        let gd = power_law_datum(&g.domain, 1);
        let u = random_admissible(&g, &gd, 5, 0.6, 1);
        let p = params(0.12, 0.05);
        let e1 = energy_full(&u, &p);
        let e2 = energy_full(&u.conjugate(), &p);
        assert!((e1.total() - e2.total()).abs() <= 1e-12 * e1.total());
    }

    #[test]
    fn jensen_chain_for_random_fields() {
        let g = grid(DomainKind::Disk { radius: 1.0 }, 40, 7);
        let gd = power_law_datum(&g.domain, 1);
        for seed in 0..8u64 {
            let u = random_admissible(&g, &gd, seed, 0.9, 0);
            let ubar = vertical_average(&u);
            let lhs: f64 =
                (0..g.n_layers).map(|k| g.layer_weight(k) * dirichlet_energy(&layer_planar(&u, k))).sum();
            let rhs = dirichlet_energy(&ubar);
            assert!(lhs >= rhs - 1e-12 * lhs.abs().max(1.0), "seed {seed}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn rectangle_rotation_invariance() {
        let dom_a = make_domain(DomainKind::Rectangle { width: 2.0, height: 1.0 }, 64, 32).unwrap();
        let dom_b = make_domain(DomainKind::Rectangle { width: 1.0, height: 2.0 }, 32, 64).unwrap();
        let ga = Arc::new(extrude(&dom_a, 5).unwrap());
        let gb = Arc::new(extrude(&dom_b, 5).unwrap());
        let f = |x: f64, y: f64, z: f64| -> [f64; 3] {
            let a = 1.3 * x - 0.4 * y + 0.8 * z;
            let b = 0.2 * x * y;
            let n = (a.cos().powi(2) + (a.sin() * b.cos()).powi(2) + (b.sin()).powi(2)).sqrt();
            [a.cos() / n, a.sin() * b.cos() / n, b.sin() / n]
        };
        let ua = DirectorField::from_fn(&ga, |x, y, z| f(x, y, z));
        // rotate domain and field by +90 degrees: p' = (-y, x), U' = R U
        let ub = DirectorField::from_fn(&gb, |x, y, z| {
            let v = f(y, -x, z);
            [-v[1], v[0], v[2]]
        });
        let p = params(0.2, 0.1);
        let ea = energy_full(&ua, &p);
        let eb = energy_full(&ub, &p);
        assert!((ea.total() - eb.total()).abs() <= 1e-12 * ea.total());
    }

    #[test]
    fn breakdown_components_nonnegative() {
        let g = grid(DomainKind::Disk { radius: 1.0 }, 32, 5);
        let gd = power_law_datum(&g.domain, 2);
        for seed in 0..6u64 {
            let u = random_admissible(&g, &gd, seed, 1.0, 0);
            let e = energy_full(&u, &params(0.3, 0.2));
            assert!(e.bulk_horizontal >= 0.0 && e.bulk_vertical >= 0.0 && e.anchoring >= 0.0);
            assert!((e.total() - (e.bulk_horizontal + e.bulk_vertical + e.anchoring)).abs() == 0.0);
        }
    }

    #[test]
    fn strict_gl_bound_under_stronger_scaling() {
        let g = grid(DomainKind::Disk { radius: 1.0 }, 36, 6);
        let gd = power_law_datum(&g.domain, 1);
        let c_star = 0.3f64;
        for seed in 0..10u64 {
            let eps = 0.1 + 0.03 * seed as f64;
            // 2 eta^2 = (1 - c_star) eps^2 boundary, backed off slightly
            let eta = eps * ((1.0 - c_star) / 2.0).sqrt() * 0.999;
            let p = ScalingParams::new(eps, eta).unwrap();
            let u = random_admissible(&g, &gd, 200 + seed, 0.8, 0);
            let rep = check_gl_bound_strict(&u, &p, c_star).unwrap();
            assert!(rep.holds, "seed {seed}: lhs {} rhs {}", rep.lhs, rep.rhs);
        }
        // violated hypothesis is rejected
        let p = ScalingParams::new(0.1, 0.1).unwrap();
        let u = random_admissible(&g, &gd, 1, 0.5, 0);
        assert!(check_gl_bound_strict(&u, &p, 0.3).is_err());
    }

    #[test]
    fn gl_bound_holds_for_random_fields_in_regime() {
        let g = grid(DomainKind::Disk { radius: 1.0 }, 36, 6);
        let gd = power_law_datum(&g.domain, 1);
        for seed in 0..20u64 {
            let eps = 0.05 + 0.02 * seed as f64;
            let p = ScalingParams::new(eps, eps / 2.0).unwrap();
            assert!(p.bbh_regime());
            let u = random_admissible(&g, &gd, seed, 1.0, 0);
            let rep = check_gl_bound(&u, &p);
            assert!(rep.holds, "seed {seed}: lhs {} rhs {}", rep.lhs, rep.rhs);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn restricted_energy_additive_on_random_splits(seed in 0u64..1000, cut in 0.0f64..1.0) {
            let g = grid(DomainKind::Disk { radius: 1.0 }, 32, 4);
            let gd = power_law_datum(&g.domain, 1);
            let u = random_admissible(&g, &gd, seed, 0.8, 0);
            let p = params(0.2, 0.1);
            let valid: Vec<usize> = (0..g.domain.n_nodes())
                .filter(|&i| g.domain.mask(i) != NodeKind::Exterior)
                .collect();
            let split = (cut * valid.len() as f64) as usize;
            let a: Vec<usize> = valid[..split].to_vec();
            let b: Vec<usize> = valid[split..].to_vec();
            let ea = energy_restricted(&u, &p, &a).unwrap().total();
            let eb = energy_restricted(&u, &p, &b).unwrap().total();
            let ef = energy_full(&u, &p).total();
            prop_assert!((ea + eb - ef).abs() <= 1e-10 * ef.max(1.0));
        }
    }
}

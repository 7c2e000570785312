//! Minimization of the slab energy over the admissible sphere-valued class
//! and of the planar Ginzburg-Landau energy, plus the first-variation
//! machinery (tangential residuals, finite-difference gradient checks).
//!
//! The descent direction treats the stiff vertical term implicitly: one
//! shared tridiagonal factorization per iteration, applied column by column.
//! Every accepted step satisfies an Armijo decrease test evaluated *after*
//! renormalization, so the projection can never silently increase the
//! energy; a failed test shrinks the step instead.

use std::sync::Arc;

use crate::domain::{BoundaryDatum, NodeKind};
use crate::energy::{dot3, energy_full, energy_grad, gl_energy, gl_grad, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::field::{DirectorField, PlanarField, UNIT_NORM_TOL};
use crate::params::ScalingParams;

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Tangential Euler-Lagrange residual target, discrete L2 norm.
    pub tol_residual: f64,
    /// Initial line-search step; `0.0` derives it from the stability bound.
    pub step_init: f64,
    /// Multiplicative backtracking factor in (0, 1).
    pub step_shrink: f64,
    /// Seed for randomized initialization.
    pub seed: u64,
    /// Progress line to stderr every N iterations; 0 is silent.
    pub progress_every: usize,
    /// Optional energy-stall stop: give up when the relative energy decrease
    /// over a 500-iteration window falls below this; 0 disables. A stalled
    /// stop does not count as converged.
    pub stall_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            tol_residual: 1e-3,
            step_init: 0.0,
            step_shrink: 0.5,
            seed: 0,
            progress_every: 0,
            stall_tol: 0.0,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.tol_residual > 0.0) {
            return Err(Error::InvalidParameter("tol_residual must be positive".into()));
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return Err(Error::InvalidParameter("step_shrink must lie in (0,1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIters,
    /// The line search underflowed; the returned state is the best found.
    NoProgress,
    /// The energy-stall stop fired before the residual target.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_energy: EnergyBreakdown,
    pub residual: f64,
    pub energy_trace: Vec<f64>,
    pub converged: bool,
    pub stop: StopReason,
}

const ARMIJO_C: f64 = 1e-4;

/// Tangential projection of the assembled gradient on the free nodes; pinned
/// (lateral) and exterior nodes are zeroed.
fn project_tangential(u: &DirectorField, grad: &mut [[f64; 3]], free: &[bool]) {
    let n2 = u.grid.domain.n_nodes();
    let vals = u.values();
    for k in 0..u.grid.n_layers {
        let base = k * n2;
        for idx in 0..n2 {
            if !free[idx] {
                grad[base + idx] = [0.0; 3];
                continue;
            }
            let v = vals[base + idx];
            let g = grad[base + idx];
            let dot = g[0] * v[0] + g[1] * v[1] + g[2] * v[2];
            grad[base + idx] = [g[0] - dot * v[0], g[1] - dot * v[1], g[2] - dot * v[2]];
        }
    }
}

/// Discrete L2 norm of the tangential Euler-Lagrange operator hiding in a
/// projected gradient: `sqrt(sum |T|^2 / mass)`.
fn residual_norm(u: &DirectorField, tang: &[[f64; 3]], free: &[bool]) -> f64 {
    let grid = &u.grid;
    let dom = &grid.domain;
    let n2 = dom.n_nodes();
    let mut acc = 0.0;
    for k in 0..grid.n_layers {
        let tz = grid.layer_weight(k);
        let base = k * n2;
        for idx in 0..n2 {
            if !free[idx] {
                continue;
            }
            let w = dom.weight(idx) * tz;
            if w == 0.0 {
                continue;
            }
            let t = tang[base + idx];
            acc += (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]) / w;
        }
    }
    acc.sqrt()
}

/// Tangential Euler-Lagrange residual of a director field.
pub fn el_residual(u: &DirectorField, p: &ScalingParams) -> f64 {
    let free = free_mask(u);
    let mut grad = Vec::new();
    energy_grad(u, p, &mut grad);
    project_tangential(u, &mut grad, &free);
    residual_norm(u, &grad, &free)
}

fn free_mask(u: &DirectorField) -> Vec<bool> {
    let dom = &u.grid.domain;
    let mut free: Vec<bool> = dom.masks().iter().map(|&m| m == NodeKind::Interior).collect();
    for c in dom.chain() {
        free[c.node] = false;
    }
    free
}

/// Every interior column shares the same tridiagonal `diag(m) + cv L` (the
/// node weight factors out), so one Thomas factorization serves the whole
/// grid, applied as contiguous plane sweeps across layers.
struct ColumnFactor {
    inv_denom: Vec<f64>,
    upper: Vec<f64>,
    off: f64,
}

impl ColumnFactor {
    fn new(n_layers: usize, hz: f64, cv: f64) -> Self {
        let off = -cv;
        let mut inv_denom = vec![0.0; n_layers];
        let mut upper = vec![0.0; n_layers];
        let diag_at = |k: usize| {
            let mass = if k == 0 || k == n_layers - 1 { hz / 2.0 } else { hz };
            let stiff = if k == 0 || k == n_layers - 1 { 1.0 } else { 2.0 };
            mass + cv * stiff
        };
        let mut denom = diag_at(0);
        inv_denom[0] = 1.0 / denom;
        upper[0] = off / denom;
        for k in 1..n_layers {
            denom = diag_at(k) - off * upper[k - 1];
            inv_denom[k] = 1.0 / denom;
            upper[k] = off / denom;
        }
        Self { inv_denom, upper, off }
    }

    /// Solve `(diag(m) + cv L) x_col = rhs_col` for all columns at once.
    /// `rhs` is layer-major; entries on non-free columns must already be 0.
    fn solve_planes(&self, rhs: &mut [[f64; 3]], n2: usize, n_layers: usize) {
        let inv0 = self.inv_denom[0];
        for v in rhs[..n2].iter_mut() {
            v[0] *= inv0;
            v[1] *= inv0;
            v[2] *= inv0;
        }
        for k in 1..n_layers {
            let (lo, hi) = rhs.split_at_mut(k * n2);
            let prev = &lo[(k - 1) * n2..];
            let cur = &mut hi[..n2];
            let inv = self.inv_denom[k];
            let off = self.off;
            for idx in 0..n2 {
                for c in 0..3 {
                    cur[idx][c] = (cur[idx][c] - off * prev[idx][c]) * inv;
                }
            }
        }
        for k in (0..n_layers - 1).rev() {
            let (lo, hi) = rhs.split_at_mut((k + 1) * n2);
            let cur = &mut lo[k * n2..];
            let next = &hi[..n2];
            let up = self.upper[k];
            for idx in 0..n2 {
                for c in 0..3 {
                    cur[idx][c] -= up * next[idx][c];
                }
            }
        }
    }
}

/// Minimize the slab energy by projected line-search descent from `init`.
/// The lateral trace is pinned to `(g, 0)` throughout.
pub fn minimize_full(
    init: &DirectorField,
    g: &BoundaryDatum,
    p: &ScalingParams,
    opts: &SolveOptions,
) -> Result<(DirectorField, SolveReport)> {
    opts.validate()?;
    let mut u = init.clone();
    u.set_lateral(g);
    if let Err((k, idx, n)) = u.validate_unit(UNIT_NORM_TOL) {
        return Err(Error::InvalidParameter(format!(
            "initial field is not unit-norm at layer {k}, node {idx} (|U| = {n})"
        )));
    }

    let grid = Arc::clone(&u.grid);
    let dom = &grid.domain;
    let n2 = dom.n_nodes();
    let nl = grid.n_layers;
    let free = free_mask(&u);
    let inv_w: Vec<f64> = (0..n2)
        .map(|i| if free[i] && dom.weight(i) > 0.0 { 1.0 / dom.weight(i) } else { 0.0 })
        .collect();

    let mut energy = energy_full(&u, p);
    if !energy.total().is_finite() {
        return Err(Error::Diverged(format!("non-finite energy at init: {}", energy.total())));
    }

    // stability bound for the explicit (horizontal + anchoring) part
    let lam_h = 4.0 / (dom.hx * dom.hx) + 4.0 / (dom.hy * dom.hy);
    let lam_a = 2.0 / (p.eps() * p.eps() * grid.hz);
    let s_max = 1.8 / (lam_h + lam_a);
    let mut step = if opts.step_init > 0.0 { opts.step_init.min(s_max) } else { 0.5 * s_max };
    let step_floor = s_max * 1e-14;

    let mut grad: Vec<[f64; 3]> = Vec::new();
    let mut delta: Vec<[f64; 3]> = vec![[0.0; 3]; n2 * nl];
    let mut trial = u.clone();
    let mut energy_trace = Vec::with_capacity(opts.max_iters.min(1 << 20) + 1);
    energy_trace.push(energy.total());
    let mut residual = f64::INFINITY;
    let mut stop = StopReason::MaxIters;
    let mut iters = 0;
    let mut stall_anchor = energy.total();

    while iters < opts.max_iters {
        if opts.stall_tol > 0.0 && iters > 0 && iters % 500 == 0 {
            let e = energy.total();
            if stall_anchor - e <= opts.stall_tol * e.abs().max(1e-300) {
                stop = StopReason::Stalled;
                break;
            }
            stall_anchor = e;
        }
        energy_grad(&u, p, &mut grad);
        // fused pass: tangential projection, residual norm, and the
        // mass-scaled right-hand side of the direction solve
        let mut res2 = 0.0;
        for k in 0..nl {
            let tz = grid.layer_weight(k);
            let base = k * n2;
            let uv = u.values();
            for idx in 0..n2 {
                let iw = inv_w[idx];
                if iw == 0.0 {
                    grad[base + idx] = [0.0; 3];
                    delta[base + idx] = [0.0; 3];
                    continue;
                }
                let v = uv[base + idx];
                let gr = grad[base + idx];
                let dot = gr[0] * v[0] + gr[1] * v[1] + gr[2] * v[2];
                let t = [gr[0] - dot * v[0], gr[1] - dot * v[1], gr[2] - dot * v[2]];
                grad[base + idx] = t;
                delta[base + idx] = [t[0] * iw, t[1] * iw, t[2] * iw];
                res2 += (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]) * iw / tz;
            }
        }
        residual = res2.sqrt();
        if residual <= opts.tol_residual {
            stop = StopReason::Converged;
            break;
        }

        // raw direction at the current step; rescaled, not recomputed, while
        // backtracking (any positive multiple stays a descent direction)
        let cv = step / (p.eta() * p.eta() * grid.hz);
        let factor = ColumnFactor::new(nl, grid.hz, cv);
        factor.solve_planes(&mut delta, n2, nl);
        let dec0 = dot3(&grad, &delta);

        let mut accepted = false;
        let mut scale = 1.0f64;
        while step * scale >= step_floor {
            let s = step * scale;
            let uv = u.values();
            let tv = trial.values_mut();
            for i in 0..uv.len() {
                let d = delta[i];
                if d[0] == 0.0 && d[1] == 0.0 && d[2] == 0.0 {
                    // pinned or exterior: copy to keep lateral values bit-exact
                    tv[i] = uv[i];
                    continue;
                }
                let mut v = [uv[i][0] - s * d[0], uv[i][1] - s * d[1], uv[i][2] - s * d[2]];
                let n = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
                if n > 1e-30 {
                    let inv = 1.0 / n.sqrt();
                    v = [v[0] * inv, v[1] * inv, v[2] * inv];
                }
                tv[i] = v;
            }
            let e_new = energy_full(&trial, p);
            if e_new.total() <= energy.total() - ARMIJO_C * s * dec0 && e_new.total().is_finite() {
                std::mem::swap(&mut u, &mut trial);
                energy = e_new;
                accepted = true;
                break;
            }
            scale *= opts.step_shrink;
        }
        if !accepted {
            stop = StopReason::NoProgress;
            break;
        }
        step = (step * scale * 1.4).min(s_max);
        iters += 1;
        energy_trace.push(energy.total());
        if opts.progress_every > 0 && iters % opts.progress_every == 0 {
            eprintln!(
                "iter {iters:7}  energy {:+.9e}  residual {:.3e}  step {:.2e}",
                energy.total(),
                residual,
                step
            );
        }
    }
    if stop == StopReason::MaxIters && residual <= opts.tol_residual {
        stop = StopReason::Converged;
    }

    let report = SolveReport {
        iterations: iters,
        final_energy: energy,
        residual,
        energy_trace,
        converged: stop == StopReason::Converged,
        stop,
    };
    Ok((u, report))
}

/// Gradient descent on the planar Ginzburg-Landau energy, Dirichlet trace
/// pinned to `g` on the boundary chain. No unit constraint.
pub fn minimize_gl(
    init: &PlanarField,
    g: &BoundaryDatum,
    eps: f64,
    opts: &SolveOptions,
) -> Result<(PlanarField, SolveReport)> {
    opts.validate()?;
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let mut u = init.clone();
    u.set_boundary(g);
    let dom = Arc::clone(&u.domain);
    let mut free: Vec<bool> = dom.masks().iter().map(|&m| m == NodeKind::Interior).collect();
    for c in dom.chain() {
        free[c.node] = false;
    }

    let mut energy = gl_energy(&u, eps);
    if !energy.is_finite() {
        return Err(Error::Diverged(format!("non-finite GL energy at init: {energy}")));
    }

    let lam = 4.0 / (dom.hx * dom.hx) + 4.0 / (dom.hy * dom.hy) + 2.0 / (eps * eps);
    let s_max = 1.8 / lam;
    let mut step = if opts.step_init > 0.0 { opts.step_init.min(s_max) } else { 0.5 * s_max };
    let step_floor = s_max * 1e-14;

    let mut grad: Vec<[f64; 2]> = Vec::new();
    let mut trial = u.clone();
    let mut trace = Vec::with_capacity(1024);
    trace.push(energy);
    let mut residual = f64::INFINITY;
    let mut stop = StopReason::MaxIters;
    let mut iters = 0;

    while iters < opts.max_iters {
        gl_grad(&u, eps, &mut grad);
        let mut res2 = 0.0;
        for idx in 0..dom.n_nodes() {
            if !free[idx] {
                grad[idx] = [0.0; 2];
                continue;
            }
            let w = dom.weight(idx);
            if w == 0.0 {
                grad[idx] = [0.0; 2];
                continue;
            }
            res2 += (grad[idx][0] * grad[idx][0] + grad[idx][1] * grad[idx][1]) / w;
        }
        residual = res2.sqrt();
        if residual <= opts.tol_residual {
            stop = StopReason::Converged;
            break;
        }

        let mut accepted = false;
        while step >= step_floor {
            let uv = u.values();
            let tv = trial.values_mut();
            tv.copy_from_slice(uv);
            let mut decrease = 0.0;
            for idx in 0..dom.n_nodes() {
                if !free[idx] {
                    continue;
                }
                let w = dom.weight(idx);
                if w == 0.0 {
                    continue;
                }
                for c in 0..2 {
                    let delta = -step * grad[idx][c] / w;
                    tv[idx][c] += delta;
                    decrease -= grad[idx][c] * delta;
                }
            }
            let e_new = gl_energy(&trial, eps);
            if e_new <= energy - ARMIJO_C * decrease && e_new.is_finite() {
                std::mem::swap(&mut u, &mut trial);
                energy = e_new;
                accepted = true;
                break;
            }
            step *= opts.step_shrink;
        }
        if !accepted {
            stop = StopReason::NoProgress;
            break;
        }
        iters += 1;
        trace.push(energy);
        step = (step * 1.5).min(s_max);
        if opts.progress_every > 0 && iters % opts.progress_every == 0 {
            eprintln!("gl iter {iters:7}  energy {energy:+.9e}  residual {residual:.3e}");
        }
    }
    if stop == StopReason::MaxIters && residual <= opts.tol_residual {
        stop = StopReason::Converged;
    }

    let report = SolveReport {
        iterations: iters,
        final_energy: EnergyBreakdown { bulk_horizontal: energy, bulk_vertical: 0.0, anchoring: 0.0 },
        residual,
        energy_trace: trace,
        converged: stop == StopReason::Converged,
        stop,
    };
    Ok((u, report))
}

/// One finite-difference rung of the first-variation check.
#[derive(Debug, Clone, Copy)]
pub struct FdSample {
    pub step: f64,
    pub fd_value: f64,
    pub rel_mismatch: f64,
}

#[derive(Debug, Clone)]
pub struct GradientCheckReport {
    /// Assembled directional derivative of the energy along the direction.
    pub derivative: f64,
    pub samples: Vec<FdSample>,
    /// Least-squares slope of log(mismatch) against log(step) over the rungs
    /// that sit above roundoff; `None` when everything is at roundoff.
    pub observed_order: Option<f64>,
}

/// Compare the assembled first variation against central finite differences
/// of the energy along the normalized path `(U + t Phi)/|U + t Phi|`.
pub fn gradient_check(
    u: &DirectorField,
    p: &ScalingParams,
    direction: &[[f64; 3]],
    steps: &[f64],
) -> Result<GradientCheckReport> {
    let grid = &u.grid;
    let dom = &grid.domain;
    let n2 = dom.n_nodes();
    if direction.len() != u.values().len() {
        return Err(Error::ShapeMismatch(format!(
            "direction has {} entries for a field of {}",
            direction.len(),
            u.values().len()
        )));
    }
    // tangential, and zero on the lateral boundary
    let mut max_dot = 0.0f64;
    for (v, d) in u.values().iter().zip(direction) {
        max_dot = max_dot.max((v[0] * d[0] + v[1] * d[1] + v[2] * d[2]).abs());
    }
    if max_dot > 1e-10 {
        return Err(Error::InvalidPerturbation(format!(
            "direction is not tangential: max |U . Phi| = {max_dot:.3e}"
        )));
    }
    for c in dom.chain() {
        for k in 0..grid.n_layers {
            let d = direction[k * n2 + c.node];
            if d[0] != 0.0 || d[1] != 0.0 || d[2] != 0.0 {
                return Err(Error::InvalidPerturbation(
                    "direction must vanish on the lateral boundary".into(),
                ));
            }
        }
    }

    let mut grad = Vec::new();
    energy_grad(u, p, &mut grad);
    let derivative = dot3(&grad, direction);
    let energy_scale = energy_full(u, p).total().abs().max(1e-300);

    let eval = |t: f64| -> f64 {
        let mut v = u.clone();
        let vals = v.values_mut();
        for (i, d) in direction.iter().enumerate() {
            vals[i][0] += t * d[0];
            vals[i][1] += t * d[1];
            vals[i][2] += t * d[2];
            let n = (vals[i][0] * vals[i][0] + vals[i][1] * vals[i][1] + vals[i][2] * vals[i][2]).sqrt();
            if n > 1e-15 {
                vals[i][0] /= n;
                vals[i][1] /= n;
                vals[i][2] /= n;
            }
        }
        energy_full(&v, p).total()
    };

    let scale = derivative.abs().max(1e-14);
    let mut samples = Vec::with_capacity(steps.len());
    for &t in steps {
        let fd = (eval(t) - eval(-t)) / (2.0 * t);
        samples.push(FdSample { step: t, fd_value: fd, rel_mismatch: (fd - derivative).abs() / scale });
    }

    // keep only rungs safely above the central-difference roundoff floor
    let noise = |step: f64| f64::EPSILON * energy_scale / (2.0 * step * scale);
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.rel_mismatch > (32.0 * noise(s.step)).max(1e-13))
        .map(|s| (s.step.ln(), s.rel_mismatch.ln()))
        .collect();
    let observed_order = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let det = n * sxx - sx * sx;
        if det.abs() > 1e-30 {
            Some((n * sxy - sx * sy) / det)
        } else {
            None
        }
    } else {
        None
    };

    Ok(GradientCheckReport { derivative, samples, observed_order })
}

/// Seeded tangential test direction vanishing on the lateral boundary.
pub fn random_tangential_direction(u: &DirectorField, seed: u64) -> Vec<[f64; 3]> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let grid = &u.grid;
    let dom = &grid.domain;
    let n2 = dom.n_nodes();
    let free = free_mask(u);
    let mut dir = vec![[0.0f64; 3]; u.values().len()];
    for k in 0..grid.n_layers {
        for idx in 0..n2 {
            if !free[idx] {
                continue;
            }
            let v = u.values()[k * n2 + idx];
            let w = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let dot = w[0] * v[0] + w[1] * v[1] + w[2] * v[2];
            dir[k * n2 + idx] = [w[0] - dot * v[0], w[1] - dot * v[1], w[2] - dot * v[2]];
        }
    }
    dir
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{extrude, make_domain, power_law_datum, DomainKind, Grid3D};
    use crate::energy::vertical_average;
    use crate::field::{init_director, random_admissible};
    use crate::vortex::locate_defects;
    use std::sync::Arc;

    fn disk_grid(res: usize, layers: usize) -> Arc<Grid3D> {
        let dom = make_domain(DomainKind::Disk { radius: 1.0 }, res, res).unwrap();
        Arc::new(extrude(&dom, layers).unwrap())
    }

    #[test]
    fn constant_field_is_critical() {
        let grid = disk_grid(32, 5);
        let p = ScalingParams::new(0.2, 0.1).unwrap();
        let u = DirectorField::constant(&grid, [1.0, 0.0, 0.0]);
        assert_eq!(el_residual(&u, &p), 0.0);
        let v = DirectorField::constant(&grid, [0.0, 0.0, 1.0]);
        assert_eq!(el_residual(&v, &p), 0.0);
    }

    #[test]
    fn degree_zero_relaxes_to_constant() {
        let grid = disk_grid(32, 5);
        let g = power_law_datum(&grid.domain, 0);
        let p = ScalingParams::new(0.3, 0.15).unwrap();
        let init = random_admissible(&grid, &g, 9, 0.4, 1);
        let opts = SolveOptions { tol_residual: 1e-6, max_iters: 20_000, ..Default::default() };
        let (u, rep) = minimize_full(&init, &g, &p, &opts).unwrap();
        assert!(rep.converged, "stopped {:?} at residual {:.3e}", rep.stop, rep.residual);
        assert!(rep.final_energy.total() < 1e-6, "final energy {}", rep.final_energy.total());
        assert!(locate_defects(&vertical_average(&u), 0.5).items.is_empty());
        // energy trace never increases
        for w in rep.energy_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-14 * w[0].abs().max(1.0));
        }
    }

    #[test]
    fn degree_one_produces_center_defect() {
        let grid = disk_grid(64, 6);
        let g = power_law_datum(&grid.domain, 1);
        let p = ScalingParams::new(0.15, 0.15 / std::f64::consts::SQRT_2).unwrap();
        let init = init_director(&grid, &g, 4, 1e-2);
        let opts = SolveOptions { tol_residual: 2e-3, max_iters: 30_000, ..Default::default() };
        let (u, rep) = minimize_full(&init, &g, &p, &opts).unwrap();
        assert!(rep.converged, "stopped {:?} at residual {:.3e}", rep.stop, rep.residual);
        assert!(el_residual(&u, &p) <= opts.tol_residual * 1.0001);
        let found = locate_defects(&vertical_average(&u), 0.5);
        assert_eq!(found.items.len(), 1, "defects: {:?}", found.items);
        assert_eq!(found.items[0].charge, 1);
        let r = found.items[0].position[0].hypot(found.items[0].position[1]);
        assert!(r <= 2.0 * grid.domain.hx.hypot(grid.domain.hy), "defect at radius {r}");
        // constant-sign property of the out-of-plane component
        let n2 = grid.domain.n_nodes();
        let mut pos = 0usize;
        let mut neg = 0usize;
        for k in 0..grid.n_layers {
            for &idx in grid.domain.interior_nodes() {
                let z = u.values()[k * n2 + idx as usize][2];
                if z > 1e-8 {
                    pos += 1;
                }
                if z < -1e-8 {
                    neg += 1;
                }
            }
        }
        assert!(pos == 0 || neg == 0, "mixed signs: {pos} up, {neg} down");
        // symmetrization leaves the energy unchanged for a one-sign field
        let folded = energy_full(&u.fold_up(), &p);
        assert!((folded.total() - rep.final_energy.total()).abs() <= 1e-10);
    }

    #[test]
    fn sign_flip_covariance_of_traces() {
        let grid = disk_grid(32, 4);
        let g = power_law_datum(&grid.domain, 1);
        let p = ScalingParams::new(0.25, 0.1).unwrap();
        let init = init_director(&grid, &g, 11, 1e-2);
        let opts = SolveOptions { tol_residual: 5e-3, max_iters: 3000, ..Default::default() };
        let (_, rep) = minimize_full(&init, &g, &p, &opts).unwrap();
        let (_, rep_conj) = minimize_full(&init.conjugate(), &g.conjugate(), &p, &opts).unwrap();
        assert_eq!(rep.energy_trace.len(), rep_conj.energy_trace.len());
        for (a, b) in rep.energy_trace.iter().zip(&rep_conj.energy_trace) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn gl_constant_datum_relaxes_to_constant() {
        let dom = make_domain(DomainKind::Disk { radius: 1.0 }, 32, 32).unwrap();
        let g = power_law_datum(&dom, 0);
        let init = PlanarField::from_fn(&dom, |x, y| [1.0 + 0.3 * (3.0 * x).sin(), 0.2 * y]);
        let opts = SolveOptions { tol_residual: 1e-7, max_iters: 20_000, ..Default::default() };
        let (u, rep) = minimize_gl(&init, &g, 0.5, &opts).unwrap();
        assert!(rep.converged);
        assert!(gl_energy(&u, 0.5) < 1e-8);
    }

    #[test]
    fn gl_degree_one_has_a_zero_near_center() {
        let dom = make_domain(DomainKind::Disk { radius: 1.0 }, 64, 64).unwrap();
        let g = power_law_datum(&dom, 1);
        let init = PlanarField::from_fn(&dom, |x, y| {
            let r = x.hypot(y);
            let s = (r / 0.2).min(1.0);
            let th = y.atan2(x);
            [s * th.cos(), s * th.sin()]
        });
        let opts = SolveOptions { tol_residual: 1e-4, max_iters: 40_000, ..Default::default() };
        let (u, rep) = minimize_gl(&init, &g, 0.15, &opts).unwrap();
        assert!(rep.converged, "stopped {:?} residual {:.3e}", rep.stop, rep.residual);
        let found = locate_defects(&u, 0.5);
        assert_eq!(found.items.len(), 1);
        let r = found.items[0].position[0].hypot(found.items[0].position[1]);
        assert!(r <= 2.0 * dom.hx.hypot(dom.hy), "zero at radius {r}");
    }

    #[test]
    fn gradient_check_orders() {
        let grid = disk_grid(32, 5);
        let g = power_law_datum(&grid.domain, 1);
        let p = ScalingParams::new(0.2, 0.1).unwrap();
        let u = random_admissible(&grid, &g, 3, 0.5, 1);

        // zero direction: both sides vanish
        let zero = vec![[0.0; 3]; u.values().len()];
        let rep = gradient_check(&u, &p, &zero, &[1e-2, 1e-3]).unwrap();
        assert_eq!(rep.derivative, 0.0);
        assert!(rep.samples.iter().all(|s| s.fd_value == 0.0));
        assert!(rep.observed_order.is_none());

        // random tangential direction: second order
        let dir = random_tangential_direction(&u, 17);
        let steps = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4];
        let rep = gradient_check(&u, &p, &dir, &steps).unwrap();
        let order = rep.observed_order.expect("order measurable");
        assert!(order >= 1.9, "observed order {order}, samples {:?}", rep.samples);

        // non-tangential direction is rejected
        let mut bad = dir.clone();
        let idx = grid.domain.interior_nodes()[0] as usize;
        bad[idx] = [1.0, 0.0, 0.0];
        assert!(matches!(
            gradient_check(&u, &p, &bad, &[1e-2]),
            Err(Error::InvalidPerturbation(_))
        ));
    }

    #[test]
    fn gl_energy_grows_at_pi_per_log_unit() {
        // slope of GL minimal energy against |log eps| for a degree-1 datum
        let dom = make_domain(DomainKind::Disk { radius: 1.0 }, 128, 128).unwrap();
        let g = power_law_datum(&dom, 1);
        let opts = SolveOptions { tol_residual: 5e-4, max_iters: 60_000, stall_tol: 1e-8, ..Default::default() };
        let mut points = Vec::new();
        let mut init = PlanarField::from_fn(&dom, |x, y| {
            let r = x.hypot(y);
            let s = (r / 0.2).min(1.0);
            let th = y.atan2(x);
            [s * th.cos(), s * th.sin()]
        });
        for eps in [0.2, 0.1, 0.05] {
            let (u, rep) = minimize_gl(&init, &g, eps, &opts).unwrap();
            let found = locate_defects(&u, 0.5);
            assert_eq!(found.items.len(), 1, "eps {eps}: {:?}", found.items);
            points.push(((1.0f64 / eps).ln(), rep.final_energy.bulk_horizontal));
            init = u;
        }
        // least-squares slope across the three eps values
        let n = points.len() as f64;
        let sx: f64 = points.iter().map(|p| p.0).sum();
        let sy: f64 = points.iter().map(|p| p.1).sum();
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let rel = (slope - std::f64::consts::PI).abs() / std::f64::consts::PI;
        assert!(rel < 0.10, "GL energy slope {slope} vs pi (rel {rel:.3})");
    }

    #[test]
    fn gl_minimizer_beats_averaged_slab_minimizer() {
        let grid = disk_grid(64, 6);
        let g = power_law_datum(&grid.domain, 1);
        let eps = 0.15;
        let p = ScalingParams::new(eps, eps / std::f64::consts::SQRT_2).unwrap();
        let opts = SolveOptions { tol_residual: 1e-3, max_iters: 40_000, stall_tol: 1e-7, ..Default::default() };
        let init = init_director(&grid, &g, 4, 1e-2);
        let (u3d, _) = minimize_full(&init, &g, &p, &opts).unwrap();
        let competitor = vertical_average(&u3d);

        let init2d = PlanarField::from_fn(&grid.domain, |x, y| {
            let r = x.hypot(y);
            let s = (r / 0.2).min(1.0);
            let th = y.atan2(x);
            [s * th.cos(), s * th.sin()]
        });
        let (ugl, _) = minimize_gl(&init2d, &g, eps, &opts).unwrap();
        let ours = gl_energy(&ugl, eps);
        let theirs = gl_energy(&competitor, eps);
        assert!(
            ours <= theirs + 1e-6 * theirs.abs(),
            "GL minimizer {ours} must not lose to the averaged competitor {theirs}"
        );
    }

    #[test]
    fn near_critical_derivative_is_small() {
        let grid = disk_grid(32, 4);
        let g = power_law_datum(&grid.domain, 0);
        let p = ScalingParams::new(0.3, 0.2).unwrap();
        let init = random_admissible(&grid, &g, 2, 0.2, 1);
        let opts = SolveOptions { tol_residual: 1e-8, max_iters: 30_000, ..Default::default() };
        let (u, rep) = minimize_full(&init, &g, &p, &opts).unwrap();
        assert!(rep.converged);
        let dir = random_tangential_direction(&u, 5);
        let mut grad = Vec::new();
        energy_grad(&u, &p, &mut grad);
        let deriv = dot3(&grad, &dir);
        // |<T, Phi>| <= residual * ||Phi||_mass
        let n2 = grid.domain.n_nodes();
        let mut norm2 = 0.0;
        for k in 0..grid.n_layers {
            let tz = grid.layer_weight(k);
            for idx in 0..n2 {
                let w = grid.domain.weight(idx) * tz;
                let d = dir[k * n2 + idx];
                norm2 += w * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
            }
        }
        assert!(deriv.abs() <= rep.residual.max(opts.tol_residual) * norm2.sqrt() * 1.01);
    }
}

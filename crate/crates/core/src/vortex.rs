//! Currents, distributional Jacobians, loop degrees, and defect detection in
//! planar fields.
//!
//! Winding numbers come from branch-corrected angle increments, which stay
//! integer-exact as long as the field is bounded away from zero along the
//! loop; the `j . tau` quadrature is kept as a cross-check mode only.

use std::f64::consts::PI;

use crate::domain::{Domain2D, NodeKind};
use crate::error::{Error, Result};
use crate::field::{PlanarField, ScalarField2D};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Defect {
    pub position: [f64; 2],
    pub charge: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Detected,
    Prescribed,
}

#[derive(Debug, Clone)]
pub struct DefectSet {
    pub items: Vec<Defect>,
    pub provenance: Provenance,
    pub warnings: Vec<String>,
}

impl DefectSet {
    /// Prescribed defect set; positions must be pairwise distinct and charges
    /// nonzero.
    pub fn prescribed(items: Vec<Defect>) -> Result<Self> {
        for (n, d) in items.iter().enumerate() {
            if d.charge == 0 {
                return Err(Error::InvalidConfiguration(format!("defect {n} has zero charge")));
            }
            for other in &items[..n] {
                let dist = (d.position[0] - other.position[0]).hypot(d.position[1] - other.position[1]);
                if dist == 0.0 {
                    return Err(Error::InvalidConfiguration(format!(
                        "coincident defect positions at ({}, {})",
                        d.position[0], d.position[1]
                    )));
                }
            }
        }
        Ok(Self { items, provenance: Provenance::Prescribed, warnings: Vec::new() })
    }

    pub fn total_charge(&self) -> i32 {
        self.items.iter().map(|d| d.charge).sum()
    }

    /// All positions strictly inside the domain?
    pub fn all_interior(&self, domain: &Domain2D) -> bool {
        self.items.iter().all(|d| domain.signed_distance(d.position) > 0.0)
    }

    /// CSV rows `x,y,charge`.
    pub fn csv_rows(&self) -> String {
        let mut s = String::from("x,y,charge\n");
        for d in &self.items {
            s.push_str(&format!("{},{},{}\n", d.position[0], d.position[1], d.charge));
        }
        s
    }
}

/// The current `j(u) = u1 D u2 - u2 D u1`, evaluated with the domain stencils.
pub fn current(u: &PlanarField) -> PlanarField {
    let dom = &u.domain;
    let vals = u.values();
    let mut out = PlanarField::zeros(dom);
    for idx in 0..dom.n_nodes() {
        if dom.mask(idx) == NodeKind::Exterior {
            continue;
        }
        let sx = dom.stencil_x(idx);
        let sy = dom.stencil_y(idx);
        let v = vals[idx];
        let du2dx = (vals[sx.plus as usize][1] - vals[sx.minus as usize][1]) * sx.inv;
        let du1dx = (vals[sx.plus as usize][0] - vals[sx.minus as usize][0]) * sx.inv;
        let du2dy = (vals[sy.plus as usize][1] - vals[sy.minus as usize][1]) * sy.inv;
        let du1dy = (vals[sy.plus as usize][0] - vals[sy.minus as usize][0]) * sy.inv;
        out.values_mut()[idx] = [v[0] * du2dx - v[1] * du1dx, v[0] * du2dy - v[1] * du1dy];
    }
    out
}

/// The distributional Jacobian `Ju = curl j(u)`; approximates `2 det Du` for
/// smooth fields.
pub fn jacobian(u: &PlanarField) -> ScalarField2D {
    let j = current(u);
    let dom = &u.domain;
    let jv = j.values();
    let mut out = ScalarField2D::zeros(dom);
    for idx in 0..dom.n_nodes() {
        if dom.mask(idx) == NodeKind::Exterior {
            continue;
        }
        let sx = dom.stencil_x(idx);
        let sy = dom.stencil_y(idx);
        let djy_dx = (jv[sx.plus as usize][1] - jv[sx.minus as usize][1]) * sx.inv;
        let djx_dy = (jv[sy.plus as usize][0] - jv[sy.minus as usize][0]) * sy.inv;
        out.values_mut()[idx] = djy_dx - djx_dy;
    }
    out
}

#[inline]
fn wrapped_increment(a: [f64; 2], b: [f64; 2]) -> f64 {
    let cross = a[0] * b[1] - a[1] * b[0];
    let dot = a[0] * b[0] + a[1] * b[1];
    cross.atan2(dot)
}

/// Winding number of `u` along an ordered node cycle. The loop must stay
/// away from defect cores: `|u| >= 0.5` at every loop node.
pub fn degree_on_loop(u: &PlanarField, loop_nodes: &[usize]) -> Result<i32> {
    if loop_nodes.len() < 3 {
        return Err(Error::InvalidParameter("loop needs at least 3 nodes".into()));
    }
    let vals = u.values();
    for &n in loop_nodes {
        let v = vals[n];
        if v[0].hypot(v[1]) < 0.5 {
            let p = u.domain.node_pos(n);
            return Err(Error::IllDefinedDegree(format!(
                "|u| < 0.5 at loop node ({}, {}); the loop crosses a defect core",
                p[0], p[1]
            )));
        }
    }
    let mut total = 0.0;
    for t in 0..loop_nodes.len() {
        let a = vals[loop_nodes[t]];
        let b = vals[loop_nodes[(t + 1) % loop_nodes.len()]];
        total += wrapped_increment(a, b);
    }
    Ok((total / (2.0 * PI)).round() as i32)
}

/// Cross-check mode: the same degree from the trapezoid quadrature of
/// `j(u) . tau` along the loop polygon. Noisy near cores; not used for
/// detection.
pub fn degree_on_loop_flux(u: &PlanarField, loop_nodes: &[usize]) -> f64 {
    let j = current(u);
    let jv = j.values();
    let dom = &u.domain;
    let m = loop_nodes.len();
    let mut total = 0.0;
    for t in 0..m {
        let (na, nb) = (loop_nodes[t], loop_nodes[(t + 1) % m]);
        let (pa, pb) = (dom.node_pos(na), dom.node_pos(nb));
        let dl = [pb[0] - pa[0], pb[1] - pa[1]];
        total += 0.5 * ((jv[na][0] + jv[nb][0]) * dl[0] + (jv[na][1] + jv[nb][1]) * dl[1]);
    }
    total / (2.0 * PI)
}

/// Axis-aligned rectangular node loop (counterclockwise), handy for degree
/// checks on grid fields.
pub fn rect_loop(domain: &Domain2D, i0: usize, j0: usize, i1: usize, j1: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for i in i0..=i1 {
        out.push(domain.idx(i, j0));
    }
    for j in j0 + 1..=j1 {
        out.push(domain.idx(i1, j));
    }
    for i in (i0..i1).rev() {
        out.push(domain.idx(i, j1));
    }
    for j in (j0 + 1..j1).rev() {
        out.push(domain.idx(i0, j));
    }
    out
}

/// Per-plaquette winding of `u`: nonzero only on cells enclosing a zero of
/// the (continuous interpolation of the) field.
fn plaquette_winding(u: &PlanarField, i: usize, j: usize) -> i32 {
    let dom = &u.domain;
    let vals = u.values();
    let corners = [
        dom.idx(i, j),
        dom.idx(i + 1, j),
        dom.idx(i + 1, j + 1),
        dom.idx(i, j + 1),
    ];
    let mut total = 0.0;
    for t in 0..4 {
        total += wrapped_increment(vals[corners[t]], vals[corners[(t + 1) % 4]]);
    }
    (total / (2.0 * PI)).round() as i32
}

/// Locate defects: cluster plaquettes that either carry winding or sit inside
/// a low-|u| core, 8-connected; cluster charge is the winding sum and the
/// position a weighted centroid. Zero-charge noise clusters are dropped.
pub fn locate_defects(u: &PlanarField, core_threshold: f64) -> DefectSet {
    let dom = &u.domain;
    let (nx, ny) = (dom.nx, dom.ny);
    let vals = u.values();
    let ncells = (nx - 1) * (ny - 1);
    let cidx = |i: usize, j: usize| j * (nx - 1) + i;

    // candidate plaquettes
    let mut winding = vec![0i32; ncells];
    let mut low = vec![false; ncells];
    let mut candidate = vec![false; ncells];
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let corners = [dom.idx(i, j), dom.idx(i + 1, j), dom.idx(i + 1, j + 1), dom.idx(i, j + 1)];
            if corners.iter().any(|&c| dom.mask(c) == NodeKind::Exterior) {
                continue;
            }
            let minn = corners
                .iter()
                .map(|&c| vals[c][0].hypot(vals[c][1]))
                .fold(f64::INFINITY, f64::min);
            let w = plaquette_winding(u, i, j);
            let c = cidx(i, j);
            winding[c] = w;
            low[c] = minn < core_threshold;
            candidate[c] = w != 0 || low[c];
        }
    }

    // 8-connected clustering, row-major deterministic order
    let mut cluster = vec![usize::MAX; ncells];
    let mut clusters: Vec<Vec<(usize, usize)>> = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = cidx(i, j);
            if !candidate[c] || cluster[c] != usize::MAX {
                continue;
            }
            let id = clusters.len();
            let mut cells = Vec::new();
            let mut stack = vec![(i, j)];
            cluster[c] = id;
            while let Some((ci, cj)) = stack.pop() {
                cells.push((ci, cj));
                for dj in -1i64..=1 {
                    for di in -1i64..=1 {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let (ni, nj) = (ci as i64 + di, cj as i64 + dj);
                        if ni < 0 || nj < 0 || ni >= (nx - 1) as i64 || nj >= (ny - 1) as i64 {
                            continue;
                        }
                        let nc = cidx(ni as usize, nj as usize);
                        if candidate[nc] && cluster[nc] == usize::MAX {
                            cluster[nc] = id;
                            stack.push((ni as usize, nj as usize));
                        }
                    }
                }
            }
            cells.sort_unstable();
            clusters.push(cells);
        }
    }

    let mut items = Vec::new();
    let mut warnings = Vec::new();
    for cells in &clusters {
        let mut charge = 0i32;
        let mut wsum = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        let (mut imin, mut imax, mut jmin, mut jmax) = (usize::MAX, 0usize, usize::MAX, 0usize);
        let mut touches_boundary = false;
        for &(i, j) in cells {
            let c = cidx(i, j);
            charge += winding[c];
            let corners = [dom.idx(i, j), dom.idx(i + 1, j), dom.idx(i + 1, j + 1), dom.idx(i, j + 1)];
            let minn = corners
                .iter()
                .map(|&cc| vals[cc][0].hypot(vals[cc][1]))
                .fold(f64::INFINITY, f64::min);
            if corners.iter().any(|&cc| dom.mask(cc) == NodeKind::Boundary) {
                touches_boundary = true;
            }
            let p0 = dom.node_pos(dom.idx(i, j));
            let center = [p0[0] + dom.hx / 2.0, p0[1] + dom.hy / 2.0];
            let w = (1.0 - minn).max(0.0) + winding[c].abs() as f64;
            wsum += w;
            cx += w * center[0];
            cy += w * center[1];
            imin = imin.min(i);
            imax = imax.max(i);
            jmin = jmin.min(j);
            jmax = jmax.max(j);
        }
        let diameter = (imax - imin).max(jmax - jmin) + 1;
        if charge == 0 {
            if diameter >= 3 {
                warnings.push(format!(
                    "zero-net-winding core cluster of diameter {diameter} cells near ({:.4}, {:.4})",
                    cx / wsum.max(1e-300),
                    cy / wsum.max(1e-300)
                ));
            }
            continue;
        }
        let position = if wsum > 0.0 {
            [cx / wsum, cy / wsum]
        } else {
            let (i, j) = cells[0];
            let p0 = dom.node_pos(dom.idx(i, j));
            [p0[0] + dom.hx / 2.0, p0[1] + dom.hy / 2.0]
        };
        if touches_boundary {
            warnings.push(format!(
                "defect cluster touches the domain boundary near ({:.4}, {:.4}); no interior ground truth there",
                position[0], position[1]
            ));
        }
        items.push(Defect { position, charge });
    }

    DefectSet { items, provenance: Provenance::Detected, warnings }
}

//! The 2D cross-section, its extrusion to the slab, and lateral boundary data.
//!
//! Curved domains live on a masked Cartesian grid. Nodes strictly inside the
//! domain are `Interior`; nodes outside (or on) the boundary that touch an
//! interior node are `Boundary` and carry Dirichlet values evaluated at their
//! nearest-point projection onto the true boundary; everything else is
//! `Exterior` and never enters any quadrature or stencil.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainKind {
    Disk { radius: f64 },
    Rectangle { width: f64, height: f64 },
    Annulus { r_in: f64, r_out: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Boundary,
    Exterior,
}

/// Two-point derivative stencil: `d = (v[plus] - v[minus]) * inv`.
/// `inv == 0` marks a degenerate direction (no usable neighbors).
#[derive(Debug, Clone, Copy)]
pub struct Stencil1d {
    pub plus: u32,
    pub minus: u32,
    pub inv: f64,
}

/// One node of the ordered counterclockwise boundary chain.
#[derive(Debug, Clone, Copy)]
pub struct ChainNode {
    /// Grid index of the boundary (ghost) node.
    pub node: usize,
    /// Nearest point on the true boundary.
    pub point: [f64; 2],
    /// Outward unit normal at `point`.
    pub normal: [f64; 2],
    /// Arc-length parameter of `point`.
    pub arc: f64,
    /// Arc-length quadrature weight.
    pub ds: f64,
}

#[derive(Debug, Clone)]
pub struct Domain2D {
    pub kind: DomainKind,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    x0: f64,
    y0: f64,
    mask: Vec<NodeKind>,
    /// Dual-cell area per node, clipped to the domain. Zero on exterior nodes.
    weights: Vec<f64>,
    stencil_x: Vec<Stencil1d>,
    stencil_y: Vec<Stencil1d>,
    chain: Vec<ChainNode>,
    interior: Vec<u32>,
    area: f64,
    perimeter: f64,
}

impl Domain2D {
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node_pos(&self, idx: usize) -> [f64; 2] {
        let i = idx % self.nx;
        let j = idx / self.nx;
        [self.x0 + i as f64 * self.hx, self.y0 + j as f64 * self.hy]
    }

    #[inline]
    pub fn mask(&self, idx: usize) -> NodeKind {
        self.mask[idx]
    }

    #[inline]
    pub fn weight(&self, idx: usize) -> f64 {
        self.weights[idx]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn masks(&self) -> &[NodeKind] {
        &self.mask
    }

    #[inline]
    pub fn stencil_x(&self, idx: usize) -> Stencil1d {
        self.stencil_x[idx]
    }

    #[inline]
    pub fn stencil_y(&self, idx: usize) -> Stencil1d {
        self.stencil_y[idx]
    }

    pub fn chain(&self) -> &[ChainNode] {
        &self.chain
    }

    pub fn interior_nodes(&self) -> &[u32] {
        &self.interior
    }

    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    /// All domains here are centered on the origin.
    pub fn centroid(&self) -> [f64; 2] {
        [0.0, 0.0]
    }

    /// Signed distance to the boundary, positive inside.
    pub fn signed_distance(&self, p: [f64; 2]) -> f64 {
        match self.kind {
            DomainKind::Disk { radius } => radius - p[0].hypot(p[1]),
            DomainKind::Rectangle { width, height } => {
                (width / 2.0 - p[0].abs()).min(height / 2.0 - p[1].abs())
            }
            DomainKind::Annulus { r_in, r_out } => {
                let r = p[0].hypot(p[1]);
                (r - r_in).min(r_out - r)
            }
        }
    }

    /// Outward unit direction used to size the dual-cell cut, and the nearest
    /// boundary point.
    fn boundary_projection(&self, p: [f64; 2]) -> ([f64; 2], [f64; 2]) {
        match self.kind {
            DomainKind::Disk { radius } => {
                let r = p[0].hypot(p[1]).max(1e-300);
                let n = [p[0] / r, p[1] / r];
                ([radius * n[0], radius * n[1]], n)
            }
            DomainKind::Rectangle { width, height } => {
                let dx = width / 2.0 - p[0].abs();
                let dy = height / 2.0 - p[1].abs();
                if dx <= dy {
                    let s = p[0].signum();
                    ([s * width / 2.0, p[1]], [s, 0.0])
                } else {
                    let s = p[1].signum();
                    ([p[0], s * height / 2.0], [0.0, s])
                }
            }
            DomainKind::Annulus { r_in, r_out } => {
                let r = p[0].hypot(p[1]).max(1e-300);
                let u = [p[0] / r, p[1] / r];
                if r - r_in <= r_out - r {
                    ([r_in * u[0], r_in * u[1]], [-u[0], -u[1]])
                } else {
                    ([r_out * u[0], r_out * u[1]], u)
                }
            }
        }
    }
}

/// Build a masked grid with an ordered boundary chain. `nx`, `ny` count nodes
/// per side and must be at least 16.
pub fn make_domain(kind: DomainKind, nx: usize, ny: usize) -> Result<Arc<Domain2D>> {
    if nx < 16 || ny < 16 {
        return Err(Error::InvalidParameter(format!(
            "resolution must be at least 16 nodes per side, got {nx}x{ny}"
        )));
    }
    let (xh, yh) = match kind {
        DomainKind::Disk { radius } => {
            if !(radius > 0.0) {
                return Err(Error::InvalidGeometry(format!("disk radius must be positive, got {radius}")));
            }
            (radius, radius)
        }
        DomainKind::Rectangle { width, height } => {
            if !(width > 0.0) || !(height > 0.0) {
                return Err(Error::InvalidGeometry(format!(
                    "rectangle sides must be positive, got {width}x{height}"
                )));
            }
            (width / 2.0, height / 2.0)
        }
        DomainKind::Annulus { r_in, r_out } => {
            if !(r_in > 0.0) || !(r_out > r_in) {
                return Err(Error::InvalidGeometry(format!(
                    "annulus requires 0 < r_in < r_out, got r_in={r_in}, r_out={r_out}"
                )));
            }
            (r_out, r_out)
        }
    };

    let hx = 2.0 * xh / (nx - 1) as f64;
    let hy = 2.0 * yh / (ny - 1) as f64;
    let (x0, y0) = (-xh, -yh);
    let n = nx * ny;

    let mut dom = Domain2D {
        kind,
        nx,
        ny,
        hx,
        hy,
        x0,
        y0,
        mask: vec![NodeKind::Exterior; n],
        weights: vec![0.0; n],
        stencil_x: vec![Stencil1d { plus: 0, minus: 0, inv: 0.0 }; n],
        stencil_y: vec![Stencil1d { plus: 0, minus: 0, inv: 0.0 }; n],
        chain: Vec::new(),
        interior: Vec::new(),
        area: 0.0,
        perimeter: 0.0,
    };

    // Mask pass. Rectangles put the outermost node ring exactly on the
    // boundary; curved kinds mark exterior nodes adjacent to the interior.
    match kind {
        DomainKind::Rectangle { .. } => {
            for j in 0..ny {
                for i in 0..nx {
                    let idx = dom.idx(i, j);
                    dom.mask[idx] = if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                        NodeKind::Boundary
                    } else {
                        NodeKind::Interior
                    };
                }
            }
        }
        _ => {
            for j in 0..ny {
                for i in 0..nx {
                    let idx = dom.idx(i, j);
                    if dom.signed_distance(dom.node_pos(idx)) > 0.0 {
                        dom.mask[idx] = NodeKind::Interior;
                    }
                }
            }
            for j in 0..ny {
                for i in 0..nx {
                    let idx = dom.idx(i, j);
                    if dom.mask[idx] == NodeKind::Interior {
                        continue;
                    }
                    'adj: for dj in -1i64..=1 {
                        for di in -1i64..=1 {
                            let (ii, jj) = (i as i64 + di, j as i64 + dj);
                            if ii < 0 || jj < 0 || ii >= nx as i64 || jj >= ny as i64 {
                                continue;
                            }
                            if dom.mask[dom.idx(ii as usize, jj as usize)] == NodeKind::Interior {
                                dom.mask[idx] = NodeKind::Boundary;
                                break 'adj;
                            }
                        }
                    }
                }
            }
        }
    }

    // Quadrature weights: dual-cell areas clipped to the domain.
    match kind {
        DomainKind::Rectangle { .. } => {
            for j in 0..ny {
                let wy = if j == 0 || j == ny - 1 { hy / 2.0 } else { hy };
                for i in 0..nx {
                    let wx = if i == 0 || i == nx - 1 { hx / 2.0 } else { hx };
                    let idx = dom.idx(i, j);
                    dom.weights[idx] = wx * wy;
                }
            }
        }
        _ => {
            for idx in 0..n {
                if dom.mask[idx] == NodeKind::Exterior {
                    continue;
                }
                let p = dom.node_pos(idx);
                let d = dom.signed_distance(p);
                let (_, nrm) = dom.boundary_projection(p);
                let den = nrm[0].abs() * hx + nrm[1].abs() * hy;
                let frac = (0.5 + d / den).clamp(0.0, 1.0);
                dom.weights[idx] = hx * hy * frac;
            }
        }
    }
    dom.area = dom.weights.iter().sum();

    // Derivative stencils for every non-exterior node: centered where both
    // neighbors carry values, one-sided otherwise.
    let valid = |m: NodeKind| m != NodeKind::Exterior;
    for j in 0..ny {
        for i in 0..nx {
            let idx = dom.idx(i, j);
            if !valid(dom.mask[idx]) {
                continue;
            }
            let xm = i > 0 && valid(dom.mask[idx - 1]);
            let xp = i + 1 < nx && valid(dom.mask[idx + 1]);
            dom.stencil_x[idx] = match (xm, xp) {
                (true, true) => Stencil1d { plus: (idx + 1) as u32, minus: (idx - 1) as u32, inv: 0.5 / hx },
                (false, true) => Stencil1d { plus: (idx + 1) as u32, minus: idx as u32, inv: 1.0 / hx },
                (true, false) => Stencil1d { plus: idx as u32, minus: (idx - 1) as u32, inv: 1.0 / hx },
                (false, false) => Stencil1d { plus: idx as u32, minus: idx as u32, inv: 0.0 },
            };
            let ym = j > 0 && valid(dom.mask[idx - nx]);
            let yp = j + 1 < ny && valid(dom.mask[idx + nx]);
            dom.stencil_y[idx] = match (ym, yp) {
                (true, true) => Stencil1d { plus: (idx + nx) as u32, minus: (idx - nx) as u32, inv: 0.5 / hy },
                (false, true) => Stencil1d { plus: (idx + nx) as u32, minus: idx as u32, inv: 1.0 / hy },
                (true, false) => Stencil1d { plus: idx as u32, minus: (idx - nx) as u32, inv: 1.0 / hy },
                (false, false) => Stencil1d { plus: idx as u32, minus: idx as u32, inv: 0.0 },
            };
        }
    }

    dom.interior = (0..n).filter(|&i| dom.mask[i] == NodeKind::Interior).map(|i| i as u32).collect();
    if dom.interior.is_empty() {
        return Err(Error::InvalidGeometry("no interior nodes at this resolution".into()));
    }
    check_interior_connected(&dom)?;

    build_chain(&mut dom)?;
    Ok(Arc::new(dom))
}

fn check_interior_connected(dom: &Domain2D) -> Result<()> {
    let n = dom.n_nodes();
    let mut seen = vec![false; n];
    let start = dom.interior[0] as usize;
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 0usize;
    while let Some(idx) = stack.pop() {
        count += 1;
        let i = idx % dom.nx;
        let j = idx / dom.nx;
        let push = |ii: usize, jj: usize, stack: &mut Vec<usize>, seen: &mut Vec<bool>| {
            let q = dom.idx(ii, jj);
            if !seen[q] && dom.mask[q] == NodeKind::Interior {
                seen[q] = true;
                stack.push(q);
            }
        };
        if i > 0 {
            push(i - 1, j, &mut stack, &mut seen);
        }
        if i + 1 < dom.nx {
            push(i + 1, j, &mut stack, &mut seen);
        }
        if j > 0 {
            push(i, j - 1, &mut stack, &mut seen);
        }
        if j + 1 < dom.ny {
            push(i, j + 1, &mut stack, &mut seen);
        }
    }
    if count != dom.interior.len() {
        return Err(Error::InvalidGeometry(format!(
            "interior nodes split into disconnected components ({count} of {})",
            dom.interior.len()
        )));
    }
    Ok(())
}

fn build_chain(dom: &mut Domain2D) -> Result<()> {
    match dom.kind {
        DomainKind::Rectangle { width, height } => {
            let (nx, ny) = (dom.nx, dom.ny);
            let mut walk: Vec<usize> = Vec::with_capacity(2 * (nx + ny) - 4);
            walk.extend((0..nx).map(|i| dom.idx(i, 0)));
            walk.extend((1..ny).map(|j| dom.idx(nx - 1, j)));
            walk.extend((0..nx - 1).rev().map(|i| dom.idx(i, ny - 1)));
            walk.extend((1..ny - 1).rev().map(|j| dom.idx(0, j)));
            let m = walk.len();
            let perimeter = 2.0 * (width + height);
            let mut arc = 0.0;
            let mut chain = Vec::with_capacity(m);
            for (t, &node) in walk.iter().enumerate() {
                let p = dom.node_pos(node);
                let i = node % nx;
                let j = node / nx;
                let mut nrm = [0.0f64, 0.0];
                if j == 0 {
                    nrm[1] -= 1.0;
                }
                if j == ny - 1 {
                    nrm[1] += 1.0;
                }
                if i == 0 {
                    nrm[0] -= 1.0;
                }
                if i == nx - 1 {
                    nrm[0] += 1.0;
                }
                let len = nrm[0].hypot(nrm[1]).max(1e-300);
                let nrm = [nrm[0] / len, nrm[1] / len];
                if t > 0 {
                    let q = dom.node_pos(walk[t - 1]);
                    arc += (p[0] - q[0]).hypot(p[1] - q[1]);
                }
                chain.push(ChainNode { node, point: p, normal: nrm, arc, ds: 0.0 });
            }
            // cyclic half-gap weights
            for t in 0..m {
                let prev = chain[(t + m - 1) % m].arc;
                let next = chain[(t + 1) % m].arc;
                let gap_next = if t + 1 == m { perimeter - chain[t].arc + next } else { next - chain[t].arc };
                let gap_prev = if t == 0 { chain[t].arc + perimeter - prev } else { chain[t].arc - prev };
                chain[t].ds = 0.5 * (gap_next + gap_prev);
            }
            dom.perimeter = perimeter;
            dom.chain = chain;
        }
        DomainKind::Disk { radius } | DomainKind::Annulus { r_out: radius, .. } => {
            // Outer boundary only; the annulus inner ring stays plain ghost
            // nodes (annuli are analytic-fixture domains, never solved on).
            let r_mid = match dom.kind {
                DomainKind::Annulus { r_in, r_out } => 0.5 * (r_in + r_out),
                _ => 0.0,
            };
            let mut items: Vec<(f64, usize)> = Vec::new();
            for idx in 0..dom.n_nodes() {
                if dom.mask[idx] != NodeKind::Boundary {
                    continue;
                }
                let p = dom.node_pos(idx);
                let r = p[0].hypot(p[1]);
                if r <= r_mid {
                    continue;
                }
                let mut th = p[1].atan2(p[0]);
                if th < 0.0 {
                    th += 2.0 * PI;
                }
                items.push((th, idx));
            }
            if items.is_empty() {
                return Err(Error::InvalidGeometry("empty boundary chain".into()));
            }
            items.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let m = items.len();
            let mut chain = Vec::with_capacity(m);
            for &(th, node) in &items {
                chain.push(ChainNode {
                    node,
                    point: [radius * th.cos(), radius * th.sin()],
                    normal: [th.cos(), th.sin()],
                    arc: radius * th,
                    ds: 0.0,
                });
            }
            let perimeter = 2.0 * PI * radius;
            for t in 0..m {
                let next = chain[(t + 1) % m].arc;
                let prev = chain[(t + m - 1) % m].arc;
                let gap_next = if t + 1 == m { perimeter - chain[t].arc + next } else { next - chain[t].arc };
                let gap_prev = if t == 0 { chain[t].arc + perimeter - prev } else { chain[t].arc - prev };
                chain[t].ds = 0.5 * (gap_next + gap_prev);
            }
            dom.perimeter = perimeter;
            dom.chain = chain;
        }
    }
    Ok(())
}

/// S1-valued lateral Dirichlet datum, sampled on the boundary chain.
#[derive(Debug, Clone)]
pub struct BoundaryDatum {
    values: Vec<[f64; 2]>,
    analytic: Option<i32>,
    degree: i32,
}

impl BoundaryDatum {
    /// Datum from explicit unit vectors, one per chain node.
    pub fn from_values(domain: &Domain2D, values: Vec<[f64; 2]>) -> Result<Self> {
        if values.len() != domain.chain().len() {
            return Err(Error::ShapeMismatch(format!(
                "datum has {} values for a chain of {} nodes",
                values.len(),
                domain.chain().len()
            )));
        }
        for v in &values {
            let n = v[0].hypot(v[1]);
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!("datum values must be unit vectors, |g|={n}")));
            }
        }
        let degree = chain_winding(&values);
        Ok(Self { values, analytic: None, degree })
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn analytic_power(&self) -> Option<i32> {
        self.analytic
    }

    /// Winding number of the datum along the chain.
    pub fn degree(&self) -> i32 {
        self.degree
    }

    /// Component-wise conjugate (g1, -g2); degree negates.
    pub fn conjugate(&self) -> Self {
        Self {
            values: self.values.iter().map(|g| [g[0], -g[1]]).collect(),
            analytic: self.analytic.map(|d| -d),
            degree: -self.degree,
        }
    }
}

/// `g(theta) = (cos d theta, sin d theta)` with `theta` measured about the
/// domain centroid at the exact chain points.
pub fn power_law_datum(domain: &Domain2D, d: i32) -> BoundaryDatum {
    let values: Vec<[f64; 2]> = domain
        .chain()
        .iter()
        .map(|c| {
            let th = c.point[1].atan2(c.point[0]);
            let a = d as f64 * th;
            [a.cos(), a.sin()]
        })
        .collect();
    let degree = chain_winding(&values);
    BoundaryDatum { values, analytic: Some(d), degree }
}

/// Branch-corrected winding of a cyclic list of (nearly) unit vectors.
pub(crate) fn chain_winding(values: &[[f64; 2]]) -> i32 {
    let mut total = 0.0f64;
    let m = values.len();
    for t in 0..m {
        let a = values[t];
        let b = values[(t + 1) % m];
        // arg(b/a)
        let cross = a[0] * b[1] - a[1] * b[0];
        let dot = a[0] * b[0] + a[1] * b[1];
        total += cross.atan2(dot);
    }
    (total / (2.0 * PI)).round() as i32
}

/// Extruded slab grid `Omega x (0,1)` with `n_layers` nodes across the height.
#[derive(Debug, Clone)]
pub struct Grid3D {
    pub domain: Arc<Domain2D>,
    pub n_layers: usize,
    pub hz: f64,
}

impl Grid3D {
    pub fn n_nodes(&self) -> usize {
        self.domain.n_nodes() * self.n_layers
    }

    /// Nodes on the lateral face (boundary chain times layers).
    pub fn lateral_node_count(&self) -> usize {
        self.domain.chain().len() * self.n_layers
    }

    /// Trapezoid weight of layer `k` for integrals across the height.
    #[inline]
    pub fn layer_weight(&self, k: usize) -> f64 {
        if k == 0 || k == self.n_layers - 1 {
            self.hz / 2.0
        } else {
            self.hz
        }
    }
}

pub fn extrude(domain: &Arc<Domain2D>, n_layers: usize) -> Result<Grid3D> {
    if n_layers < 2 {
        return Err(Error::InvalidParameter(format!(
            "extrusion needs at least 2 layers, got {n_layers}"
        )));
    }
    Ok(Grid3D { domain: Arc::clone(domain), n_layers, hz: 1.0 / (n_layers - 1) as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_area_close_to_analytic() {
        let dom = make_domain(DomainKind::Disk { radius: 1.0 }, 256, 256).unwrap();
        assert!((dom.area() - PI).abs() / PI < 0.02, "area {}", dom.area());
        // the clipped dual cells should in fact do far better than 2%
        assert!((dom.area() - PI).abs() / PI < 2e-3, "area {}", dom.area());
    }

    #[test]
    fn rectangle_area_exact() {
        let dom = make_domain(DomainKind::Rectangle { width: 2.0, height: 1.0 }, 256, 128).unwrap();
        assert!((dom.area() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bad_geometry_rejected() {
        assert!(make_domain(DomainKind::Annulus { r_in: 0.5, r_out: 0.25 }, 64, 64).is_err());
        assert!(make_domain(DomainKind::Disk { radius: 0.0 }, 64, 64).is_err());
        assert!(make_domain(DomainKind::Disk { radius: 1.0 }, 8, 64).is_err());
    }

    #[test]
    fn chain_is_counterclockwise_and_covers_perimeter() {
        for dom in [
            make_domain(DomainKind::Disk { radius: 1.0 }, 64, 64).unwrap(),
            make_domain(DomainKind::Rectangle { width: 2.0, height: 1.0 }, 64, 32).unwrap(),
        ] {
            let chain = dom.chain();
            let mut shoelace = 0.0;
            for t in 0..chain.len() {
                let a = chain[t].point;
                let b = chain[(t + 1) % chain.len()].point;
                shoelace += a[0] * b[1] - a[1] * b[0];
            }
            assert!(shoelace > 0.0, "chain must be counterclockwise");
            let total_ds: f64 = chain.iter().map(|c| c.ds).sum();
            assert!(
                (total_ds - dom.perimeter()).abs() / dom.perimeter() < 1e-12,
                "ds covers the perimeter: {total_ds} vs {}",
                dom.perimeter()
            );
        }
    }

    #[test]
    fn power_law_degrees() {
        let dom = make_domain(DomainKind::Disk { radius: 1.0 }, 64, 64).unwrap();
        for d in [-2, 0, 1, 2, 3] {
            let g = power_law_datum(&dom, d);
            assert_eq!(g.degree(), d);
            for v in g.values() {
                assert!((v[0].hypot(v[1]) - 1.0).abs() < 1e-15);
            }
        }
        assert_eq!(power_law_datum(&dom, 1).conjugate().degree(), -1);
    }

    #[test]
    fn extrude_examples() {
        let dom = make_domain(DomainKind::Disk { radius: 1.0 }, 64, 64).unwrap();
        let grid = extrude(&dom, 8).unwrap();
        assert!((grid.hz - 1.0 / 7.0).abs() < 1e-15);
        assert!(extrude(&dom, 1).is_err());

        let rect = make_domain(DomainKind::Rectangle { width: 2.0, height: 1.0 }, 64, 32).unwrap();
        let grid = extrude(&rect, 16).unwrap();
        assert_eq!(grid.lateral_node_count(), rect.chain().len() * 16);
    }

    #[test]
    fn masks_are_consistent() {
        let dom = make_domain(DomainKind::Annulus { r_in: 0.25, r_out: 0.5 }, 96, 96).unwrap();
        // every interior node is strictly inside
        for &i in dom.interior_nodes() {
            assert!(dom.signed_distance(dom.node_pos(i as usize)) > 0.0);
        }
        // exterior nodes carry no weight
        for idx in 0..dom.n_nodes() {
            if dom.mask(idx) == NodeKind::Exterior {
                assert_eq!(dom.weight(idx), 0.0);
            }
        }
        let exact = PI * (0.5f64.powi(2) - 0.25f64.powi(2));
        assert!((dom.area() - exact).abs() / exact < 0.02);
    }
}

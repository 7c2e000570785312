//! Field storage: unit-sphere-valued director fields on the slab grid and
//! planar/scalar fields on the cross-section.
//!
//! Director values are stored layer-major (x fastest, then y, then the layer
//! index), matching the on-disk dump order. Exterior nodes hold zeros and are
//! never read through any stencil.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{BoundaryDatum, Domain2D, Grid3D, NodeKind};
use crate::error::{Error, Result};

pub const UNIT_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct DirectorField {
    pub grid: Arc<Grid3D>,
    values: Vec<[f64; 3]>,
}

impl DirectorField {
    pub fn constant(grid: &Arc<Grid3D>, v: [f64; 3]) -> Self {
        let n2 = grid.domain.n_nodes();
        let mut values = vec![[0.0; 3]; n2 * grid.n_layers];
        for k in 0..grid.n_layers {
            for idx in 0..n2 {
                if grid.domain.mask(idx) != NodeKind::Exterior {
                    values[k * n2 + idx] = v;
                }
            }
        }
        Self { grid: Arc::clone(grid), values }
    }

    /// Evaluate `f(x, y, x3)` at every non-exterior node.
    pub fn from_fn(grid: &Arc<Grid3D>, f: impl Fn(f64, f64, f64) -> [f64; 3]) -> Self {
        let n2 = grid.domain.n_nodes();
        let mut values = vec![[0.0; 3]; n2 * grid.n_layers];
        for k in 0..grid.n_layers {
            let z = k as f64 * grid.hz;
            for idx in 0..n2 {
                if grid.domain.mask(idx) == NodeKind::Exterior {
                    continue;
                }
                let p = grid.domain.node_pos(idx);
                values[k * n2 + idx] = f(p[0], p[1], z);
            }
        }
        Self { grid: Arc::clone(grid), values }
    }

    #[inline]
    pub fn idx3(&self, k: usize, idx2: usize) -> usize {
        k * self.grid.domain.n_nodes() + idx2
    }

    pub fn values(&self) -> &[[f64; 3]] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [[f64; 3]] {
        &mut self.values
    }

    /// Pin the lateral face to `(g, 0)` on every layer.
    pub fn set_lateral(&mut self, datum: &BoundaryDatum) {
        let n2 = self.grid.domain.n_nodes();
        let chain = self.grid.domain.chain();
        for (c, g) in chain.iter().zip(datum.values()) {
            for k in 0..self.grid.n_layers {
                self.values[k * n2 + c.node] = [g[0], g[1], 0.0];
            }
        }
    }

    /// Renormalize every non-exterior node to the unit sphere.
    pub fn renormalize(&mut self) {
        let n2 = self.grid.domain.n_nodes();
        let masks = self.grid.domain.masks();
        for k in 0..self.grid.n_layers {
            for idx in 0..n2 {
                if masks[idx] == NodeKind::Exterior {
                    continue;
                }
                let v = &mut self.values[k * n2 + idx];
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if n > 1e-15 {
                    v[0] /= n;
                    v[1] /= n;
                    v[2] /= n;
                }
            }
        }
    }

    /// Check `| |U| - 1 | <= tol` everywhere; returns the first offending
    /// node as `(layer, node, norm)`.
    pub fn validate_unit(&self, tol: f64) -> std::result::Result<(), (usize, usize, f64)> {
        let n2 = self.grid.domain.n_nodes();
        let masks = self.grid.domain.masks();
        for k in 0..self.grid.n_layers {
            for idx in 0..n2 {
                if masks[idx] == NodeKind::Exterior {
                    continue;
                }
                let v = self.values[k * n2 + idx];
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if (n - 1.0).abs() > tol {
                    return Err((k, idx, n));
                }
            }
        }
        Ok(())
    }

    /// The sign-flipped field `(U1, -U2, U3)`; same energy, opposite degree.
    pub fn conjugate(&self) -> Self {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            v[1] = -v[1];
        }
        out
    }

    /// The symmetrized field `(U1, U2, |U3|)`.
    pub fn fold_up(&self) -> Self {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            v[2] = v[2].abs();
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct PlanarField {
    pub domain: Arc<Domain2D>,
    values: Vec<[f64; 2]>,
}

impl PlanarField {
    pub fn zeros(domain: &Arc<Domain2D>) -> Self {
        Self { domain: Arc::clone(domain), values: vec![[0.0; 2]; domain.n_nodes()] }
    }

    pub fn from_fn(domain: &Arc<Domain2D>, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let mut values = vec![[0.0; 2]; domain.n_nodes()];
        for idx in 0..domain.n_nodes() {
            if domain.mask(idx) == NodeKind::Exterior {
                continue;
            }
            let p = domain.node_pos(idx);
            values[idx] = f(p[0], p[1]);
        }
        Self { domain: Arc::clone(domain), values }
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [[f64; 2]] {
        &mut self.values
    }

    /// Pin the boundary chain nodes to the datum values.
    pub fn set_boundary(&mut self, datum: &BoundaryDatum) {
        for (c, g) in self.domain.chain().iter().zip(datum.values()) {
            self.values[c.node] = *g;
        }
    }

    pub fn conjugate(&self) -> Self {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            v[1] = -v[1];
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ScalarField2D {
    pub domain: Arc<Domain2D>,
    values: Vec<f64>,
}

impl ScalarField2D {
    pub fn zeros(domain: &Arc<Domain2D>) -> Self {
        Self { domain: Arc::clone(domain), values: vec![0.0; domain.n_nodes()] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Bilinear interpolation at an interior point.
    pub fn interpolate(&self, p: [f64; 2]) -> Result<f64> {
        let d = &self.domain;
        let origin = d.node_pos(0);
        let fx = (p[0] - origin[0]) / d.hx;
        let fy = (p[1] - origin[1]) / d.hy;
        let i = (fx.floor() as isize).clamp(0, d.nx as isize - 2) as usize;
        let j = (fy.floor() as isize).clamp(0, d.ny as isize - 2) as usize;
        let tx = (fx - i as f64).clamp(0.0, 1.0);
        let ty = (fy - j as f64).clamp(0.0, 1.0);
        let corners = [d.idx(i, j), d.idx(i + 1, j), d.idx(i, j + 1), d.idx(i + 1, j + 1)];
        for &c in &corners {
            if d.mask(c) == NodeKind::Exterior {
                return Err(Error::ShapeMismatch(format!(
                    "interpolation point ({}, {}) touches an exterior node",
                    p[0], p[1]
                )));
            }
        }
        let v00 = self.values[corners[0]];
        let v10 = self.values[corners[1]];
        let v01 = self.values[corners[2]];
        let v11 = self.values[corners[3]];
        Ok(v00 * (1.0 - tx) * (1.0 - ty) + v10 * tx * (1.0 - ty) + v01 * (1.0 - tx) * ty + v11 * tx * ty)
    }
}

/// Default solver initialization: `exp(i d theta)` about the centroid,
/// interpolated onto the north pole inside a two-cell core, lateral values
/// pinned to the datum, plus a seeded tangential perturbation of the interior.
pub fn init_director(grid: &Arc<Grid3D>, datum: &BoundaryDatum, seed: u64, noise: f64) -> DirectorField {
    let d = datum.degree() as f64;
    let dom = &grid.domain;
    let r0 = 2.0 * dom.hx.max(dom.hy);
    let mut field = DirectorField::from_fn(grid, |x, y, _| {
        let r = x.hypot(y);
        let th = y.atan2(x);
        let a = d * th;
        if r < r0 {
            let t = r / r0;
            let v = [t * a.cos(), t * a.sin(), 1.0 - t];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            [v[0] / n, v[1] / n, v[2] / n]
        } else {
            [a.cos(), a.sin(), 0.0]
        }
    });
    if noise > 0.0 {
        perturb_tangentially(&mut field, seed, noise);
    }
    field.set_lateral(datum);
    field
}

/// Seeded tangential perturbation of all interior columns, renormalized.
pub fn perturb_tangentially(field: &mut DirectorField, seed: u64, amplitude: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n2 = field.grid.domain.n_nodes();
    let interior: Vec<usize> = field.grid.domain.interior_nodes().iter().map(|&i| i as usize).collect();
    for k in 0..field.grid.n_layers {
        for &idx in &interior {
            let w = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let v = &mut field.values[k * n2 + idx];
            let dot = w[0] * v[0] + w[1] * v[1] + w[2] * v[2];
            let t = [w[0] - dot * v[0], w[1] - dot * v[1], w[2] - dot * v[2]];
            v[0] += amplitude * t[0];
            v[1] += amplitude * t[1];
            v[2] += amplitude * t[2];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            v[0] /= n;
            v[1] /= n;
            v[2] /= n;
        }
    }
}

/// Random admissible field for property tests: datum-compatible, unit norm,
/// optionally smoothed toward something resembling a relaxed configuration.
pub fn random_admissible(
    grid: &Arc<Grid3D>,
    datum: &BoundaryDatum,
    seed: u64,
    amplitude: f64,
    smoothing_passes: usize,
) -> DirectorField {
    let mut field = init_director(grid, datum, seed, 0.0);
    perturb_tangentially(&mut field, seed, amplitude);
    field.set_lateral(datum);
    for _ in 0..smoothing_passes {
        smooth_once(&mut field);
        field.set_lateral(datum);
    }
    field
}

fn smooth_once(field: &mut DirectorField) {
    let grid = Arc::clone(&field.grid);
    let dom = &grid.domain;
    let n2 = dom.n_nodes();
    let nl = grid.n_layers;
    let old = field.values().to_vec();
    let interior: Vec<usize> = dom.interior_nodes().iter().map(|&i| i as usize).collect();
    for k in 0..nl {
        for &idx in &interior {
            let mut acc = [0.0f64; 3];
            let mut cnt = 0.0;
            let sx = dom.stencil_x(idx);
            let sy = dom.stencil_y(idx);
            for nb in [sx.plus as usize, sx.minus as usize, sy.plus as usize, sy.minus as usize] {
                if nb != idx {
                    let v = old[k * n2 + nb];
                    acc = [acc[0] + v[0], acc[1] + v[1], acc[2] + v[2]];
                    cnt += 1.0;
                }
            }
            if k > 0 {
                let v = old[(k - 1) * n2 + idx];
                acc = [acc[0] + v[0], acc[1] + v[1], acc[2] + v[2]];
                cnt += 1.0;
            }
            if k + 1 < nl {
                let v = old[(k + 1) * n2 + idx];
                acc = [acc[0] + v[0], acc[1] + v[1], acc[2] + v[2]];
                cnt += 1.0;
            }
            let me = old[k * n2 + idx];
            let mut v = [
                0.5 * me[0] + 0.5 * acc[0] / cnt,
                0.5 * me[1] + 0.5 * acc[1] / cnt,
                0.5 * me[2] + 0.5 * acc[2] / cnt,
            ];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 1e-15 {
                v = [v[0] / n, v[1] / n, v[2] / n];
            } else {
                v = me;
            }
            field.values_mut()[k * n2 + idx] = v;
        }
    }
}

//! The vortex core cell problem on a small cylinder: hedgehog lateral data,
//! the core constant extracted from `gamma(sigma, eps) - pi log(sigma/eps)`,
//! and its structural laws (monotone in sigma, subadditive, scale-covariant
//! on linear schedules).

use std::sync::Arc;

use rayon::prelude::*;

use crate::domain::{extrude, make_domain, BoundaryDatum, DomainKind};
use crate::error::{Error, Result};
use crate::field::init_director;
use crate::params::ScalingParams;
use crate::solver::{minimize_full, SolveOptions, SolveReport};

/// One solve of the cell problem.
#[derive(Debug, Clone)]
pub struct CoreSample {
    pub sigma: f64,
    pub params: ScalingParams,
    /// Minimal energy of the cell problem.
    pub gamma_value: f64,
    /// `gamma_value - pi log(sigma/eps)`.
    pub tilde_gamma: f64,
    pub report: SolveReport,
}

/// Grid resolution (nodes per side and layers) for one cell solve.
#[derive(Debug, Clone, Copy)]
pub struct CoreResolution {
    pub nx: usize,
    pub n_layers: usize,
}

impl Default for CoreResolution {
    fn default() -> Self {
        Self { nx: 96, n_layers: 8 }
    }
}

/// Minimize `F_eps` on the cylinder `B_sigma x (0,1)` with the hedgehog
/// trace on the lateral face. Refuses silently under-resolved cores: the
/// anchoring length must span at least 4 cells.
pub fn core_energy(
    sigma: f64,
    p: &ScalingParams,
    resolution: CoreResolution,
    opts: &SolveOptions,
) -> Result<CoreSample> {
    core_energy_from(sigma, p, resolution, opts, None).map(|(s, _)| s)
}

fn core_energy_from(
    sigma: f64,
    p: &ScalingParams,
    resolution: CoreResolution,
    opts: &SolveOptions,
    warm: Option<&crate::field::DirectorField>,
) -> Result<(CoreSample, crate::field::DirectorField)> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let h = 2.0 * sigma / (resolution.nx - 1) as f64;
    let cells_per_eps = p.eps() / h;
    if cells_per_eps < 4.0 {
        return Err(Error::UnderResolved(format!(
            "eps = {} spans only {cells_per_eps:.2} cells at nx = {}; need at least 4",
            p.eps(),
            resolution.nx
        )));
    }
    let dom = make_domain(DomainKind::Disk { radius: sigma }, resolution.nx, resolution.nx)?;
    let grid = Arc::new(extrude(&dom, resolution.n_layers)?);
    let g = hedgehog_datum(&dom);
    let init = match warm {
        Some(src) => prolong_director(src, &grid, &g),
        None => init_director(&grid, &g, opts.seed, 1e-2),
    };
    let (field, report) = minimize_full(&init, &g, p, opts)?;
    let gamma_value = report.final_energy.total();
    let tilde_gamma = gamma_value - std::f64::consts::PI * (sigma / p.eps()).ln();
    Ok((CoreSample { sigma, params: *p, gamma_value, tilde_gamma, report }, field))
}

/// Bilinear transfer of a director field onto another slab grid, matching by
/// relative position inside the bounding box; renormalized, lateral trace
/// reset from the datum.
fn prolong_director(
    src: &crate::field::DirectorField,
    grid: &Arc<crate::domain::Grid3D>,
    g: &BoundaryDatum,
) -> crate::field::DirectorField {
    use crate::domain::NodeKind;
    let sdom = &src.grid.domain;
    let n2s = sdom.n_nodes();
    let sample = |fx: f64, fy: f64, k: usize| -> [f64; 3] {
        // clamp into the source grid and blend the four surrounding nodes,
        // skipping exterior corners
        let x = fx * (sdom.nx - 1) as f64;
        let y = fy * (sdom.ny - 1) as f64;
        let i = (x.floor() as isize).clamp(0, sdom.nx as isize - 2) as usize;
        let j = (y.floor() as isize).clamp(0, sdom.ny as isize - 2) as usize;
        let tx = (x - i as f64).clamp(0.0, 1.0);
        let ty = (y - j as f64).clamp(0.0, 1.0);
        let ks = ((k as f64 / (grid.n_layers - 1).max(1) as f64) * (src.grid.n_layers - 1) as f64)
            .round() as usize;
        let mut acc = [0.0f64; 3];
        let mut wsum = 0.0;
        for (di, dj, w) in [
            (0usize, 0usize, (1.0 - tx) * (1.0 - ty)),
            (1, 0, tx * (1.0 - ty)),
            (0, 1, (1.0 - tx) * ty),
            (1, 1, tx * ty),
        ] {
            let idx = sdom.idx(i + di, j + dj);
            if sdom.mask(idx) == NodeKind::Exterior {
                continue;
            }
            let v = src.values()[ks * n2s + idx];
            acc = [acc[0] + w * v[0], acc[1] + w * v[1], acc[2] + w * v[2]];
            wsum += w;
        }
        if wsum > 1e-12 {
            [acc[0] / wsum, acc[1] / wsum, acc[2] / wsum]
        } else {
            [1.0, 0.0, 0.0]
        }
    };
    let dom = &grid.domain;
    let mut out = crate::field::DirectorField::constant(grid, [1.0, 0.0, 0.0]);
    let n2 = dom.n_nodes();
    for k in 0..grid.n_layers {
        for idx in 0..n2 {
            if dom.mask(idx) == NodeKind::Exterior {
                continue;
            }
            let fx = (idx % dom.nx) as f64 / (dom.nx - 1) as f64;
            let fy = (idx / dom.nx) as f64 / (dom.ny - 1) as f64;
            out.values_mut()[k * n2 + idx] = sample(fx, fy, k);
        }
    }
    out.renormalize();
    out.set_lateral(g);
    out
}

/// The hedgehog trace `H = (x'/|x'|, 0)` on the lateral boundary.
pub fn hedgehog_datum(dom: &Arc<crate::domain::Domain2D>) -> BoundaryDatum {
    crate::domain::power_law_datum(dom, 1)
}

/// Core-constant estimate from a ladder of cell problems.
#[derive(Debug, Clone)]
pub struct CoreConstant {
    pub k: f64,
    pub samples: Vec<CoreSample>,
    /// Average of the last two `tilde_gamma` values.
    pub gamma: f64,
    /// Relative spread of the last two values.
    pub spread: f64,
    /// Set when the ladder has not plateaued (spread above 10%) or is
    /// degenerate (single entry).
    pub warning: Option<String>,
}

/// Evaluate `tilde_gamma` along a `(sigma, eps)` ladder on the linear
/// schedule `eta = k eps` and extrapolate the plateau.
///
/// With `warm_start` the entries run in order, each initialized from the
/// previous solution transferred onto the new grid (the deep rungs of the
/// ladder converge in a few hundred iterations that way); without it the
/// entries are independent and solve in parallel.
pub fn core_constant(
    k: f64,
    ladder: &[(f64, f64)],
    resolutions: &[CoreResolution],
    opts: &SolveOptions,
    warm_start: bool,
) -> Result<CoreConstant> {
    if ladder.is_empty() {
        return Err(Error::InvalidParameter("core ladder must be nonempty".into()));
    }
    if resolutions.len() != ladder.len() {
        return Err(Error::InvalidParameter(format!(
            "{} resolutions for {} ladder entries",
            resolutions.len(),
            ladder.len()
        )));
    }
    if !(k > 0.0) || k > std::f64::consts::FRAC_1_SQRT_2 {
        return Err(Error::InvalidParameter(format!("k must lie in (0, 1/sqrt(2)], got {k}")));
    }
    let samples: Vec<CoreSample> = if warm_start {
        let mut out = Vec::with_capacity(ladder.len());
        let mut carry: Option<crate::field::DirectorField> = None;
        for (&(sigma, eps), &res) in ladder.iter().zip(resolutions) {
            let p = ScalingParams::new(eps, k * eps)?;
            let (sample, field) = core_energy_from(sigma, &p, res, opts, carry.as_ref())?;
            carry = Some(field);
            out.push(sample);
        }
        out
    } else {
        ladder
            .par_iter()
            .zip(resolutions.par_iter())
            .map(|(&(sigma, eps), &res)| {
                let p = ScalingParams::new(eps, k * eps)?;
                core_energy(sigma, &p, res, opts)
            })
            .collect::<Result<_>>()?
    };

    let (gamma, spread, warning) = if samples.len() == 1 {
        (
            samples[0].tilde_gamma,
            f64::INFINITY,
            Some("single-entry ladder: no plateau evidence".to_string()),
        )
    } else {
        let a = samples[samples.len() - 2].tilde_gamma;
        let b = samples[samples.len() - 1].tilde_gamma;
        let gamma = 0.5 * (a + b);
        let spread = (a - b).abs() / gamma.abs().max(1e-12);
        let warning = (spread > 0.10)
            .then(|| format!("ladder has not plateaued: last-two spread {:.1}%", 100.0 * spread));
        (gamma, spread, warning)
    };
    Ok(CoreConstant { k, samples, gamma, spread, warning })
}

/// CSV rows `k,sigma,eps,gamma_value,tilde_gamma,iterations,residual`.
pub fn core_csv(k: f64, samples: &[CoreSample]) -> String {
    let mut s = String::from("k,sigma,eps,gamma_value,tilde_gamma,iterations,residual\n");
    for c in samples {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            k,
            c.sigma,
            c.params.eps(),
            c.gamma_value,
            c.tilde_gamma,
            c.report.iterations,
            c.report.residual
        ));
    }
    s
}

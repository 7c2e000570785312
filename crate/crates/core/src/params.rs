//! Scaling regime (eps, eta) and conversions from physical thin-film parameters.

use crate::error::{Error, Result};

/// Relative tolerance used for the regime inequality `sqrt(2) eta <= eps`, so
/// that exact-equality schedules (eta = eps/sqrt(2)) classify robustly.
const REGIME_TOL: f64 = 1e-12;

/// Dimensionless anchoring length `eps` and relative thickness `eta`.
///
/// Immutable value type; freely shareable across threads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingParams {
    eps: f64,
    eta: f64,
    bbh_regime: bool,
}

impl ScalingParams {
    pub fn new(eps: f64, eta: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
        }
        let bbh_regime = std::f64::consts::SQRT_2 * eta <= eps * (1.0 + REGIME_TOL);
        Ok(Self { eps, eta, bbh_regime })
    }

    /// Convert from physical thin-film parameters: `eps = sqrt(h/lambda)`, `eta = h`.
    pub fn from_physical(h: f64, lambda: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("h must be positive, got {h}")));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        let eps = (h / lambda).sqrt();
        // The regime condition sqrt(2 h lambda) <= 1 is checked in the physical
        // variables, where it is exact.
        let bbh_regime = 2.0 * h * lambda <= 1.0 + REGIME_TOL;
        Ok(Self { eps, eta: h, bbh_regime })
    }

    /// Inverse of `from_physical`: recovers `(h, lambda)`.
    pub fn to_physical(&self) -> (f64, f64) {
        (self.eta, self.eta / (self.eps * self.eps))
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// True iff `sqrt(2) eta <= eps`.
    pub fn bbh_regime(&self) -> bool {
        self.bbh_regime
    }
}

/// Linear schedule `eta = k * eps` for each entry of `eps_list`.
///
/// Requires `0 < k <= 1/sqrt(2)`; every returned entry is inside the regime
/// by construction.
pub fn linear_schedule(k: f64, eps_list: &[f64]) -> Result<Vec<ScalingParams>> {
    if !(k > 0.0) || k > std::f64::consts::FRAC_1_SQRT_2 {
        return Err(Error::InvalidParameter(format!(
            "k must lie in (0, 1/sqrt(2)], got {k}"
        )));
    }
    eps_list
        .iter()
        .map(|&eps| {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "eps entries must be positive, got {eps}"
                )));
            }
            // k <= 1/sqrt(2) makes the regime inequality exact; set the flag
            // directly rather than re-deriving it from rounded products.
            Ok(ScalingParams { eps, eta: k * eps, bbh_regime: true })
        })
        .collect()
}

//! Rate-scale utilities shared by the information estimators and the
//! replication harness.
//!
//! `r` is the nuisance convergence rate; the accuracy scale
//! `m_n(n, r) = n^(-1/2) + n^(-2r+1/2)` governs the error of every
//! higher-order quantity computed downstream, and the step-size rule
//! `c · n^(-min(r, 1/2))` drives the discretized information estimates.

use crate::error::{Error, Result};

/// Nuisance convergence-rate specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSpec {
    r: f64,
}

impl RateSpec {
    /// Requires `r > 1/4`.
    pub fn new(r: f64) -> Result<Self> {
        if !r.is_finite() || r <= 0.25 {
            return Err(Error::Domain(format!("nuisance rate must satisfy r > 1/4, got {r}")));
        }
        Ok(RateSpec { r })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// The step-size exponent: `min(r, 1/2)`.
    pub fn effective_exponent(&self) -> f64 {
        self.r.min(0.5)
    }
}

fn check_inputs(n: usize, r: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain("sample size must be >= 1".into()));
    }
    if !r.is_finite() || r <= 0.25 {
        return Err(Error::Domain(format!("rate must satisfy r > 1/4, got {r}")));
    }
    Ok(n as f64)
}

/// Accuracy scale `n^(-1/2) + n^(-2r+1/2)`.
pub fn m_n(n: usize, r: f64) -> Result<f64> {
    let nf = check_inputs(n, r)?;
    Ok(nf.powf(-0.5) + nf.powf(-2.0 * r + 0.5))
}

/// Remainder scale of the quadratic expansion of the log profile likelihood
/// at displacement `w`.
pub fn g_r(w: f64, n: usize, r: f64) -> Result<f64> {
    if !w.is_finite() || w < 0.0 {
        return Err(Error::Domain(format!("displacement must be >= 0, got {w}")));
    }
    let nf = check_inputs(n, r)?;
    let cubic = nf * w.powi(3);
    if r < 0.5 {
        Ok(cubic + nf.powf(1.0 - r) * w * w + nf.powf(1.0 - 2.0 * r) * w + nf.powf(-2.0 * r + 0.5))
    } else {
        Ok(cubic + nf.powf(-0.5))
    }
}

/// Error scale of the discretized information estimate at step `s`:
/// `g_r(s) / (n s^2)`.
pub fn h_r(s: f64, n: usize, r: f64) -> Result<f64> {
    if !s.is_finite() || s <= 0.0 {
        return Err(Error::Domain(format!("step must be > 0, got {s}")));
    }
    let g = g_r(s, n, r)?;
    Ok(g / (n as f64 * s * s))
}

/// Numerical-differentiation step size `c · n^(-min(r, 1/2))`.
pub fn step_size(n: usize, rate: &RateSpec, c: f64) -> f64 {
    assert!(c > 0.0, "step-size constant must be positive");
    assert!(n >= 1, "sample size must be >= 1");
    c * (n as f64).powf(-rate.effective_exponent())
}

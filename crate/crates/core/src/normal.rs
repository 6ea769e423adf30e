//! Standard-normal helpers with stable log-CDF and inverse-Mills evaluation
//! in the far tails.
//!
//! Beyond |q| > 8 the direct erfc route is replaced by the asymptotic
//! expansion Φ(q)/φ(q) ≈ (-1/q)·(1 - 1/q² + 3/q⁴ - 15/q⁶ + ...), which keeps
//! log Φ finite all the way down and avoids log(0).

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use statrs::function::erf::erfc;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const TAIL: f64 = 8.0;

pub fn pdf(q: f64) -> f64 {
    (-0.5 * q * q - LN_SQRT_2PI).exp()
}

pub fn cdf(q: f64) -> f64 {
    0.5 * erfc(-q * FRAC_1_SQRT_2)
}

/// Truncated series for Φ(q)/φ(q) · (-q), valid for q ≤ -8.
fn tail_series(q: f64) -> f64 {
    let inv2 = 1.0 / (q * q);
    1.0 + inv2 * (-1.0 + inv2 * (3.0 + inv2 * (-15.0 + inv2 * (105.0 + inv2 * (-945.0 + inv2 * 10_395.0)))))
}

pub fn log_cdf(q: f64) -> f64 {
    if q < -TAIL {
        // log Φ = log φ + log(Φ/φ)
        -0.5 * q * q - LN_SQRT_2PI - (-q).ln() + tail_series(q).ln()
    } else if q > TAIL {
        (-cdf(-q)).ln_1p()
    } else {
        cdf(q).ln()
    }
}

/// log(1 - Φ(q)).
pub fn log_sf(q: f64) -> f64 {
    log_cdf(-q)
}

/// Inverse Mills ratio φ(q)/Φ(q).
pub fn inv_mills(q: f64) -> f64 {
    if q < -TAIL {
        -q / tail_series(q)
    } else {
        pdf(q) / cdf(q)
    }
}

/// φ(q)/(1 - Φ(q)), the hazard of the standard normal.
pub fn mills_upper(q: f64) -> f64 {
    inv_mills(-q)
}

/// Standard-normal quantile.
pub fn quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// χ² quantile with `df` degrees of freedom.
pub fn chi2_quantile(df: usize, p: f64) -> f64 {
    ChiSquared::new(df as f64).unwrap().inverse_cdf(p)
}

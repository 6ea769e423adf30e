//! Priors on the parametric component.

use crate::error::{Error, Result};
use crate::types::ParameterPoint;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Prior on θ. The flat prior is improper with log density 0; only
/// differences enter the Metropolis ratio.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    Flat,
    Gaussian { mean: Vec<f64>, sd: Vec<f64> },
}

impl Prior {
    pub fn gaussian(mean: Vec<f64>, sd: Vec<f64>) -> Result<Self> {
        if mean.len() != sd.len() || mean.is_empty() {
            return Err(Error::Domain("gaussian prior needs equal-length nonempty mean/sd".into()));
        }
        if mean.iter().any(|v| !v.is_finite()) || sd.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Domain("gaussian prior needs finite mean and positive sd".into()));
        }
        Ok(Prior::Gaussian { mean, sd })
    }

    pub fn log_density(&self, theta: &ParameterPoint) -> f64 {
        match self {
            Prior::Flat => 0.0,
            Prior::Gaussian { mean, sd } => {
                assert_eq!(mean.len(), theta.dim(), "prior dimension mismatch");
                theta
                    .coords()
                    .iter()
                    .zip(mean.iter().zip(sd))
                    .map(|(&t, (&m, &s))| {
                        let z = (t - m) / s;
                        -0.5 * LN_2PI - s.ln() - 0.5 * z * z
                    })
                    .sum()
            }
        }
    }
}

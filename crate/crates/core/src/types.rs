//! Shared domain types: observations, datasets, parameter points and
//! profile-evaluation results.

use crate::error::{Error, Result};
use crate::spline::SplineCurve;
use crate::stepfn::MonotoneStepFunction;

/// A point in the finite-dimensional parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPoint {
    theta: Vec<f64>,
}

impl ParameterPoint {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::Domain("parameter point must have dimension >= 1".into()));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("parameter point has non-finite entry".into()));
        }
        Ok(ParameterPoint { theta })
    }

    pub fn scalar(v: f64) -> Result<Self> {
        ParameterPoint::new(vec![v])
    }

    /// Internal constructor for points produced by arithmetic on already
    /// validated points (random-walk proposals, optimizer trial points).
    pub(crate) fn from_parts(theta: Vec<f64>) -> Self {
        ParameterPoint { theta }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.theta
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.theta[i]
    }

    /// Inner product with a covariate vector of the same dimension.
    pub fn dot(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(self.theta.len(), z.len());
        self.theta.iter().zip(z).map(|(a, b)| a * b).sum()
    }
}

/// One right-censored or current-status survival record.
///
/// `y` is the event/censoring time for right-censored data and the
/// examination time for current-status data.
#[derive(Debug, Clone, PartialEq)]
pub struct CoxObservation {
    pub y: f64,
    pub delta: bool,
    pub z: Vec<f64>,
}

impl CoxObservation {
    pub fn new(y: f64, delta: bool, z: Vec<f64>) -> Result<Self> {
        if !y.is_finite() || y < 0.0 {
            return Err(Error::Domain(format!("observation time must be finite and >= 0, got {y}")));
        }
        if z.is_empty() || z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("covariate vector must be nonempty and finite".into()));
        }
        Ok(CoxObservation { y, delta, z })
    }
}

/// One current-status record from the partly linear regression design.
#[derive(Debug, Clone, PartialEq)]
pub struct PartlyLinearObservation {
    pub c: f64,
    pub delta: bool,
    pub w: f64,
    pub z: f64,
}

impl PartlyLinearObservation {
    pub fn new(c: f64, delta: bool, w: f64, z: f64) -> Result<Self> {
        if !c.is_finite() || !w.is_finite() || !z.is_finite() {
            return Err(Error::Domain("partly linear observation has non-finite field".into()));
        }
        Ok(PartlyLinearObservation { c, delta, w, z })
    }
}

/// Which concrete model a dataset or report refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    CoxRight,
    CoxCurrent,
    PartlyLinear,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::CoxRight => "cox_right",
            ModelKind::CoxCurrent => "cox_current",
            ModelKind::PartlyLinear => "partly_linear",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<ModelKind> {
        match s {
            "cox_right" => Ok(ModelKind::CoxRight),
            "cox_current" => Ok(ModelKind::CoxCurrent),
            "partly_linear" => Ok(ModelKind::PartlyLinear),
            other => Err(Error::Config(format!(
                "unknown model '{other}' (expected cox_right, cox_current or partly_linear)"
            ))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Observations {
    Cox(Vec<CoxObservation>),
    PartlyLinear(Vec<PartlyLinearObservation>),
}

/// An immutable i.i.d. sample in one of the two observation layouts.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    obs: Observations,
}

impl Dataset {
    pub fn from_cox(observations: Vec<CoxObservation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Domain("dataset must contain at least one observation".into()));
        }
        let d = observations[0].z.len();
        if observations.iter().any(|o| o.z.len() != d) {
            return Err(Error::Domain("covariate dimension must be homogeneous".into()));
        }
        Ok(Dataset {
            obs: Observations::Cox(observations),
        })
    }

    pub fn from_partly_linear(observations: Vec<PartlyLinearObservation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Domain("dataset must contain at least one observation".into()));
        }
        Ok(Dataset {
            obs: Observations::PartlyLinear(observations),
        })
    }

    pub fn n(&self) -> usize {
        match &self.obs {
            Observations::Cox(v) => v.len(),
            Observations::PartlyLinear(v) => v.len(),
        }
    }

    /// Covariate dimension of the parametric component.
    pub fn covariate_dim(&self) -> usize {
        match &self.obs {
            Observations::Cox(v) => v[0].z.len(),
            Observations::PartlyLinear(_) => 1,
        }
    }

    pub fn cox(&self) -> Result<&[CoxObservation]> {
        match &self.obs {
            Observations::Cox(v) => Ok(v),
            Observations::PartlyLinear(_) => Err(Error::ModelMismatch { expected: "cox" }),
        }
    }

    pub fn partly_linear(&self) -> Result<&[PartlyLinearObservation]> {
        match &self.obs {
            Observations::PartlyLinear(v) => Ok(v),
            Observations::Cox(_) => Err(Error::ModelMismatch {
                expected: "partly_linear",
            }),
        }
    }

    pub fn is_cox(&self) -> bool {
        matches!(self.obs, Observations::Cox(_))
    }
}

/// Profiled nuisance fit attaining the profile likelihood at a given θ.
#[derive(Debug, Clone, PartialEq)]
pub enum NuisanceFit {
    Step(MonotoneStepFunction),
    Spline(SplineCurve),
}

/// Log profile likelihood value together with the nuisance fit attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileEvaluation {
    /// Finite value, or negative infinity when the evaluation degenerated.
    pub log_pl: f64,
    pub nuisance: NuisanceFit,
    /// Set when exp-overflow clamping fired; the evaluation is then −∞.
    pub overflow: bool,
}

impl ProfileEvaluation {
    pub fn overflowed() -> Self {
        ProfileEvaluation {
            log_pl: f64::NEG_INFINITY,
            nuisance: NuisanceFit::Step(MonotoneStepFunction::zero()),
            overflow: true,
        }
    }
}

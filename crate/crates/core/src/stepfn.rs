//! Nondecreasing step functions: the cumulative-hazard estimates produced by
//! Breslow profiling and the iterative convex minorant.

use crate::error::{Error, Result};

/// A nonnegative, nondecreasing, right-continuous step function with value 0
/// before the first knot.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneStepFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl MonotoneStepFunction {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::Domain("knots and values must have equal length".into()));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::Domain("knots must be finite".into()));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("knots must be strictly increasing".into()));
        }
        if values.first().is_some_and(|v| *v < 0.0)
            || values.iter().any(|v| !v.is_finite())
            || values.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::Domain("values must be finite, nonnegative and nondecreasing".into()));
        }
        Ok(MonotoneStepFunction { knots, values })
    }

    /// The identically-zero function (no knots).
    pub fn zero() -> Self {
        MonotoneStepFunction {
            knots: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Right-continuous evaluation: value at the largest knot ≤ `t`, 0 before
    /// the first knot.
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.knots.partition_point(|k| *k <= t);
        if idx == 0 {
            0.0
        } else {
            self.values[idx - 1]
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.knots.is_empty()
    }
}

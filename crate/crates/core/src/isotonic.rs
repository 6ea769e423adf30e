//! Weighted isotonic regression by pool-adjacent-violators, the projection
//! step inside the iterative convex minorant.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Block {
    weight: f64,
    weighted_sum: f64,
    len: usize,
}

impl Block {
    fn mean(&self) -> f64 {
        self.weighted_sum / self.weight
    }
}

/// Weighted least-squares projection onto the nondecreasing cone: minimizes
/// Σ wᵢ(outᵢ − valuesᵢ)² subject to out₁ ≤ … ≤ outₙ. Linear time.
pub fn pava(values: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Domain("pava input must be nonempty".into()));
    }
    if values.len() != weights.len() {
        return Err(Error::Domain("pava values and weights must have equal length".into()));
    }
    if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(Error::Domain("pava weights must be positive and finite".into()));
    }

    let mut blocks: Vec<Block> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        let mut block = Block {
            weight: w,
            weighted_sum: w * v,
            len: 1,
        };
        while let Some(last) = blocks.last() {
            if last.mean() > block.mean() {
                block.weight += last.weight;
                block.weighted_sum += last.weighted_sum;
                block.len += last.len;
                blocks.pop();
            } else {
                break;
            }
        }
        blocks.push(block);
    }

    let mut out = Vec::with_capacity(values.len());
    for block in blocks {
        let m = block.mean();
        out.extend(std::iter::repeat_n(m, block.len));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn monotone_input_unchanged() {
        assert_eq!(pava(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn full_pool_example() {
        assert_eq!(pava(&[3.0, 1.0, 2.0], &[1.0, 1.0, 1.0]).unwrap(), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn weighted_pool_example() {
        assert_eq!(pava(&[5.0, 1.0], &[1.0, 3.0]).unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(pava(&[], &[]).is_err());
        assert!(pava(&[1.0], &[1.0, 2.0]).is_err());
        assert!(pava(&[1.0], &[0.0]).is_err());
        assert!(pava(&[1.0], &[-1.0]).is_err());
    }

    proptest! {
        #[test]
        fn output_is_monotone_and_mean_preserving(
            values in prop::collection::vec(-50.0f64..50.0, 1..40),
            raw_weights in prop::collection::vec(0.05f64..10.0, 40),
        ) {
            let weights = &raw_weights[..values.len()];
            let out = pava(&values, weights).unwrap();
            prop_assert!(out.windows(2).all(|w| w[0] <= w[1]));
            let total_in: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
            let total_out: f64 = out.iter().zip(weights).map(|(v, w)| v * w).sum();
            prop_assert!((total_in - total_out).abs() <= 1e-9 * (1.0 + total_in.abs()));
            // idempotent
            let again = pava(&out, weights).unwrap();
            for (a, b) in out.iter().zip(&again) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }
}

//! Independent brute-force oracles for the acceptance criteria. These solve
//! the same optimization problems as the library by exhaustive or
//! grid-refinement search and never share code with the implementation
//! paths they check.

use profile_sampler::types::{CoxObservation, Dataset, ParameterPoint};

/// Exact weighted isotonic regression by enumerating every contiguous block
/// partition (2^(n-1) of them), keeping the feasible candidates and taking
/// the least-squares-best. The optimum is piecewise constant with blockwise
/// weighted means, so it is always among the candidates.
pub fn pava_partition_oracle(values: &[f64], weights: &[f64]) -> Vec<f64> {
    let n = values.len();
    assert!((1..=20).contains(&n));
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0..(1u32 << (n - 1)) {
        let mut candidate = Vec::with_capacity(n);
        let mut start = 0;
        for i in 0..n {
            let is_boundary = i == n - 1 || (mask >> i) & 1 == 1;
            if is_boundary {
                let (mut wsum, mut wvsum) = (0.0, 0.0);
                for j in start..=i {
                    wsum += weights[j];
                    wvsum += weights[j] * values[j];
                }
                let mean = wvsum / wsum;
                candidate.extend(std::iter::repeat_n(mean, i - start + 1));
                start = i + 1;
            }
        }
        if candidate.windows(2).any(|w| w[0] > w[1]) {
            continue;
        }
        let objective: f64 = candidate
            .iter()
            .zip(values)
            .zip(weights)
            .map(|((o, v), w)| w * (o - v) * (o - v))
            .sum();
        if best.as_ref().is_none_or(|(b, _)| objective < *b) {
            best = Some((objective, candidate));
        }
    }
    best.expect("at least the full pool is feasible").1
}

/// Point-mass likelihood of the right-censored Cox model, written directly
/// from the density: jumps `p` live at the event times (ascending), and
/// Λ(y) is the running sum of jumps at or before y.
fn cox_point_mass_log_lik(data: &Dataset, theta: f64, event_times: &[f64], jumps: &[f64]) -> f64 {
    let obs = data.cox().unwrap();
    let mut total = 0.0;
    for o in obs {
        let score = theta * o.z[0];
        let cum: f64 = event_times
            .iter()
            .zip(jumps)
            .filter(|(t, _)| **t <= o.y)
            .map(|(_, p)| *p)
            .sum();
        if o.delta {
            let jump = event_times
                .iter()
                .zip(jumps)
                .find(|(t, _)| **t == o.y)
                .map(|(_, p)| *p)
                .expect("event time must carry a jump");
            total += score + jump.ln();
        }
        total -= score.exp() * cum;
    }
    total
}

/// Maximize the point-mass likelihood over the jump heights by cyclic
/// coordinate descent with nested grid refinement.
pub fn breslow_grid_oracle(data: &Dataset, theta: f64) -> f64 {
    let obs = data.cox().unwrap();
    let mut event_times: Vec<f64> = obs.iter().filter(|o| o.delta).map(|o| o.y).collect();
    event_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    event_times.dedup();
    if event_times.is_empty() {
        return 0.0;
    }
    let k = event_times.len();
    let mut jumps = vec![0.5f64; k];
    let mut value = cox_point_mass_log_lik(data, theta, &event_times, &jumps);

    for _cycle in 0..60 {
        let before = value;
        for j in 0..k {
            let (mut lo, mut hi) = (1e-12f64, 60.0f64);
            for _round in 0..40 {
                let mut best = (jumps[j], value);
                for g in 0..33 {
                    let p = lo + (hi - lo) * g as f64 / 32.0;
                    let mut trial = jumps.clone();
                    trial[j] = p;
                    let v = cox_point_mass_log_lik(data, theta, &event_times, &trial);
                    if v > best.1 {
                        best = (p, v);
                    }
                }
                jumps[j] = best.0;
                value = best.1;
                let width = (hi - lo) / 32.0 * 1.5;
                lo = (best.0 - width).max(1e-12);
                hi = best.0 + width;
                if hi - lo < 1e-13 {
                    break;
                }
            }
        }
        if (value - before).abs() < 1e-12 * (1.0 + value.abs()) {
            break;
        }
    }
    value
}

/// Current-status log likelihood evaluated directly at hazard values `x`
/// over the sorted examination times.
pub fn current_status_log_lik(sorted: &[(f64, bool, f64)], theta: f64, x: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, (_, delta, z)) in sorted.iter().enumerate() {
        let c = (theta * z).exp();
        if *delta {
            let p = 1.0 - (-c * x[i]).exp();
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += p.ln();
        } else {
            total -= c * x[i];
        }
    }
    total
}

fn enumerate_monotone(
    grids: &[Vec<f64>],
    idx: usize,
    floor: f64,
    current: &mut Vec<f64>,
    best: &mut (f64, Vec<f64>),
    eval: &dyn Fn(&[f64]) -> f64,
) {
    if idx == grids.len() {
        let v = eval(current);
        if v > best.0 {
            *best = (v, current.clone());
        }
        return;
    }
    for &g in &grids[idx] {
        if g < floor {
            continue;
        }
        current.push(g);
        enumerate_monotone(grids, idx + 1, g, current, best, eval);
        current.pop();
    }
}

/// Exhaustive maximization of the current-status likelihood over monotone
/// hazard vectors in [0, lambda_max]^n by per-coordinate grid refinement.
pub fn icm_monotone_grid_oracle(data: &Dataset, theta: f64, lambda_max: f64) -> f64 {
    let obs = data.cox().unwrap();
    let mut sorted: Vec<(f64, bool, f64)> = obs.iter().map(|o| (o.y, o.delta, o.z[0])).collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let n = sorted.len();
    assert!(n <= 5, "oracle enumeration is exponential");

    let points_per_coord = 16usize;
    let mut lows = vec![0.0f64; n];
    let mut highs = vec![lambda_max; n];
    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);

    for _round in 0..14 {
        let grids: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..points_per_coord)
                    .map(|g| lows[i] + (highs[i] - lows[i]) * g as f64 / (points_per_coord - 1) as f64)
                    .collect()
            })
            .collect();
        let mut round_best = (f64::NEG_INFINITY, vec![0.0; n]);
        let eval = |x: &[f64]| current_status_log_lik(&sorted, theta, x);
        enumerate_monotone(&grids, 0, 0.0, &mut Vec::with_capacity(n), &mut round_best, &eval);
        if round_best.0 > best.0 {
            best = round_best.clone();
        }
        for i in 0..n {
            let width = (highs[i] - lows[i]) / (points_per_coord - 1) as f64 * 1.5;
            lows[i] = (round_best.1[i] - width).max(0.0);
            highs[i] = (round_best.1[i] + width).min(lambda_max);
        }
    }
    best.0
}

/// Convenience constructor for small Cox-layout datasets.
pub fn cox_dataset(rows: &[(f64, bool, f64)]) -> Dataset {
    Dataset::from_cox(
        rows.iter()
            .map(|&(y, d, z)| CoxObservation::new(y, d, vec![z]).unwrap())
            .collect(),
    )
    .unwrap()
}

pub fn scalar(v: f64) -> ParameterPoint {
    ParameterPoint::scalar(v).unwrap()
}

//! Random-walk Metropolis over the log profile posterior
//! log pl(θ) + log ρ(θ), with pilot-phase acceptance tuning and chain
//! diagnostics.
//!
//! The target is supplied decomposed into profile likelihood and prior so the
//! chain can retain the per-sample profile component. Each iteration costs
//! exactly one profile evaluation: the current point's value is cached.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::prior::Prior;
use crate::seed::{derive_seed, rng_from};
use crate::types::ParameterPoint;

/// Retained posterior draws with acceptance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    /// States after burn-in, one per retained iteration.
    pub samples: Vec<ParameterPoint>,
    /// Log profile likelihood of each retained sample (prior excluded).
    pub log_pl_values: Vec<f64>,
    /// Accepted moves over all iterations, including burn-in.
    pub acceptance_rate: f64,
    pub proposal_sd: Vec<f64>,
    pub seed: u64,
    pub burn_in: usize,
    pub total_iter: usize,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.dim())
    }

    /// Sample with the largest retained log profile likelihood.
    pub fn argmax(&self) -> Option<(&ParameterPoint, f64)> {
        self.log_pl_values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, &v)| (&self.samples[i], v))
    }

    /// Per-coordinate column of retained samples.
    pub fn coordinate(&self, coord: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.coord(coord)).collect()
    }

    /// CSV dump of the retained samples: `iter,theta1[,theta2,...],log_pl`,
    /// where `iter` is the global iteration index (burn-in included in the
    /// count).
    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut out = String::from("iter");
        for j in 1..=d {
            out.push_str(&format!(",theta{j}"));
        }
        out.push_str(",log_pl\n");
        for (i, (sample, log_pl)) in self.samples.iter().zip(&self.log_pl_values).enumerate() {
            out.push_str(&(self.burn_in + i).to_string());
            for v in sample.coords() {
                out.push(',');
                out.push_str(&crate::csvio::fmt_f64(*v));
            }
            out.push(',');
            out.push_str(&crate::csvio::fmt_f64(*log_pl));
            out.push('\n');
        }
        out
    }
}

/// Run a random-walk Metropolis chain. Proposals are uncorrelated Gaussian
/// steps θ' = θ + sd ⊙ N(0, I); −∞ proposals are always rejected; rejected
/// iterations repeat the previous point exactly.
pub fn metropolis_run<F>(
    log_pl: F,
    prior: &Prior,
    theta_init: &ParameterPoint,
    proposal_sd: &[f64],
    total_iter: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Chain>
where
    F: Fn(&ParameterPoint) -> Result<f64>,
{
    if burn_in >= total_iter {
        return Err(Error::Domain(format!("burn-in {burn_in} must be < total iterations {total_iter}")));
    }
    if proposal_sd.len() != theta_init.dim() {
        return Err(Error::Domain("proposal sd dimension mismatch".into()));
    }
    if proposal_sd.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::Domain("proposal sd must be nonnegative and finite".into()));
    }

    let d = theta_init.dim();
    let mut rng = rng_from(seed);

    let mut current = theta_init.clone();
    let mut current_pl = log_pl(&current)?;
    let mut current_prior = prior.log_density(&current);
    if !(current_pl + current_prior).is_finite() {
        return Err(Error::BadInit);
    }

    let retained = total_iter - burn_in;
    let mut samples = Vec::with_capacity(retained);
    let mut log_pl_values = Vec::with_capacity(retained);
    let mut accepted = 0usize;

    for iter in 0..total_iter {
        let mut proposal = Vec::with_capacity(d);
        for (j, sd) in proposal_sd.iter().enumerate() {
            let noise: f64 = StandardNormal.sample(&mut rng);
            proposal.push(current.coord(j) + sd * noise);
        }
        let u: f64 = rng.random();

        let candidate = ParameterPoint::from_parts(proposal);
        let cand_pl = log_pl(&candidate)?;
        let cand_prior = prior.log_density(&candidate);
        let delta = (cand_pl + cand_prior) - (current_pl + current_prior);

        if u.ln() < delta {
            current = candidate;
            current_pl = cand_pl;
            current_prior = cand_prior;
            accepted += 1;
        }

        if iter >= burn_in {
            samples.push(current.clone());
            log_pl_values.push(current_pl);
        }
    }

    Ok(Chain {
        samples,
        log_pl_values,
        acceptance_rate: accepted as f64 / total_iter as f64,
        proposal_sd: proposal_sd.to_vec(),
        seed,
        burn_in,
        total_iter,
    })
}

/// Outcome of the pilot tuning phase.
#[derive(Debug, Clone, PartialEq)]
pub struct TunedProposal {
    pub sd: Vec<f64>,
    /// False when the round cap was reached without landing in the window.
    pub converged: bool,
    pub rounds: usize,
    /// Acceptance rate of the final pilot chain.
    pub acceptance: f64,
}

const PILOT_ITER: usize = 500;
const PILOT_ROUNDS: usize = 30;
const ACCEPT_LO: f64 = 0.2;
const ACCEPT_HI: f64 = 0.4;
const PILOT_LANE: u64 = 0x70;

/// Double/halve the proposal scale over 500-iteration pilot chains until the
/// acceptance rate lands in [0.2, 0.4], capped at 30 rounds.
pub fn tune_proposal<F>(log_pl: F, prior: &Prior, theta_init: &ParameterPoint, seed: u64) -> Result<TunedProposal>
where
    F: Fn(&ParameterPoint) -> Result<f64>,
{
    let mut sd = vec![1.0; theta_init.dim()];
    let mut acceptance = f64::NAN;
    for round in 0..PILOT_ROUNDS {
        let pilot = metropolis_run(
            &log_pl,
            prior,
            theta_init,
            &sd,
            PILOT_ITER,
            0,
            derive_seed(seed, PILOT_LANE, round as u64),
        )?;
        acceptance = pilot.acceptance_rate;
        if (ACCEPT_LO..=ACCEPT_HI).contains(&acceptance) {
            return Ok(TunedProposal {
                sd,
                converged: true,
                rounds: round + 1,
                acceptance,
            });
        }
        let factor = if acceptance > ACCEPT_HI { 2.0 } else { 0.5 };
        for s in &mut sd {
            *s *= factor;
        }
    }
    Ok(TunedProposal {
        sd,
        converged: false,
        rounds: PILOT_ROUNDS,
        acceptance,
    })
}

/// Chain summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDiagnostics {
    pub acceptance_rate: f64,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Integrated autocorrelation time per coordinate, by initial-positive-
    /// sequence truncation.
    pub autocorrelation_time: Vec<f64>,
    /// |mean(first half) − mean(second half)| / combined standard error.
    pub split_half_discrepancy: Vec<f64>,
    /// Set when any coordinate has zero variance.
    pub degenerate: bool,
}

fn autocorr_time(x: &[f64], mean: f64, var: f64) -> f64 {
    let n = x.len();
    if var <= 0.0 {
        return f64::NAN;
    }
    let rho = |lag: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..n - lag {
            s += (x[i] - mean) * (x[i + lag] - mean);
        }
        s / (n as f64 * var)
    };
    // Geyer initial positive sequence: sum adjacent-lag pairs while positive
    let mut tau = 1.0;
    let mut lag = 1;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    tau
}

pub fn chain_diagnostics(chain: &Chain) -> Result<ChainDiagnostics> {
    let m = chain.len();
    if m < 10 {
        return Err(Error::ChainTooShort { min: 10, got: m });
    }
    let d = chain.dim();
    let mut mean = Vec::with_capacity(d);
    let mut sd = Vec::with_capacity(d);
    let mut act = Vec::with_capacity(d);
    let mut split = Vec::with_capacity(d);
    let mut degenerate = false;

    for coord in 0..d {
        let x = chain.coordinate(coord);
        let mu = x.iter().sum::<f64>() / m as f64;
        let var = x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (m - 1) as f64;
        mean.push(mu);
        sd.push(var.sqrt());
        if var == 0.0 {
            degenerate = true;
        }
        act.push(autocorr_time(&x, mu, var * (m - 1) as f64 / m as f64));

        let half = m / 2;
        let (a, b) = x.split_at(half);
        let ma = a.iter().sum::<f64>() / a.len() as f64;
        let mb = b.iter().sum::<f64>() / b.len() as f64;
        let va = a.iter().map(|v| (v - ma).powi(2)).sum::<f64>() / (a.len() - 1) as f64;
        let vb = b.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / (b.len() - 1) as f64;
        let se = (va / a.len() as f64 + vb / b.len() as f64).sqrt();
        split.push(if se > 0.0 {
            (ma - mb).abs() / se
        } else if ma == mb {
            0.0
        } else {
            f64::INFINITY
        });
    }

    Ok(ChainDiagnostics {
        acceptance_rate: chain.acceptance_rate,
        mean,
        sd,
        autocorrelation_time: act,
        split_half_discrepancy: split,
        degenerate,
    })
}

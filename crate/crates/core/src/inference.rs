//! Higher-order frequentist estimators built from the profile likelihood and
//! the chain: MLE refinement, discretized observed profile information,
//! posterior moments, credible quantiles, Wald intervals and profile
//! likelihood ratio calibration.

use nalgebra::DMatrix;

use crate::cox_current::{icm_profile, IcmOptions};
use crate::cox_right::breslow_profile;
use crate::csvio::fmt_f64;
use crate::error::{Error, Result};
use crate::normal;
use crate::partly_linear::sieve_profile;
use crate::prior::Prior;
use crate::rates::{step_size, RateSpec};
use crate::sampler::{chain_diagnostics, metropolis_run, tune_proposal, Chain, ChainDiagnostics};
use crate::seed::derive_seed;
use crate::spline::SieveOptions;
use crate::types::{Dataset, ModelKind, ParameterPoint, ProfileEvaluation};

/// Search region handed to the profile maximizer.
#[derive(Debug, Clone)]
pub enum Bracket {
    /// One-dimensional interval.
    Interval { lo: f64, hi: f64 },
    /// d+1 simplex vertices for Nelder–Mead in d dimensions.
    Simplex { vertices: Vec<ParameterPoint> },
}

fn eval_or_neg_inf<F>(f: &F, theta: &ParameterPoint) -> f64
where
    F: Fn(&ParameterPoint) -> Result<f64>,
{
    match f(theta) {
        Ok(v) if v.is_finite() => v,
        // failed or degenerate evaluations count as -inf during search
        _ => f64::NEG_INFINITY,
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

fn golden_section_max<F>(f: &F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(&ParameterPoint) -> Result<f64>,
{
    let g = |x: f64| eval_or_neg_inf(f, &ParameterPoint::from_parts(vec![x]));
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    let consider = |x: f64, fx: f64, best: &mut (f64, f64)| {
        if fx > best.1 {
            *best = (x, fx);
        }
    };

    let mid = 0.5 * (lo + hi);
    for x in [lo, mid, hi] {
        let fx = g(x);
        consider(x, fx, &mut best);
    }
    if !best.1.is_finite() {
        return Err(Error::Bracketing);
    }

    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let (mut f1, mut f2) = (g(x1), g(x2));
    consider(x1, f1, &mut best);
    consider(x2, f2, &mut best);
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = g(x1);
            consider(x1, f1, &mut best);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = g(x2);
            consider(x2, f2, &mut best);
        }
    }

    // parabolic refinement through the best point and its flanks; skipped
    // once the curvature signal drowns in rounding noise
    let mut h = (b - a).max(tol);
    for _ in 0..8 {
        let (x0, f0) = best;
        let (xl, xr) = (x0 - h, x0 + h);
        let (fl, fr) = (g(xl), g(xr));
        consider(xl, fl, &mut best);
        consider(xr, fr, &mut best);
        if fl.is_finite() && fr.is_finite() {
            let denom = fl - 2.0 * f0 + fr;
            let noise = f64::EPSILON * (f0.abs() + fl.abs() + fr.abs() + 1e-300);
            if denom < -noise {
                let vertex = x0 + 0.5 * h * (fl - fr) / denom;
                // only trust vertices inside the probe bracket
                if (vertex - x0).abs() <= h && (lo..=hi).contains(&vertex) {
                    let fv = g(vertex);
                    consider(vertex, fv, &mut best);
                }
            }
        }
        h *= 0.5;
    }
    Ok(best)
}

fn nelder_mead_max<F>(f: &F, vertices: &[ParameterPoint], tol: f64) -> Result<(ParameterPoint, f64)>
where
    F: Fn(&ParameterPoint) -> Result<f64>,
{
    let d = vertices[0].dim();
    if vertices.len() != d + 1 || vertices.iter().any(|v| v.dim() != d) {
        return Err(Error::Domain(format!("Nelder-Mead needs {} vertices of dimension {d}", d + 1)));
    }
    // minimize the negated objective
    let g = |x: &[f64]| -eval_or_neg_inf(f, &ParameterPoint::from_parts(x.to_vec()));
    let mut simplex: Vec<(Vec<f64>, f64)> = vertices
        .iter()
        .map(|v| {
            let x = v.coords().to_vec();
            let fx = g(&x);
            (x, fx)
        })
        .collect();
    if simplex.iter().all(|(_, fx)| !fx.is_finite()) {
        return Err(Error::Bracketing);
    }

    let diameter = |s: &[(Vec<f64>, f64)]| -> f64 {
        let mut dia: f64 = 0.0;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                let dist = s[i]
                    .0
                    .iter()
                    .zip(&s[j].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                dia = dia.max(dist);
            }
        }
        dia
    };

    for _ in 0..500 * d {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        if diameter(&simplex) <= tol {
            break;
        }
        let worst = simplex.len() - 1;
        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..worst].iter().map(|(x, _)| x[j]).sum::<f64>() / worst as f64)
            .collect();
        let sub = |alpha: f64| -> Vec<f64> {
            (0..d)
                .map(|j| centroid[j] + alpha * (centroid[j] - simplex[worst].0[j]))
                .collect()
        };

        let reflect = sub(1.0);
        let f_reflect = g(&reflect);
        if f_reflect < simplex[0].1 {
            let expand = sub(2.0);
            let f_expand = g(&expand);
            simplex[worst] = if f_expand < f_reflect {
                (expand, f_expand)
            } else {
                (reflect, f_reflect)
            };
        } else if f_reflect < simplex[worst - 1].1 {
            simplex[worst] = (reflect, f_reflect);
        } else {
            let contract = sub(-0.5);
            let f_contract = g(&contract);
            if f_contract < simplex[worst].1 {
                simplex[worst] = (contract, f_contract);
            } else {
                // shrink toward the best vertex
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for j in 0..d {
                        entry.0[j] = 0.5 * (entry.0[j] + best[j]);
                    }
                    entry.1 = g(&entry.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let (x, fx) = simplex.swap_remove(0);
    Ok((ParameterPoint::from_parts(x), -fx))
}

/// Maximize a log profile likelihood over a bracket. One-dimensional
/// brackets use golden-section search with parabolic refinement; simplex
/// seeds use Nelder–Mead. Evaluation failures inside the search count as
/// −∞; only an entirely infeasible bracket is an error.
pub fn mle_maximize<F>(log_pl: F, bracket: &Bracket, tol: f64) -> Result<ParameterPoint>
where
    F: Fn(&ParameterPoint) -> Result<f64>,
{
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    match bracket {
        Bracket::Interval { lo, hi } => {
            if !(lo < hi) {
                return Err(Error::Domain(format!("invalid interval [{lo}, {hi}]")));
            }
            let (x, _) = golden_section_max(&log_pl, *lo, *hi, tol)?;
            Ok(ParameterPoint::from_parts(vec![x]))
        }
        Bracket::Simplex { vertices } => {
            if vertices.is_empty() {
                return Err(Error::Domain("simplex seed must be nonempty".into()));
            }
            let (x, _) = nelder_mead_max(&log_pl, vertices, tol)?;
            Ok(x)
        }
    }
}

/// How an information estimate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfoMethod {
    Numeric,
    Mcmc,
}

impl InfoMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            InfoMethod::Numeric => "numeric",
            InfoMethod::Mcmc => "mcmc",
        }
    }
}

/// Symmetric estimate of the efficient information matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoEstimate {
    pub matrix: DMatrix<f64>,
    pub step: f64,
    pub method: InfoMethod,
    /// Recorded, never assumed.
    pub positive_definite: bool,
}

fn finite_eval<F>(f: &F, theta: &ParameterPoint, label: &str) -> Result<f64>
where
    F: Fn(&ParameterPoint) -> Result<f64>,
{
    let v = f(theta).map_err(|_| Error::InfoEvaluation { point: label.to_string() })?;
    if !v.is_finite() {
        return Err(Error::InfoEvaluation { point: label.to_string() });
    }
    Ok(v)
}

/// Directional discretized information:
/// −2·[log pl(θ̂ + s·v) − log pl(θ̂)] / (n·s²).
pub fn info_directional<F>(log_pl: F, theta_hat: &ParameterPoint, v: &[f64], s: f64, n: usize) -> Result<f64>
where
    F: Fn(&ParameterPoint) -> Result<f64>,
{
    if v.len() != theta_hat.dim() {
        return Err(Error::Domain("direction dimension mismatch".into()));
    }
    if !s.is_finite() || s <= 0.0 {
        return Err(Error::Domain("step must be positive".into()));
    }
    let base = finite_eval(&log_pl, theta_hat, "theta_hat")?;
    let shifted = ParameterPoint::from_parts(
        theta_hat
            .coords()
            .iter()
            .zip(v)
            .map(|(t, vi)| t + s * vi)
            .collect(),
    );
    let moved = finite_eval(&log_pl, &shifted, "theta_hat + s v")?;
    Ok(-2.0 * (moved - base) / (n as f64 * s * s))
}

/// Element-wise discretized information matrix from the four-point
/// difference at θ̂, θ̂+eᵢs, θ̂+eⱼs and θ̂+eᵢs+eⱼs. Shared evaluations are
/// cached; the result is symmetric by construction.
pub fn info_matrix<F>(log_pl: F, theta_hat: &ParameterPoint, s: f64, n: usize) -> Result<InfoEstimate>
where
    F: Fn(&ParameterPoint) -> Result<f64>,
{
    if !s.is_finite() || s <= 0.0 {
        return Err(Error::Domain("step must be positive".into()));
    }
    let d = theta_hat.dim();
    let nf = n as f64;
    let shift = |i: Option<usize>, j: Option<usize>| -> ParameterPoint {
        let mut x = theta_hat.coords().to_vec();
        if let Some(i) = i {
            x[i] += s;
        }
        if let Some(j) = j {
            x[j] += s;
        }
        ParameterPoint::from_parts(x)
    };

    let base = finite_eval(&log_pl, theta_hat, "theta_hat")?;
    let singles: Vec<f64> = (0..d)
        .map(|i| finite_eval(&log_pl, &shift(Some(i), None), &format!("theta_hat + e{} s", i + 1)))
        .collect::<Result<_>>()?;

    let mut matrix = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let pair = finite_eval(
                &log_pl,
                &shift(Some(i), Some(j)),
                &format!("theta_hat + e{} s + e{} s", i + 1, j + 1),
            )?;
            let value = (-pair - base + singles[i] + singles[j]) / (nf * s * s);
            matrix[(i, j)] = value;
            matrix[(j, i)] = value;
        }
    }
    let positive_definite = matrix.clone().cholesky().is_some();
    Ok(InfoEstimate {
        matrix,
        step: s,
        method: InfoMethod::Numeric,
        positive_definite,
    })
}

/// Per-coordinate average of the retained samples.
pub fn posterior_mean(chain: &Chain) -> Result<ParameterPoint> {
    if chain.is_empty() {
        return Err(Error::DegenerateChain("empty chain".into()));
    }
    let d = chain.dim();
    let m = chain.len() as f64;
    let mean: Vec<f64> = (0..d)
        .map(|j| chain.samples.iter().map(|s| s.coord(j)).sum::<f64>() / m)
        .collect();
    Ok(ParameterPoint::from_parts(mean))
}

/// Inverse of n × the sample covariance of the retained draws.
pub fn posterior_info(chain: &Chain, n: usize) -> Result<InfoEstimate> {
    let m = chain.len();
    if m < 2 {
        return Err(Error::DegenerateChain("need at least two samples for a covariance".into()));
    }
    let d = chain.dim();
    let mean = posterior_mean(chain)?;
    let mut cov = DMatrix::zeros(d, d);
    for s in &chain.samples {
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += (s.coord(i) - mean.coord(i)) * (s.coord(j) - mean.coord(j));
            }
        }
    }
    cov /= (m - 1) as f64;
    cov *= n as f64;
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::DegenerateChain("singular sample covariance".into()))?;
    Ok(InfoEstimate {
        matrix: chol.inverse(),
        step: f64::NAN,
        method: InfoMethod::Mcmc,
        positive_definite: true,
    })
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn empirical_quantile(values: &[f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("quantile of empty sample".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("quantile level must be in [0,1], got {alpha}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = sorted.len();
    let h = alpha * (m - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(m - 1);
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// α-quantile of one chain coordinate.
pub fn credible_quantile(chain: &Chain, alpha: f64, coord: usize) -> Result<f64> {
    if chain.is_empty() {
        return Err(Error::DegenerateChain("empty chain".into()));
    }
    empirical_quantile(&chain.coordinate(coord), alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalMethod {
    WaldNumeric,
    WaldMcmc,
    Quantile,
    Plr,
}

impl IntervalMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            IntervalMethod::WaldNumeric => "wald_numeric",
            IntervalMethod::WaldMcmc => "wald_mcmc",
            IntervalMethod::Quantile => "quantile",
            IntervalMethod::Plr => "plr",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalEstimate {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub method: IntervalMethod,
    pub coord: usize,
}

/// Per-coordinate Wald intervals θ̂ᵢ ± z_{1−α/2} / √(n·Iᵢᵢ).
pub fn wald_interval(
    theta_hat: &ParameterPoint,
    info: &InfoEstimate,
    n: usize,
    alpha: f64,
) -> Result<Vec<IntervalEstimate>> {
    let d = theta_hat.dim();
    let z = normal::quantile(1.0 - alpha / 2.0);
    let method = match info.method {
        InfoMethod::Numeric => IntervalMethod::WaldNumeric,
        InfoMethod::Mcmc => IntervalMethod::WaldMcmc,
    };
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        let info_ii = info.matrix[(i, i)];
        if !(info_ii > 0.0) {
            return Err(Error::NonpositiveInformation {
                index: i,
                value: info_ii,
            });
        }
        let half = z / (n as f64 * info_ii).sqrt();
        out.push(IntervalEstimate {
            lower: theta_hat.coord(i) - half,
            upper: theta_hat.coord(i) + half,
            level: 1.0 - alpha,
            method,
            coord: i,
        });
    }
    Ok(out)
}

/// Posterior PLR draws 2·(log pl(θ̂) − log plᵢ); requires the supplied
/// maximum to dominate the chain (tolerance 1e-9), which catches stale MLEs.
pub fn plr_samples(chain: &Chain, log_pl_max: f64) -> Result<Vec<f64>> {
    let chain_max = chain
        .log_pl_values
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if chain_max > log_pl_max + 1e-9 {
        return Err(Error::StaleMle {
            excess: chain_max - log_pl_max,
        });
    }
    Ok(chain
        .log_pl_values
        .iter()
        .map(|&v| (2.0 * (log_pl_max - v)).max(0.0))
        .collect())
}

/// Empirical α-quantile of the posterior PLR draws.
pub fn plr_threshold(plr_values: &[f64], alpha: f64) -> Result<f64> {
    empirical_quantile(plr_values, alpha)
}

/// Invert the profile likelihood ratio at level `chi`: find the crossings of
/// 2(log pl(θ̂) − log pl(θ)) = chi on each side of θ̂ by geometric bracket
/// expansion and bisection. Assumes the profile is unimodal along each
/// direction.
pub fn plr_interval<F>(
    log_pl: F,
    theta_hat: &ParameterPoint,
    chi: f64,
    expand_limit: usize,
) -> Result<IntervalEstimate>
where
    F: Fn(&ParameterPoint) -> Result<f64>,
{
    if theta_hat.dim() != 1 {
        return Err(Error::Domain("profile likelihood ratio inversion is one-dimensional".into()));
    }
    if !chi.is_finite() || chi < 0.0 {
        return Err(Error::Domain(format!("chi must be nonnegative, got {chi}")));
    }
    let center = theta_hat.coord(0);
    let base = log_pl(theta_hat)?;
    if !base.is_finite() {
        return Err(Error::Domain("log profile likelihood must be finite at theta_hat".into()));
    }
    if chi == 0.0 {
        return Ok(IntervalEstimate {
            lower: center,
            upper: center,
            level: f64::NAN,
            method: IntervalMethod::Plr,
            coord: 0,
        });
    }
    let plr = |x: f64| -> f64 {
        let v = eval_or_neg_inf(&log_pl, &ParameterPoint::from_parts(vec![x]));
        2.0 * (base - v)
    };

    let mut endpoints = [f64::NAN; 2];
    for (k, side) in [(0usize, -1.0f64), (1usize, 1.0f64)] {
        let side_name = if side < 0.0 { "lower" } else { "upper" };
        let mut inner = center;
        let mut step = 0.1;
        let mut outer = None;
        for _ in 0..expand_limit {
            let probe = center + side * step;
            if plr(probe) >= chi {
                outer = Some(probe);
                break;
            }
            inner = probe;
            step *= 2.0;
        }
        let Some(mut outer) = outer else {
            return Err(Error::UnboundedInterval {
                side: side_name,
                doublings: expand_limit,
            });
        };
        for _ in 0..200 {
            if (outer - inner).abs() <= 1e-8 {
                break;
            }
            let mid = 0.5 * (inner + outer);
            if plr(mid) >= chi {
                outer = mid;
            } else {
                inner = mid;
            }
        }
        endpoints[k] = 0.5 * (inner + outer);
    }

    Ok(IntervalEstimate {
        lower: endpoints[0],
        upper: endpoints[1],
        level: f64::NAN,
        method: IntervalMethod::Plr,
        coord: 0,
    })
}

/// Configuration for the per-dataset inference pipeline.
#[derive(Debug, Clone)]
pub struct ReportConfig {
    pub rate: RateSpec,
    pub step_constant: f64,
    pub chain_total: usize,
    pub chain_burn_in: usize,
    pub seed: u64,
    pub prior: Prior,
    /// Two-sided coverage level for every interval (0.95 by default).
    pub level: f64,
    /// Chain start; defaults to the origin in the data's dimension.
    pub theta_init: Option<ParameterPoint>,
    pub icm: IcmOptions,
    pub sieve: SieveOptions,
    /// Also compute Wald intervals from the chain covariance.
    pub mcmc_wald: bool,
    /// Calibrate the PLR interval at the chain threshold instead of the χ²
    /// quantile.
    pub plr_calibrate_by_chain: bool,
    pub plr_expand_limit: usize,
    pub mle_tol: f64,
    /// Half-width of the compact parameter space: the posterior target is
    /// −∞ outside [−theta_bound, theta_bound]^d. Profile posteriors with a
    /// weakly informative design can plateau in the tails, and the theory
    /// assumes a compact parameter set.
    pub theta_bound: f64,
    /// Write the retained chain as CSV (`iter,theta1[,...],log_pl`) here.
    pub chain_dump: Option<std::path::PathBuf>,
}

impl ReportConfig {
    /// Per-model defaults: nuisance rate 1/2 (right censored), 1/3 (current
    /// status) or 2/5 (partly linear); desk-scale chain length.
    pub fn for_model(model: ModelKind, seed: u64) -> Self {
        let r = match model {
            ModelKind::CoxRight => 0.5,
            ModelKind::CoxCurrent => 1.0 / 3.0,
            ModelKind::PartlyLinear => 0.4,
        };
        ReportConfig {
            rate: RateSpec::new(r).expect("default rates are valid"),
            step_constant: 1.0,
            chain_total: 5000,
            chain_burn_in: 2000,
            seed,
            prior: Prior::Flat,
            level: 0.95,
            theta_init: None,
            icm: IcmOptions::default(),
            sieve: SieveOptions::default(),
            mcmc_wald: false,
            plr_calibrate_by_chain: false,
            plr_expand_limit: 60,
            mle_tol: 1e-8,
            theta_bound: 20.0,
            chain_dump: None,
        }
    }
}

/// Per-dataset inference summary.
#[derive(Debug, Clone)]
pub struct InferenceReport {
    pub model: ModelKind,
    pub n: usize,
    pub rate: RateSpec,
    pub seed: u64,
    pub mle: ParameterPoint,
    /// Best retained chain sample, kept alongside the refined MLE.
    pub chain_argmax: ParameterPoint,
    pub cm: ParameterPoint,
    pub se_m: Vec<f64>,
    pub se_n: Vec<f64>,
    pub log_pl_max: f64,
    pub intervals: Vec<IntervalEstimate>,
    pub chi_b: f64,
    pub info_step: f64,
    pub acceptance_rate: f64,
    pub tuning_converged: bool,
    pub chain_meta: ChainDiagnostics,
    pub warnings: Vec<String>,
}

impl InferenceReport {
    pub fn interval(&self, method: IntervalMethod, coord: usize) -> Option<&IntervalEstimate> {
        self.intervals
            .iter()
            .find(|iv| iv.method == method && iv.coord == coord)
    }

    /// Flat `key = value` serialization, deterministic ordering.
    pub fn to_key_value(&self) -> String {
        let join = |xs: &[f64]| xs.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",");
        let point = |p: &ParameterPoint| join(p.coords());
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("model", self.model.to_string());
        push("n", self.n.to_string());
        push("rate_r", fmt_f64(self.rate.r()));
        push("seed", self.seed.to_string());
        push("mle", point(&self.mle));
        push("chain_argmax", point(&self.chain_argmax));
        push("cm", point(&self.cm));
        push("se_m", join(&self.se_m));
        push("se_n", join(&self.se_n));
        push("log_pl_max", fmt_f64(self.log_pl_max));
        for iv in &self.intervals {
            let key = match iv.method {
                IntervalMethod::Quantile => "m",
                IntervalMethod::WaldNumeric => "n",
                IntervalMethod::WaldMcmc => "mcmc",
                IntervalMethod::Plr => "plr",
            };
            let suffix = if iv.coord == 0 {
                String::new()
            } else {
                format!("_{}", iv.coord + 1)
            };
            if iv.method == IntervalMethod::Plr {
                push(&format!("plr_lo{suffix}"), fmt_f64(iv.lower));
                push(&format!("plr_hi{suffix}"), fmt_f64(iv.upper));
            } else {
                push(&format!("l_{key}{suffix}"), fmt_f64(iv.lower));
                push(&format!("u_{key}{suffix}"), fmt_f64(iv.upper));
            }
        }
        push("chi_b", fmt_f64(self.chi_b));
        push("info_step", fmt_f64(self.info_step));
        push("accept_rate", fmt_f64(self.acceptance_rate));
        push("tuning_converged", self.tuning_converged.to_string());
        push("autocorr_time", join(&self.chain_meta.autocorrelation_time));
        push("split_half", join(&self.chain_meta.split_half_discrepancy));
        push(
            "warnings",
            if self.warnings.is_empty() {
                "none".to_string()
            } else {
                self.warnings.join("; ")
            },
        );
        out
    }
}

fn profile_fn<'a>(
    model: ModelKind,
    data: &'a Dataset,
    config: &'a ReportConfig,
) -> impl Fn(&ParameterPoint) -> Result<f64> + 'a {
    move |theta: &ParameterPoint| -> Result<f64> {
        let eval: ProfileEvaluation = match model {
            ModelKind::CoxRight => breslow_profile(theta, data)?,
            ModelKind::CoxCurrent => icm_profile(theta, data, &config.icm)?,
            ModelKind::PartlyLinear => sieve_profile(theta, data, &config.sieve)?,
        };
        Ok(eval.log_pl)
    }
}

const CHAIN_LANE: u64 = 0x11;
const TUNE_LANE: u64 = 0x12;

/// Run the full per-dataset pipeline: tune the proposal, sample the profile
/// posterior, refine the MLE from the best chain sample, then compute both
/// standard errors and the quantile/Wald/PLR intervals.
///
/// Estimator-level degeneracies (nonpositive information, unbounded PLR
/// inversion, singular chain covariance) are recorded as warnings rather
/// than failing the report; pipeline-stage failures propagate with the
/// stage name.
pub fn build_report(model: ModelKind, data: &Dataset, config: &ReportConfig) -> Result<InferenceReport> {
    let n = data.n();
    let d = data.covariate_dim();
    if !(config.theta_bound > 0.0) {
        return Err(Error::Domain("theta_bound must be positive".into()));
    }
    let raw_log_pl = profile_fn(model, data, config);
    let bound = config.theta_bound;
    let log_pl = move |p: &ParameterPoint| -> Result<f64> {
        if p.coords().iter().any(|v| v.abs() > bound) {
            return Ok(f64::NEG_INFINITY);
        }
        raw_log_pl(p)
    };
    let mut warnings = Vec::new();

    let theta_init = match &config.theta_init {
        Some(p) => {
            if p.dim() != d {
                return Err(Error::Domain(format!(
                    "theta_init dimension {} does not match data dimension {d}",
                    p.dim()
                )));
            }
            if p.coords().iter().any(|v| v.abs() > bound) {
                return Err(Error::Domain("theta_init lies outside the parameter bound".into()));
            }
            p.clone()
        }
        None => ParameterPoint::from_parts(vec![0.0; d]),
    };

    let tuned = tune_proposal(&log_pl, &config.prior, &theta_init, derive_seed(config.seed, TUNE_LANE, 0))
        .map_err(|e| e.at_stage("tune"))?;
    if !tuned.converged {
        warnings.push(format!(
            "proposal tuning hit the round cap (final acceptance {:.3})",
            tuned.acceptance
        ));
    }

    let chain = metropolis_run(
        &log_pl,
        &config.prior,
        &theta_init,
        &tuned.sd,
        config.chain_total,
        config.chain_burn_in,
        derive_seed(config.seed, CHAIN_LANE, 0),
    )
    .map_err(|e| e.at_stage("chain"))?;

    if let Some(path) = &config.chain_dump {
        std::fs::write(path, chain.to_csv()).map_err(|e| Error::Io(e).at_stage("chain"))?;
    }

    let diagnostics = chain_diagnostics(&chain).map_err(|e| e.at_stage("diagnostics"))?;
    if diagnostics.degenerate {
        warnings.push("degenerate chain: zero variance in at least one coordinate".into());
    }

    let (chain_best, _) = chain.argmax().expect("chain is nonempty");
    let chain_argmax = chain_best.clone();

    // the best chain sample seeds the optimizer bracket, clamped to the
    // parameter space
    let bracket = if d == 1 {
        let spread = (8.0 * diagnostics.sd[0]).max(1e-3);
        let lo = (chain_argmax.coord(0) - spread).max(-bound);
        let hi = (chain_argmax.coord(0) + spread).min(bound);
        Bracket::Interval { lo, hi }
    } else {
        let mut vertices = vec![chain_argmax.clone()];
        for i in 0..d {
            let mut v = chain_argmax.coords().to_vec();
            v[i] = (v[i] + (2.0 * diagnostics.sd[i]).max(1e-3)).min(bound);
            vertices.push(ParameterPoint::from_parts(v));
        }
        Bracket::Simplex { vertices }
    };
    let mle = mle_maximize(&log_pl, &bracket, config.mle_tol).map_err(|e| e.at_stage("mle"))?;
    let log_pl_max = log_pl(&mle)
        .ok()
        .filter(|v| v.is_finite())
        .ok_or(Error::Bracketing)
        .map_err(|e| e.at_stage("mle"))?;

    let cm = posterior_mean(&chain).map_err(|e| e.at_stage("posterior"))?;
    let se_m = diagnostics.sd.clone();

    let alpha = 1.0 - config.level;
    let mut intervals = Vec::new();
    for coord in 0..d {
        let lower = credible_quantile(&chain, alpha / 2.0, coord).map_err(|e| e.at_stage("quantiles"))?;
        let upper = credible_quantile(&chain, 1.0 - alpha / 2.0, coord).map_err(|e| e.at_stage("quantiles"))?;
        intervals.push(IntervalEstimate {
            lower,
            upper,
            level: config.level,
            method: IntervalMethod::Quantile,
            coord,
        });
    }

    let info_step = step_size(n, &config.rate, config.step_constant);
    let mut se_n = vec![f64::NAN; d];
    match info_matrix(&log_pl, &mle, info_step, n) {
        Ok(info) => {
            for i in 0..d {
                let info_ii = info.matrix[(i, i)];
                if info_ii > 0.0 {
                    se_n[i] = 1.0 / (n as f64 * info_ii).sqrt();
                } else {
                    warnings.push(format!("nonpositive numeric information in coordinate {}", i + 1));
                }
            }
            match wald_interval(&mle, &info, n, alpha) {
                Ok(list) => intervals.extend(list),
                Err(e) => warnings.push(format!("wald interval skipped: {e}")),
            }
        }
        Err(e) => warnings.push(format!("numeric information failed: {e}")),
    }

    if config.mcmc_wald {
        match posterior_info(&chain, n).and_then(|info| wald_interval(&mle, &info, n, alpha)) {
            Ok(list) => intervals.extend(list),
            Err(e) => warnings.push(format!("mcmc wald interval skipped: {e}")),
        }
    }

    let plr_values = plr_samples(&chain, log_pl_max).map_err(|e| e.at_stage("plr"))?;
    let chi_b = plr_threshold(&plr_values, config.level).map_err(|e| e.at_stage("plr"))?;

    if d == 1 {
        let chi = if config.plr_calibrate_by_chain {
            chi_b
        } else {
            normal::chi2_quantile(d, config.level)
        };
        match plr_interval(&log_pl, &mle, chi, config.plr_expand_limit) {
            Ok(mut iv) => {
                iv.level = config.level;
                intervals.push(iv);
            }
            Err(e) => warnings.push(format!("plr interval skipped: {e}")),
        }
    }

    Ok(InferenceReport {
        model,
        n,
        rate: config.rate,
        seed: config.seed,
        mle,
        chain_argmax,
        cm,
        se_m,
        se_n,
        log_pl_max,
        intervals,
        chi_b,
        info_step,
        acceptance_rate: chain.acceptance_rate,
        tuning_converged: tuned.converged,
        chain_meta: diagnostics,
        warnings,
    })
}

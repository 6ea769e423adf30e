//! Partly linear normal model with current status data (nuisance rate
//! r = 2/5): the regression curve is profiled out over a cubic B-spline
//! sieve under the smoothness-ball constraint J2(k) + sup|k| ≤ M.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::normal;
use crate::seed::rng_from;
use crate::spline::{SieveOptions, SplineBasis, SplineCurve};
use crate::types::{Dataset, NuisanceFit, ParameterPoint, PartlyLinearObservation, ProfileEvaluation};

/// The probit sieve log likelihood at fixed θ, as a function of the spline
/// coefficients. Design rows are centered so the fitted curve has empirical
/// mean zero over the sample z values.
pub struct SieveObjective {
    centered: DMatrix<f64>,
    col_means: DVector<f64>,
    qbase: Vec<f64>,
    delta: Vec<bool>,
    penalty: DMatrix<f64>,
}

impl SieveObjective {
    pub fn new(theta: &ParameterPoint, data: &Dataset, basis: &SplineBasis) -> Result<Self> {
        let obs = data.partly_linear()?;
        if theta.dim() != 1 {
            return Err(Error::Domain("partly linear model has a scalar parametric component".into()));
        }
        let th = theta.coord(0);
        let n = obs.len();
        let p = basis.n_basis();
        let mut design = DMatrix::zeros(n, p);
        for (i, o) in obs.iter().enumerate() {
            for (j, v) in basis.eval_row(o.z).into_iter().enumerate() {
                design[(i, j)] = v;
            }
        }
        let col_means = DVector::from_iterator(p, (0..p).map(|j| design.column(j).sum() / n as f64));
        let mut centered = design;
        for i in 0..n {
            for j in 0..p {
                centered[(i, j)] -= col_means[j];
            }
        }
        Ok(SieveObjective {
            centered,
            col_means,
            qbase: obs.iter().map(|o| o.c - th * o.w).collect(),
            delta: obs.iter().map(|o| o.delta).collect(),
            penalty: basis.penalty().clone(),
        })
    }

    pub fn n_coefficients(&self) -> usize {
        self.centered.ncols()
    }

    fn residuals(&self, beta: &DVector<f64>) -> DVector<f64> {
        let fit = &self.centered * beta;
        DVector::from_iterator(self.qbase.len(), self.qbase.iter().zip(fit.iter()).map(|(q, f)| q - f))
    }

    /// Unpenalized log likelihood.
    pub fn log_lik(&self, beta: &[f64]) -> f64 {
        let beta = DVector::from_column_slice(beta);
        let q = self.residuals(&beta);
        q.iter()
            .zip(&self.delta)
            .map(|(&qi, &d)| if d { normal::log_cdf(qi) } else { normal::log_sf(qi) })
            .sum()
    }

    pub fn penalty_form(&self, beta: &[f64]) -> f64 {
        let beta = DVector::from_column_slice(beta);
        (beta.transpose() * &self.penalty * beta)[(0, 0)]
    }

    /// Penalized objective ℓ(β) − λ·J2(β)².
    pub fn penalized(&self, beta: &[f64], lambda: f64) -> f64 {
        self.log_lik(beta) - lambda * self.penalty_form(beta)
    }

    /// Analytic gradient of the penalized objective.
    pub fn grad_penalized(&self, beta: &[f64], lambda: f64) -> Vec<f64> {
        let betav = DVector::from_column_slice(beta);
        let q = self.residuals(&betav);
        let score = DVector::from_iterator(
            q.len(),
            q.iter().zip(&self.delta).map(|(&qi, &d)| {
                if d {
                    normal::inv_mills(qi)
                } else {
                    -normal::mills_upper(qi)
                }
            }),
        );
        let grad = -self.centered.transpose() * score - 2.0 * lambda * (&self.penalty * &betav);
        grad.iter().copied().collect()
    }

    /// Negated Hessian of the penalized objective (positive semidefinite).
    fn neg_hessian(&self, beta: &DVector<f64>, lambda: f64) -> DMatrix<f64> {
        let q = self.residuals(beta);
        let n = q.len();
        let p = self.centered.ncols();
        let mut weighted = self.centered.clone();
        for i in 0..n {
            let qi = q[i];
            let curv = if self.delta[i] {
                let m = normal::inv_mills(qi);
                m * (qi + m)
            } else {
                let h = normal::mills_upper(qi);
                h * (h - qi)
            };
            // curvature of -log-lik term; nonnegative by log-concavity
            let w = curv.max(0.0).sqrt();
            for j in 0..p {
                weighted[(i, j)] *= w;
            }
        }
        weighted.transpose() * weighted + 2.0 * lambda * &self.penalty
    }
}

/// Result of one penalized Newton solve plus the smoothness-path search.
#[derive(Debug, Clone)]
pub struct SieveFit {
    pub curve: SplineCurve,
    /// Unpenalized log likelihood at the fitted coefficients.
    pub log_pl: f64,
    /// Final penalty multiplier on the smoothness path.
    pub lambda: f64,
    /// Penalized objective after every accepted Newton step (innermost solve).
    pub newton_trace: Vec<f64>,
    pub j2: f64,
    pub sup_norm: f64,
}

struct NewtonOutcome {
    beta: DVector<f64>,
    trace: Vec<f64>,
    converged: bool,
}

fn newton_solve(
    objective: &SieveObjective,
    lambda: f64,
    start: &DVector<f64>,
    opts: &SieveOptions,
) -> Result<NewtonOutcome> {
    let p = objective.n_coefficients();
    let mut beta = start.clone();
    let mut value = objective.penalized(beta.as_slice(), lambda);
    let mut trace = vec![value];
    // Levenberg damping with a gain-ratio update. The model has flat
    // directions (the centered basis rows sum to zero), so the damping also
    // keeps the factorization alive.
    let mut ridge = 1e-6;

    for _ in 0..opts.max_iter {
        let grad = DVector::from_vec(objective.grad_penalized(beta.as_slice(), lambda));
        if grad.amax() <= opts.tol * (1.0 + value.abs()) {
            return Ok(NewtonOutcome { beta, trace, converged: true });
        }
        let neg_h = objective.neg_hessian(&beta, lambda);
        let scale = neg_h.trace().abs() / p as f64 + 1.0;

        let mut accepted = false;
        for _attempt in 0..80 {
            let nu = ridge * scale;
            let mut damped = neg_h.clone();
            for i in 0..p {
                damped[(i, i)] += nu;
            }
            let Some(chol) = Cholesky::new(damped) else {
                ridge *= 10.0;
                continue;
            };
            let step = chol.solve(&grad);
            let slope = grad.dot(&step);
            if slope <= 0.0 {
                // ascent exhausted up to rounding
                return Ok(NewtonOutcome { beta, trace, converged: true });
            }
            // model improvement of the damped step: (g·s + nu·|s|²) / 2
            let predicted = 0.5 * (slope + nu * step.norm_squared());
            let trial = &beta + &step;
            let trial_value = objective.penalized(trial.as_slice(), lambda);
            let gain = (trial_value - value) / predicted;
            if gain > 1e-4 {
                beta = trial;
                value = trial_value;
                trace.push(value);
                if gain > 0.75 {
                    ridge = (ridge / 3.0).max(1e-12);
                } else if gain < 0.25 {
                    ridge *= 2.0;
                }
                accepted = true;
                break;
            }
            ridge *= 10.0;
            if ridge > 1e16 {
                break;
            }
        }
        if !accepted {
            let stalled_ok = grad.amax() <= 1e2 * opts.tol * (1.0 + value.abs());
            return Ok(NewtonOutcome { beta, trace, converged: stalled_ok });
        }
    }
    Ok(NewtonOutcome { beta, trace, converged: false })
}

const SUP_GRID: usize = 1000;

/// Fit the sieve at fixed θ: damped Newton on the penalized probit
/// likelihood, with the penalty multiplier raised along a bisection path
/// until the fitted curve satisfies J2 + sup|k| ≤ M.
pub fn sieve_fit(theta: &ParameterPoint, data: &Dataset, options: &SieveOptions) -> Result<SieveFit> {
    options.validate()?;
    let obs = data.partly_linear()?;
    let zs: Vec<f64> = obs.iter().map(|o| o.z).collect();
    let basis = SplineBasis::build(&zs, options)?;
    let objective = SieveObjective::new(theta, data, &basis)?;
    let p = objective.n_coefficients();

    // fixed evaluation grid for the sup-norm part of the constraint; built
    // once, reused along the whole penalty path
    let (support_lo, support_hi) = basis.support();
    let grid_design: Vec<Vec<f64>> = (0..SUP_GRID)
        .map(|i| {
            let z = support_lo + (support_hi - support_lo) * i as f64 / (SUP_GRID - 1) as f64;
            basis.eval_row(z)
        })
        .collect();

    let assemble = |beta: &DVector<f64>, trace: Vec<f64>, lambda: f64| -> SieveFit {
        let offset = beta.dot(&objective.col_means);
        let sup_norm = grid_design
            .iter()
            .map(|row| (row.iter().zip(beta.iter()).map(|(b, c)| b * c).sum::<f64>() - offset).abs())
            .fold(0.0, f64::max);
        let curve = SplineCurve {
            basis: basis.clone(),
            coefficients: beta.iter().copied().collect(),
            centering_offset: offset,
        };
        SieveFit {
            log_pl: objective.log_lik(beta.as_slice()),
            j2: curve.j2(),
            sup_norm,
            curve,
            lambda,
            newton_trace: trace,
        }
    };
    let feasible = |fit: &SieveFit| fit.j2 + fit.sup_norm <= options.m;
    let solve = |lambda: f64, warm: &DVector<f64>| -> Result<NewtonOutcome> {
        let out = newton_solve(&objective, lambda, warm, options)?;
        if out.converged {
            Ok(out)
        } else {
            Err(Error::NewtonNotConverged {
                iterations: options.max_iter,
                best: Box::new(ProfileEvaluation {
                    log_pl: objective.log_lik(out.beta.as_slice()),
                    nuisance: NuisanceFit::Spline(assemble(&out.beta, out.trace, lambda).curve),
                    overflow: false,
                }),
            })
        }
    };

    let start = DVector::zeros(p);
    let unpenalized = solve(0.0, &start)?;
    let fit0 = assemble(&unpenalized.beta, unpenalized.trace, 0.0);
    if feasible(&fit0) {
        return Ok(fit0);
    }

    // raise λ until feasible, then bisect toward the constraint boundary
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut warm = unpenalized.beta.clone();
    let mut best: Option<SieveFit> = None;
    for _ in 0..60 {
        let out = solve(hi, &warm)?;
        warm = out.beta.clone();
        let fit = assemble(&out.beta, out.trace, hi);
        if feasible(&fit) {
            best = Some(fit);
            break;
        }
        lo = hi;
        hi *= 4.0;
        if hi > 1e14 {
            // the zero curve is always feasible, so the path must terminate
            return Err(Error::SieveInfeasible(format!(
                "no feasible penalty found up to lambda = {hi:.1e} (m = {})",
                options.m
            )));
        }
    }
    let mut best = best.expect("loop either breaks with a fit or errors");

    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let out = solve(mid, &warm)?;
        warm = out.beta.clone();
        let fit = assemble(&out.beta, out.trace, mid);
        if feasible(&fit) {
            hi = mid;
            best = fit;
        } else {
            lo = mid;
        }
    }
    Ok(best)
}

/// Profile the regression curve out of the partly linear likelihood.
pub fn sieve_profile(theta: &ParameterPoint, data: &Dataset, options: &SieveOptions) -> Result<ProfileEvaluation> {
    let fit = sieve_fit(theta, data, options)?;
    Ok(ProfileEvaluation {
        log_pl: fit.log_pl,
        nuisance: NuisanceFit::Spline(fit.curve),
        overflow: false,
    })
}

/// Generate partly linear current-status data: Y = θ₀·W + k₀(Z) + ξ with
/// standard normal ξ, censoring time C ~ Uniform[lc, uc], observed indicator
/// Δ = 1{Y ≤ C}.
pub fn generate_partly_linear(
    n: usize,
    theta0: &ParameterPoint,
    k0: &dyn Fn(f64) -> f64,
    lc: f64,
    uc: f64,
    seed: u64,
) -> Result<Dataset> {
    if n < 1 {
        return Err(Error::Domain("sample size must be >= 1".into()));
    }
    if theta0.dim() != 1 {
        return Err(Error::Domain("partly linear model has a scalar parametric component".into()));
    }
    if !(lc < uc) {
        return Err(Error::Domain(format!("need lc < uc, got [{lc}, {uc}]")));
    }
    let mut rng = rng_from(seed);
    let mut obs = Vec::with_capacity(n);
    for _ in 0..n {
        let w: f64 = rng.random();
        let z: f64 = rng.random();
        let xi: f64 = StandardNormal.sample(&mut rng);
        let y = theta0.coord(0) * w + k0(z) + xi;
        let c = lc + (uc - lc) * rng.random::<f64>();
        obs.push(PartlyLinearObservation::new(c, y <= c, w, z)?);
    }
    Dataset::from_partly_linear(obs)
}

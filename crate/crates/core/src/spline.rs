//! Cubic B-spline sieve for the partly linear model's regression curve.
//!
//! Interior knots sit at empirical quantiles of the observed z values, the
//! knot count grows like ceil(c·n^(1/5)), and the curvature penalty matrix
//! holds the exact integrals ∫ Bᵢ''(z)Bⱼ''(z) dz (two-point Gauss–Legendre
//! per knot span, exact for the piecewise-quadratic integrand).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const ORDER: usize = 4; // cubic

/// Sieve configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SieveOptions {
    /// Radius of the smoothness ball: J2(k) + sup|k| ≤ m.
    pub m: f64,
    /// Constant c in the knot count ceil(c·n^(1/5)).
    pub knot_constant: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SieveOptions {
    fn default() -> Self {
        SieveOptions {
            m: 10.0,
            knot_constant: 2.0,
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

impl SieveOptions {
    pub fn validate(&self) -> Result<()> {
        if [self.m, self.knot_constant, self.tol].iter().any(|v| !v.is_finite() || *v <= 0.0)
            || self.max_iter < 1
        {
            return Err(Error::Domain("sieve options must all be positive".into()));
        }
        Ok(())
    }
}

/// A cubic B-spline basis over a compact support with its curvature penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    /// Full augmented knot vector (boundary knots repeated 4×).
    knots: Vec<f64>,
    n_basis: usize,
    support: (f64, f64),
    penalty: DMatrix<f64>,
    /// Set when the requested interior-knot count had to be reduced because
    /// the data held too few distinct z values.
    pub reduced: bool,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl SplineBasis {
    /// Build the basis on the empirical support of `z_points` with
    /// ceil(knot_constant · n^(1/5)) interior knots at empirical quantiles.
    pub fn build(z_points: &[f64], options: &SieveOptions) -> Result<SplineBasis> {
        options.validate()?;
        if z_points.is_empty() {
            return Err(Error::Domain("spline basis needs at least one z point".into()));
        }
        if z_points.iter().any(|z| !z.is_finite()) {
            return Err(Error::Domain("z points must be finite".into()));
        }
        let mut sorted = z_points.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (mut a, mut b) = (sorted[0], sorted[sorted.len() - 1]);
        if a == b {
            // degenerate support: widen so the basis is well defined; the
            // centered fit is identically zero there anyway
            a -= 0.5;
            b += 0.5;
        }

        let n = z_points.len();
        let requested = (options.knot_constant * (n as f64).powf(0.2)).ceil() as usize;
        let mut interior: Vec<f64> = (1..=requested)
            .map(|j| quantile(&sorted, j as f64 / (requested + 1) as f64))
            .filter(|k| *k > a && *k < b)
            .collect();
        interior.dedup();
        let reduced = interior.len() < requested;

        let mut knots = Vec::with_capacity(interior.len() + 2 * ORDER);
        knots.extend(std::iter::repeat_n(a, ORDER));
        knots.extend(interior.iter().copied());
        knots.extend(std::iter::repeat_n(b, ORDER));
        let n_basis = knots.len() - ORDER;

        let mut basis = SplineBasis {
            knots,
            n_basis,
            support: (a, b),
            penalty: DMatrix::zeros(n_basis, n_basis),
            reduced,
        };
        basis.penalty = basis.build_penalty();
        Ok(basis)
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn penalty(&self) -> &DMatrix<f64> {
        &self.penalty
    }

    /// All basis values at `z` (clamped to the support).
    pub fn eval_row(&self, z: f64) -> Vec<f64> {
        self.eval_deriv_row(z, 0)
    }

    /// All second derivatives at `z`.
    pub fn eval_d2_row(&self, z: f64) -> Vec<f64> {
        self.eval_deriv_row(z, 2)
    }

    fn span_of(&self, x: f64) -> usize {
        let m = self.knots.len();
        // last interval is closed on the right
        if x >= self.support.1 {
            let mut i = m - ORDER - 1;
            while self.knots[i] == self.knots[i + 1] {
                i -= 1;
            }
            return i;
        }
        let mut i = self.knots.partition_point(|k| *k <= x);
        i = i.saturating_sub(1).min(m - 2);
        i
    }

    fn eval_deriv_row(&self, z: f64, deriv: usize) -> Vec<f64> {
        let x = z.clamp(self.support.0, self.support.1);
        let tau = &self.knots;
        let m = tau.len();
        let span = self.span_of(x);

        // order-1 indicators, then Cox–de Boor up to the working order
        let work_order = ORDER - deriv;
        let mut cur = vec![0.0f64; m - 1];
        cur[span] = 1.0;
        for k in 2..=work_order {
            let mut next = vec![0.0f64; m - k];
            for i in 0..m - k {
                let mut v = 0.0;
                let dl = tau[i + k - 1] - tau[i];
                if dl > 0.0 {
                    v += (x - tau[i]) / dl * cur[i];
                }
                let dr = tau[i + k] - tau[i + 1];
                if dr > 0.0 {
                    v += (tau[i + k] - x) / dr * cur[i + 1];
                }
                next[i] = v;
            }
            cur = next;
        }

        if deriv == 0 {
            cur.truncate(self.n_basis);
            return cur;
        }

        // express D^deriv of each order-4 basis in the order-(4-deriv) basis
        let mut out = vec![0.0f64; self.n_basis];
        for i in 0..self.n_basis {
            let mut coeffs = vec![(i, 1.0f64)];
            let mut k = ORDER;
            for _ in 0..deriv {
                let mut next: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len() + 1);
                for &(j, c) in &coeffs {
                    let dl = tau[j + k - 1] - tau[j];
                    if dl > 0.0 {
                        push_coeff(&mut next, j, c * (k - 1) as f64 / dl);
                    }
                    let dr = tau[j + k] - tau[j + 1];
                    if dr > 0.0 {
                        push_coeff(&mut next, j + 1, -c * (k - 1) as f64 / dr);
                    }
                }
                coeffs = next;
                k -= 1;
            }
            out[i] = coeffs
                .iter()
                .map(|&(j, c)| if j < cur.len() { c * cur[j] } else { 0.0 })
                .sum();
        }
        out
    }

    fn build_penalty(&self) -> DMatrix<f64> {
        let p = self.n_basis;
        let mut pen = DMatrix::zeros(p, p);
        // two-point Gauss–Legendre on each nonempty knot span
        let gl = 0.5 / (3.0f64).sqrt();
        for w in self.knots.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi <= lo {
                continue;
            }
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for node in [mid - (hi - lo) * gl, mid + (hi - lo) * gl] {
                let row = self.eval_d2_row(node);
                for i in 0..p {
                    if row[i] == 0.0 {
                        continue;
                    }
                    for j in i..p {
                        let v = half * (row[i] * row[j]);
                        pen[(i, j)] += v;
                        if j != i {
                            pen[(j, i)] += v;
                        }
                    }
                }
            }
        }
        pen
    }
}

fn push_coeff(list: &mut Vec<(usize, f64)>, idx: usize, c: f64) {
    for entry in list.iter_mut() {
        if entry.0 == idx {
            entry.1 += c;
            return;
        }
    }
    list.push((idx, c));
}

/// A fitted spline curve with empirical mean zero at the sample z values.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineCurve {
    pub basis: SplineBasis,
    pub coefficients: Vec<f64>,
    /// Subtracted so the fitted curve averages zero over the sample.
    pub centering_offset: f64,
}

impl SplineCurve {
    pub fn eval(&self, z: f64) -> f64 {
        let row = self.basis.eval_row(z);
        let raw: f64 = row.iter().zip(&self.coefficients).map(|(b, c)| b * c).sum();
        raw - self.centering_offset
    }

    /// Second-derivative Sobolev seminorm, exact from the penalty form.
    pub fn j2(&self) -> f64 {
        let p = self.basis.n_basis();
        let mut q = 0.0;
        for i in 0..p {
            for j in 0..p {
                q += self.coefficients[i] * self.basis.penalty()[(i, j)] * self.coefficients[j];
            }
        }
        q.max(0.0).sqrt()
    }

    /// Sup-norm estimate on an equally spaced grid over the support.
    pub fn sup_norm_on_grid(&self, points: usize) -> f64 {
        let (a, b) = self.basis.support();
        (0..points)
            .map(|i| {
                let z = a + (b - a) * i as f64 / (points - 1) as f64;
                self.eval(z).abs()
            })
            .fold(0.0, f64::max)
    }
}

//! Batch PCA baseline and reference bound curves.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::diagnostics::rescaled_stepsize;
use crate::error::{Error, Result};
use crate::model::{project_to_sphere, SpectralModel, UnitVector};
use crate::rng;
use crate::sampling::uniform_sphere;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;

fn check_samples(samples: &[Vec<f64>]) -> Result<usize> {
    let first = samples.first().ok_or(Error::EmptyInput)?;
    let d = first.len();
    if d == 0 {
        return Err(Error::EmptyInput);
    }
    for s in samples {
        if s.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: s.len(),
            });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
    }
    Ok(d)
}

/// `(1/n) sum_i x_i x_i^T`, without centering.
pub fn empirical_covariance(samples: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = check_samples(samples)?;
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for s in samples {
        for i in 0..d {
            let si = s[i];
            if si == 0.0 {
                continue;
            }
            for j in i..d {
                cov[(i, j)] += si * s[j];
            }
        }
    }
    let n = samples.len() as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / n;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(cov)
}

/// Covariance about the sample mean, for robustness studies.
pub fn centered_covariance(samples: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = check_samples(samples)?;
    let n = samples.len() as f64;
    let mut mean = vec![0.0; d];
    for s in samples {
        crate::linalg::axpy(1.0 / n, s, &mut mean);
    }
    let centered: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| s.iter().zip(&mean).map(|(a, m)| a - m).collect())
        .collect();
    empirical_covariance(&centered)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchPcaResult {
    pub eigenvalue: f64,
    pub eigenvector: UnitVector,
    pub iterations: usize,
    pub residual: f64,
}

/// Top eigenpair of a symmetric PSD matrix by power iteration.
///
/// Converged when `|A v - lambda v| <= tol * max(lambda, 1)`.
pub fn power_iteration(cov: &DMatrix<f64>, tol: f64, max_iter: usize, seed: u64) -> Result<BatchPcaResult> {
    let d = cov.nrows();
    if d == 0 || cov.ncols() != d {
        return Err(Error::InvalidArgument("covariance must be square and nonempty".into()));
    }
    let start = uniform_sphere(&mut rng::rng_from_seed(seed), d)?;
    let mut v = DVector::from_vec(start.into_vec());
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        let av = cov * &v;
        let lambda = v.dot(&av);
        residual = (&av - lambda * &v).norm();
        if residual <= tol * lambda.max(1.0) {
            break;
        }
        let n = av.norm();
        if n == 0.0 {
            // v lies in the null space; every direction has eigenvalue 0 there.
            residual = 0.0;
            break;
        }
        v = av / n;
        iterations += 1;
    }
    let converged = residual <= tol * v.dot(&(cov * &v)).max(1.0);
    if !converged {
        return Err(Error::NonConvergence { residual });
    }
    let argmax = v.iamax();
    if v[argmax] < 0.0 {
        v.neg_mut();
    }
    let eigenvector = project_to_sphere(v.as_slice())?;
    let v = DVector::from_column_slice(eigenvector.as_slice());
    let av = cov * &v;
    let eigenvalue = v.dot(&av);
    let residual = (&av - eigenvalue * &v).norm();
    warn_if_degenerate(cov, &v, eigenvalue, seed);
    Ok(BatchPcaResult {
        eigenvalue,
        eigenvector,
        iterations,
        residual,
    })
}

fn warn_if_degenerate(cov: &DMatrix<f64>, v: &DVector<f64>, lambda1: f64, seed: u64) {
    let d = cov.nrows();
    if d < 2 {
        return;
    }
    let deflated = cov - lambda1 * v * v.transpose();
    let start = uniform_sphere(&mut rng::rng_from_seed(seed ^ 0x5EED), d).expect("d >= 2");
    let mut w = DVector::from_vec(start.into_vec());
    let mut lambda2 = 0.0;
    for _ in 0..500 {
        let aw = &deflated * &w;
        lambda2 = w.dot(&aw);
        let n = aw.norm();
        if n == 0.0 {
            break;
        }
        w = aw / n;
    }
    if (lambda1 - lambda2).abs() <= 1e-8 * lambda1.max(1.0) {
        log::warn!("batch covariance has a numerically degenerate top eigenvalue ({lambda1})");
    }
}

/// Principal component of the empirical covariance of `samples`.
pub fn batch_pca(samples: &[Vec<f64>], tol: f64, max_iter: usize, seed: u64) -> Result<BatchPcaResult> {
    let cov = empirical_covariance(samples)?;
    power_iteration(&cov, tol, max_iter, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Minimax,
    Thm3a,
    Thm3b,
    Thm1,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::Minimax => "minimax",
            BoundKind::Thm3a => "thm3a",
            BoundKind::Thm3b => "thm3b",
            BoundKind::Thm1 => "thm1",
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "minimax" => Ok(BoundKind::Minimax),
            "thm3a" => Ok(BoundKind::Thm3a),
            "thm3b" => Ok(BoundKind::Thm3b),
            "thm1" => Ok(BoundKind::Thm1),
            other => Err(Error::InvalidArgument(format!("unknown bound kind {other:?}"))),
        }
    }
}

/// Constant-stepsize parameters needed by the finite-time curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiniteTimeContext {
    pub beta: f64,
    /// Step index `n`.
    pub step: u64,
    /// Warm-entry time `N^o`.
    pub warm_time: u64,
    pub epsilon: f64,
}

/// Reference curve value at sample size `n_samples`, with caller-supplied
/// constant `c`.
pub fn bound_curve(
    kind: BoundKind,
    model: &SpectralModel,
    d: usize,
    n_samples: u64,
    c: f64,
    context: Option<&FiniteTimeContext>,
) -> Result<f64> {
    if d != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: d,
        });
    }
    if n_samples < 2 {
        return Err(Error::DegenerateHorizon);
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument("bound constant must be positive".into()));
    }
    let n = n_samples as f64;
    let eigs = model.eigenvalues();
    let l1 = eigs[0];
    let gap = model.eigengap();
    let sigma2 = model.effective_noise_variance();
    let tail_sum = |term: &dyn Fn(f64) -> f64| -> Result<f64> {
        eigs[1..]
            .iter()
            .map(|&lk| {
                if lk >= l1 {
                    Err(Error::InvalidModel("lambda_k equals lambda_1".into()))
                } else {
                    Ok(term(lk) / (l1 - lk))
                }
            })
            .sum()
    };
    match kind {
        BoundKind::Minimax => Ok(c * sigma2 * (d - 1) as f64 / n),
        BoundKind::Thm3b => Ok(c * sigma2 * (d - 1) as f64 * n.ln() / n),
        BoundKind::Thm3a => {
            let s = tail_sum(&|lk| lk)?;
            Ok(c * (l1 / gap) * s * n.ln() / n)
        }
        BoundKind::Thm1 => {
            let ctx = context.ok_or_else(|| {
                Error::InvalidArgument("thm1 curve needs beta, n, N^o and epsilon".into())
            })?;
            let beta_hat = rescaled_stepsize(l1, model.lambda2(), ctx.beta);
            let power = beta_hat.powf(0.5 - 4.0 * ctx.epsilon);
            let s = tail_sum(&|lk| l1 * lk + l1 * l1 * power)?;
            let exponent = 2.0 * (ctx.step as f64 - ctx.warm_time as f64);
            Ok((1.0 - ctx.beta * gap).powf(exponent) + c * s * ctx.beta)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RestrictedMean {
    /// `E[X; A] = sum(x_i 1_A) / n`.
    pub restricted: f64,
    /// `E[X | A]`; `None` on an empty event.
    pub conditional: Option<f64>,
    pub frequency: f64,
}

pub fn restricted_mean(values: &[f64], mask: &[bool]) -> Result<RestrictedMean> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.len() != mask.len() {
        return Err(Error::DimensionMismatch {
            expected: values.len(),
            actual: mask.len(),
        });
    }
    let (sum, count) = values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
    let n = values.len() as f64;
    Ok(RestrictedMean {
        restricted: sum / n,
        conditional: (count > 0).then(|| sum / count as f64),
        frequency: count as f64 / n,
    })
}

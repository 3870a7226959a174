use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::linear_fit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least squares of `log(error)` against `log(N / log N)`.
pub fn fit_rate(rows: &[(u64, f64)]) -> Result<RateFit> {
    if rows.len() < 3 {
        return Err(Error::InsufficientPoints);
    }
    let mut xs = Vec::with_capacity(rows.len());
    let mut ys = Vec::with_capacity(rows.len());
    for &(n, err) in rows {
        if !(err > 0.0) || !err.is_finite() {
            return Err(Error::InvalidArgument(format!("error at N={n} must be positive, got {err}")));
        }
        if n < 2 {
            return Err(Error::DegenerateHorizon);
        }
        let n = n as f64;
        xs.push((n / n.ln()).ln());
        ys.push(err.ln());
    }
    let (slope, intercept, r2) = linear_fit(&xs, &ys);
    Ok(RateFit { slope, intercept, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_log_law() {
        let rows: Vec<(u64, f64)> = [1000u64, 4000, 16000, 64000]
            .iter()
            .map(|&n| (n, 7.0 * (n as f64).ln() / n as f64))
            .collect();
        let f = fit_rate(&rows).unwrap();
        assert!((f.slope + 1.0).abs() <= 1e-9);
        assert!((f.r2 - 1.0).abs() <= 1e-12);
        assert!((f.intercept - 7f64.ln()).abs() <= 1e-9);
    }

    #[test]
    fn inverse_law_is_slightly_steeper() {
        let rows: Vec<(u64, f64)> = [1000u64, 3000, 10_000, 30_000, 100_000]
            .iter()
            .map(|&n| (n, 5.0 / n as f64))
            .collect();
        let f = fit_rate(&rows).unwrap();
        assert!(f.slope > -1.15 && f.slope < -1.0, "{}", f.slope);
    }

    #[test]
    fn errors() {
        assert_eq!(fit_rate(&[(10, 1.0), (20, 0.5)]), Err(Error::InsufficientPoints));
        assert!(fit_rate(&[(10, 1.0), (20, 0.0), (30, 0.1)]).is_err());
        assert!(fit_rate(&[(10, 1.0), (20, -1.0), (30, 0.1)]).is_err());
    }
}

//! Seeded data streams `X = Sigma^{1/2} Z`, sphere sampling, and empirical
//! subgaussian / subexponential norm checks.

use rand::{Rng as _, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{project_to_sphere, SpectralModel, UnitVector};
use crate::rng::{self, Rng};
use crate::stats;

/// Distribution of the whitened vector `Z` (`E Z = 0`, `E Z Z^T = I`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    /// Independent `+-1` coordinates.
    Rademacher,
    /// `sqrt(d)` times a uniform point on the sphere.
    SphereScaled,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::Gaussian, NoiseKind::Rademacher, NoiseKind::SphereScaled];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Rademacher => "rademacher",
            NoiseKind::SphereScaled => "sphere_scaled",
        }
    }

    /// Overwrites `z` with a fresh draw.
    pub fn fill<R: RngCore + ?Sized>(self, rng: &mut R, z: &mut [f64]) {
        match self {
            NoiseKind::Gaussian => z.iter_mut().for_each(|v| *v = StandardNormal.sample(rng)),
            NoiseKind::Rademacher => z
                .iter_mut()
                .for_each(|v| *v = if rng.random::<bool>() { 1.0 } else { -1.0 }),
            NoiseKind::SphereScaled => loop {
                z.iter_mut().for_each(|v| *v = StandardNormal.sample(rng));
                let n = linalg::norm(z);
                if n > 0.0 {
                    linalg::scale((z.len() as f64).sqrt() / n, z);
                    break;
                }
            },
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NoiseKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown noise kind {s:?}")))
    }
}

/// Anything that can feed the online iteration one sample at a time.
///
/// `fill_next` writes the ambient sample `x` and its eigenbasis coordinates
/// `y = U^T x`.
pub trait SampleSource {
    fn dim(&self) -> usize;
    fn fill_next(&mut self, x: &mut [f64], y: &mut [f64]);

    fn next_sample(&mut self) -> Vec<f64> {
        let d = self.dim();
        let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
        self.fill_next(&mut x, &mut y);
        x
    }
}

/// I.i.d. stream of `Sigma^{1/2} Z` under a seeded generator.
#[derive(Debug, Clone)]
pub struct StreamSource<'a> {
    model: &'a SpectralModel,
    noise: NoiseKind,
    seed: u64,
    counter: u64,
    rng: Rng,
    z: Vec<f64>,
}

impl<'a> StreamSource<'a> {
    pub fn new(model: &'a SpectralModel, noise: NoiseKind, seed: u64) -> Self {
        StreamSource {
            model,
            noise,
            seed,
            counter: 0,
            rng: rng::rng_from_seed(seed),
            z: vec![0.0; model.dim()],
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn noise(&self) -> NoiseKind {
        self.noise
    }

    /// Number of samples drawn so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }
}

impl SampleSource for StreamSource<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn fill_next(&mut self, x: &mut [f64], y: &mut [f64]) {
        self.noise.fill(&mut self.rng, &mut self.z);
        self.counter += 1;
        if self.model.is_axis_aligned() {
            for ((xi, yi), (zi, l)) in x
                .iter_mut()
                .zip(y.iter_mut())
                .zip(self.z.iter().zip(self.model.eigenvalues()))
            {
                *xi = zi * l.sqrt();
                *yi = *xi;
            }
        } else {
            let (xs, ys) = self
                .model
                .apply_sqrt_cov(&self.z)
                .expect("noise buffer matches model dimension");
            x.copy_from_slice(&xs);
            y.copy_from_slice(&ys);
        }
    }
}

/// Replays a fixed list of samples cyclically.
///
/// Eigenbasis coordinates use `model` when given and equal `x` otherwise.
#[derive(Debug, Clone)]
pub struct ReplaySource<'a> {
    samples: Vec<Vec<f64>>,
    model: Option<&'a SpectralModel>,
    next: usize,
}

impl<'a> ReplaySource<'a> {
    pub fn new(samples: Vec<Vec<f64>>) -> Self {
        assert!(!samples.is_empty(), "replay source needs at least one sample");
        let d = samples[0].len();
        assert!(samples.iter().all(|s| s.len() == d), "ragged samples");
        ReplaySource {
            samples,
            model: None,
            next: 0,
        }
    }

    /// Repeats `x` forever.
    pub fn constant(x: Vec<f64>) -> Self {
        Self::new(vec![x])
    }

    pub fn with_model(mut self, model: &'a SpectralModel) -> Self {
        assert_eq!(model.dim(), self.samples[0].len());
        self.model = Some(model);
        self
    }
}

impl SampleSource for ReplaySource<'_> {
    fn dim(&self) -> usize {
        self.samples[0].len()
    }

    fn fill_next(&mut self, x: &mut [f64], y: &mut [f64]) {
        let s = &self.samples[self.next];
        self.next = (self.next + 1) % self.samples.len();
        x.copy_from_slice(s);
        match self.model {
            Some(m) => y.copy_from_slice(&m.to_eigen_coords(s).expect("dimension checked")),
            None => y.copy_from_slice(s),
        }
    }
}

/// Uniform point on `S^{d-1}` (normalized standard-normal vector).
pub fn uniform_sphere<R: RngCore + ?Sized>(rng: &mut R, d: usize) -> Result<UnitVector> {
    if d == 0 {
        return Err(Error::InvalidArgument("sphere dimension must be positive".into()));
    }
    let mut z = vec![0.0; d];
    loop {
        z.iter_mut().for_each(|v| *v = StandardNormal.sample(rng));
        if let Ok(u) = project_to_sphere(&z) {
            return Ok(u);
        }
    }
}

pub fn uniform_sphere_seeded(seed: u64, d: usize) -> Result<UnitVector> {
    uniform_sphere(&mut rng::rng_from_seed(seed), d)
}

/// `omega_{d-1} / omega_d = Gamma(d/2) / (sqrt(pi) Gamma((d-1)/2))`, where
/// `omega_m` is the surface area of `S^{m-1}`.
pub fn sphere_area_ratio(d: usize) -> f64 {
    let d = d as f64;
    (ln_gamma(d / 2.0) - ln_gamma((d - 1.0) / 2.0) - 0.5 * std::f64::consts::PI.ln()).exp()
}

/// Density of the first coordinate of a uniform point on `S^{d-1}`:
/// `(omega_{d-1} / omega_d) (1 - x^2)^{(d-3)/2}` on `[-1, 1]`.
pub fn sphere_marginal_density(d: usize, x: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidArgument("marginal density needs d >= 2".into()));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!("x = {x} outside [-1, 1]")));
    }
    let exponent = (d as f64 - 3.0) / 2.0;
    Ok(sphere_area_ratio(d) * (1.0 - x * x).powf(exponent))
}

/// CDF of the first sphere coordinate by quadrature of the density.
///
/// Integrates in the angle `x = sin t`, where the integrand
/// `c cos^{d-2} t` is smooth even when the density blows up at `+-1` (d = 2).
pub fn sphere_marginal_cdf(d: usize, x: f64) -> Result<f64> {
    sphere_marginal_density(d, x.clamp(-1.0, 1.0))?;
    let c = sphere_area_ratio(d);
    let power = d as i32 - 2;
    let upper = x.clamp(-1.0, 1.0).asin();
    let mass = stats::integrate(
        |t| c * t.cos().max(0.0).powi(power),
        -std::f64::consts::FRAC_PI_2,
        upper,
        1e-12,
    );
    Ok(mass.clamp(0.0, 1.0))
}

/// `{1, 1.5, 2, ..., 10}`.
pub fn default_p_grid() -> Vec<f64> {
    (0..=18).map(|i| 1.0 + 0.5 * i as f64).collect()
}

fn check_moment_inputs(samples: &[f64], p_grid: &[f64]) -> Result<()> {
    if samples.is_empty() || p_grid.is_empty() {
        return Err(Error::EmptyInput);
    }
    if p_grid.iter().any(|p| !(*p >= 1.0)) {
        return Err(Error::InvalidArgument("moment orders must be >= 1".into()));
    }
    Ok(())
}

/// `max_p p^{-1/power} (mean |Y|^p)^{1/p}`. Moments are taken of `|Y| / max|Y|`
/// so that high orders neither overflow nor break scale equivariance.
fn moment_norm(samples: &[f64], p_grid: &[f64], power: f64) -> Result<f64> {
    check_moment_inputs(samples, p_grid)?;
    let scale = linalg::max_abs(samples);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let n = samples.len() as f64;
    let best = p_grid
        .iter()
        .map(|&p| {
            let m = samples.iter().map(|y| (y.abs() / scale).powf(p)).sum::<f64>() / n;
            p.powf(-1.0 / power) * m.powf(1.0 / p)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(scale * best)
}

/// Empirical subgaussian norm `sup_p p^{-1/2} (E|Y|^p)^{1/p}` over `p_grid`.
pub fn psi2_norm_estimate(samples: &[f64], p_grid: &[f64]) -> Result<f64> {
    moment_norm(samples, p_grid, 2.0)
}

/// Empirical subexponential norm `sup_p p^{-1} (E|X|^p)^{1/p}` over `p_grid`.
pub fn psi1_norm_estimate(samples: &[f64], p_grid: &[f64]) -> Result<f64> {
    moment_norm(samples, p_grid, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailPoint {
    pub t: f64,
    pub empirical: f64,
    pub bound: f64,
    pub slack: f64,
    /// `bound + slack - empirical`; negative means violation.
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub psi2: f64,
    pub samples: usize,
    pub points: Vec<TailPoint>,
    pub passed: bool,
}

/// Compares `P(|Y| >= t)` against the subgaussian tail `2 exp(-t^2 / psi2^2)`
/// plus three binomial standard errors.
pub fn tail_check(samples: &[f64], psi2: f64, t_grid: &[f64]) -> Result<TailReport> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(psi2 > 0.0) {
        return Err(Error::InvalidArgument("psi2 must be positive".into()));
    }
    let n = samples.len() as f64;
    let points: Vec<TailPoint> = t_grid
        .iter()
        .map(|&t| {
            let hits = samples.iter().filter(|y| y.abs() >= t).count() as f64;
            let empirical = hits / n;
            let bound = 2.0 * (-t * t / (psi2 * psi2)).exp();
            let slack = 3.0 * (empirical * (1.0 - empirical) / n).sqrt();
            let margin = bound + slack - empirical;
            TailPoint {
                t,
                empirical,
                bound,
                slack,
                margin,
                passed: margin >= 0.0,
            }
        })
        .collect();
    Ok(TailReport {
        psi2,
        samples: samples.len(),
        passed: points.iter().all(|p| p.passed),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FourthMomentReport {
    pub estimate: f64,
    /// `16 |w|^4 (1 + 5 / sqrt(n))`.
    pub limit: f64,
    pub samples: usize,
    pub passed: bool,
}

/// Monte-Carlo estimate of `E (w^T Z)^4` against `16 |w|^4`.
pub fn fourth_moment_check<R: RngCore + ?Sized>(
    rng: &mut R,
    noise: NoiseKind,
    w: &[f64],
    n: usize,
) -> Result<FourthMomentReport> {
    if n < 10_000 {
        return Err(Error::InvalidArgument("fourth moment check needs n >= 10^4".into()));
    }
    if w.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut z = vec![0.0; w.len()];
    let mut acc = 0.0;
    for _ in 0..n {
        noise.fill(rng, &mut z);
        let p = linalg::dot(w, &z);
        acc += p * p * p * p;
    }
    let estimate = acc / n as f64;
    let w2 = linalg::norm_sq(w);
    let limit = 16.0 * w2 * w2 * (1.0 + 5.0 / (n as f64).sqrt());
    Ok(FourthMomentReport {
        estimate,
        limit,
        samples: n,
        passed: estimate <= limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BasisSpec;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Cauchy, Exp};

    fn sample_covariance(src: &mut impl SampleSource, n: usize) -> Vec<f64> {
        let d = src.dim();
        let mut cov = vec![0.0; d * d];
        let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
        for _ in 0..n {
            src.fill_next(&mut x, &mut y);
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] += x[i] * x[j];
                }
            }
        }
        cov.iter().map(|c| c / n as f64).collect()
    }

    #[test]
    fn sqrt_cov_examples() {
        let m = SpectralModel::diagonal(vec![4.0, 1.0]).unwrap();
        let (x, y) = m.apply_sqrt_cov(&[1.0, 1.0]).unwrap();
        assert_eq!(x, vec![2.0, 1.0]);
        assert_eq!(y, x);
        let m = SpectralModel::new(vec![1.0 + 1e-9, 1.0, 1.0], BasisSpec::Seeded(5)).unwrap();
        let z = [0.3, -1.2, 0.8];
        let (x, _) = m.apply_sqrt_cov(&z).unwrap();
        for (a, b) in x.iter().zip(z) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn diagonal_covariance_statistics() {
        let m = SpectralModel::diagonal(vec![2.0, 1.0]).unwrap();
        let mut src = StreamSource::new(&m, NoiseKind::Gaussian, 17);
        let cov = sample_covariance(&mut src, 100_000);
        assert_abs_diff_eq!(cov[0], 2.0, epsilon = 0.05);
        assert_abs_diff_eq!(cov[3], 1.0, epsilon = 0.05);
        assert_abs_diff_eq!(cov[1], 0.0, epsilon = 0.05);
        assert_eq!(src.counter(), 100_000);
    }

    #[test]
    fn every_noise_kind_reproduces_the_covariance() {
        let m = SpectralModel::new(vec![3.0, 1.5, 1.0, 0.5], BasisSpec::Seeded(21)).unwrap();
        let sigma = m.covariance();
        for (i, noise) in NoiseKind::ALL.into_iter().enumerate() {
            let mut src = StreamSource::new(&m, noise, 100 + i as u64);
            let cov = sample_covariance(&mut src, 100_000);
            for r in 0..4 {
                for c in 0..4 {
                    let dev = (cov[r * 4 + c] - sigma[(r, c)]).abs();
                    assert!(dev <= 0.05 * m.lambda1(), "{noise:?} ({r},{c}) dev {dev}");
                }
            }
        }
    }

    #[test]
    fn whitened_noise_has_unit_component_variance() {
        let n = 100_000;
        for noise in NoiseKind::ALL {
            let mut rng = rng::rng_from_seed(3);
            let mut z = vec![0.0; 5];
            let mut second = [[0.0; 5]; 5];
            for _ in 0..n {
                noise.fill(&mut rng, &mut z);
                for i in 0..5 {
                    for j in 0..5 {
                        second[i][j] += z[i] * z[j] / n as f64;
                    }
                }
            }
            for (i, row) in second.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((v - target).abs() <= 5.0 / (n as f64).sqrt(), "{noise:?}");
                }
            }
        }
    }

    #[test]
    fn eigen_coordinates_match_rotation() {
        let m = SpectralModel::new(vec![3.0, 2.0, 1.0], BasisSpec::Seeded(8)).unwrap();
        let mut src = StreamSource::new(&m, NoiseKind::Rademacher, 1);
        let (mut x, mut y) = (vec![0.0; 3], vec![0.0; 3]);
        src.fill_next(&mut x, &mut y);
        let expected = m.to_eigen_coords(&x).unwrap();
        for (a, b) in y.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn streams_are_reproducible() {
        let m = SpectralModel::new(vec![2.0, 1.0, 0.5], BasisSpec::Seeded(1)).unwrap();
        for noise in NoiseKind::ALL {
            let mut a = StreamSource::new(&m, noise, 99);
            let mut b = StreamSource::new(&m, noise, 99);
            let mut c = StreamSource::new(&m, noise, 100);
            let mut differs = false;
            for _ in 0..1000 {
                let (xa, xb, xc) = (a.next_sample(), b.next_sample(), c.next_sample());
                assert_eq!(xa, xb);
                differs |= xa != xc;
            }
            assert!(differs);
        }
    }

    #[test]
    fn sphere_sampling() {
        assert!(uniform_sphere_seeded(0, 0).is_err());
        let mut rng = rng::rng_from_seed(42);
        for d in [1, 2, 7, 50] {
            let u = uniform_sphere(&mut rng, d).unwrap();
            assert!((linalg::norm(u.as_slice()) - 1.0).abs() <= 1e-12);
        }
        // d = 1: a fair coin over {-1, +1}; chi-square with one degree of freedom.
        let n = 10_000;
        let plus = (0..n)
            .filter(|_| uniform_sphere(&mut rng, 1).unwrap().as_slice()[0] > 0.0)
            .count() as f64;
        let expected = n as f64 / 2.0;
        let chi2 = 2.0 * (plus - expected).powi(2) / expected;
        assert!(chi2 < 6.635, "chi2 = {chi2}"); // p > 0.01
    }

    #[test]
    fn sphere_first_coordinate_is_uniform_in_three_dimensions() {
        let mut rng = rng::rng_from_seed(7);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| uniform_sphere(&mut rng, 3).unwrap().as_slice()[0])
            .collect();
        let ks = stats::ks_distance(&xs, |x| (x + 1.0) / 2.0).unwrap();
        assert!(ks < 0.02, "ks = {ks}");
    }

    #[test]
    fn sphere_angle_is_uniform_in_two_dimensions() {
        let mut rng = rng::rng_from_seed(8);
        let angles: Vec<f64> = (0..10_000)
            .map(|_| {
                let u = uniform_sphere(&mut rng, 2).unwrap();
                u.as_slice()[1].atan2(u.as_slice()[0])
            })
            .collect();
        let pi = std::f64::consts::PI;
        let ks = stats::ks_distance(&angles, |a| (a + pi) / (2.0 * pi)).unwrap();
        assert!(ks < 0.02, "ks = {ks}");
    }

    #[test]
    fn marginal_density_examples() {
        for x in [-0.9, 0.0, 0.3, 0.99] {
            assert_abs_diff_eq!(sphere_marginal_density(3, x).unwrap(), 0.5, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(sphere_marginal_density(3, 1.0).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(sphere_marginal_density(3, -1.0).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(
            sphere_marginal_density(2, 0.0).unwrap(),
            1.0 / std::f64::consts::PI,
            epsilon = 1e-14
        );
        assert!(sphere_marginal_density(1, 0.0).is_err());
        assert!(sphere_marginal_density(4, 1.5).is_err());
    }

    #[test]
    fn marginal_density_integrates_to_one() {
        for d in [2, 3, 4, 5, 10, 20, 100] {
            let total = sphere_marginal_cdf(d, 1.0).unwrap();
            assert!((total - 1.0).abs() <= 1e-8, "d = {d}: {total}");
        }
        // Direct quadrature of the density itself where it is bounded.
        for d in [3, 5, 20] {
            let total = stats::integrate(|x| sphere_marginal_density(d, x).unwrap(), -1.0, 1.0, 1e-12);
            assert!((total - 1.0).abs() <= 1e-8, "d = {d}: {total}");
        }
        assert_abs_diff_eq!(sphere_marginal_cdf(3, 0.2).unwrap(), 0.6, epsilon = 1e-10);
        assert_abs_diff_eq!(sphere_marginal_cdf(7, 0.0).unwrap(), 0.5, epsilon = 1e-10);
    }

    #[test]
    fn psi_norm_examples() {
        let grid = default_p_grid();
        assert_eq!(psi2_norm_estimate(&[0.0; 2000], &grid).unwrap(), 0.0);
        assert_eq!(psi1_norm_estimate(&[0.0; 2000], &grid).unwrap(), 0.0);
        let rad: Vec<f64> = (0..2000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_abs_diff_eq!(psi2_norm_estimate(&rad, &grid).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(psi1_norm_estimate(&rad, &grid).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(psi2_norm_estimate(&[], &grid), Err(Error::EmptyInput));
        assert_eq!(psi2_norm_estimate(&rad, &[]), Err(Error::EmptyInput));
        assert!(psi2_norm_estimate(&rad, &[0.5]).is_err());
    }

    #[test]
    fn psi2_of_standard_normal() {
        let mut rng = rng::rng_from_seed(11);
        let ys: Vec<f64> = (0..1_000_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let est = psi2_norm_estimate(&ys, &default_p_grid()).unwrap();
        assert!((0.75..=0.85).contains(&est), "psi2 = {est}");
    }

    #[test]
    fn psi1_of_centered_exponential() {
        let mut rng = rng::rng_from_seed(12);
        let exp = Exp::new(1.0).unwrap();
        let xs: Vec<f64> = (0..1_000_000).map(|_| exp.sample(&mut rng) - 1.0).collect();
        let grid: Vec<f64> = (1..=10).map(f64::from).collect();
        let est = psi1_norm_estimate(&xs, &grid).unwrap();
        // Brute force: E|X - 1| = 2/e at p = 1 dominates the sup.
        assert!((0.3..=1.5).contains(&est), "psi1 = {est}");
        assert_abs_diff_eq!(est, 2.0 / std::f64::consts::E, epsilon = 0.01);
    }

    #[test]
    fn psi2_scale_equivariance() {
        let mut rng = rng::rng_from_seed(13);
        let ys: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let grid = default_p_grid();
        let base = psi2_norm_estimate(&ys, &grid).unwrap();
        for c in [0.25, 4.0, -2.0, 1024.0] {
            let scaled: Vec<f64> = ys.iter().map(|y| c * y).collect();
            assert_eq!(psi2_norm_estimate(&scaled, &grid).unwrap(), c.abs() * base);
        }
        let scaled: Vec<f64> = ys.iter().map(|y| -3.7 * y).collect();
        let est = psi2_norm_estimate(&scaled, &grid).unwrap();
        assert!((est - 3.7 * base).abs() <= 1e-12 * est);
    }

    #[test]
    fn tail_check_zero_and_cauchy() {
        let zero = tail_check(&[0.0; 1000], 0.5, &[0.1, 1.0, 5.0]).unwrap();
        assert!(zero.passed);
        let mut rng = rng::rng_from_seed(14);
        let cauchy = Cauchy::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..1_000_000).map(|_| cauchy.sample(&mut rng)).collect();
        let r = tail_check(&xs, 1.0, &[10.0]).unwrap();
        assert!(!r.passed);
        assert!(tail_check(&xs, 0.0, &[1.0]).is_err());
    }

    #[test]
    fn tail_check_gaussian_matches_the_exact_tail() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let normal = Normal::standard();
        let mut rng = rng::rng_from_seed(15);
        let ys: Vec<f64> = (0..1_000_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = tail_check(&ys, 0.8, &[1.0, 2.0, 3.0]).unwrap();
        for p in &r.points {
            let exact = 2.0 * normal.sf(p.t);
            assert!((p.empirical - exact).abs() <= 4.0 * (exact / 1e6).sqrt() + 1e-6);
            // The exact Gaussian tail sits above 2 exp(-t^2 / 0.64) for t >= 2,
            // so the check can only pass where the bound dominates.
            assert_eq!(p.passed, exact <= p.bound, "t = {}", p.t);
        }
        assert!(r.points[0].passed);
        assert!(!r.points[1].passed && !r.points[2].passed);
    }

    #[test]
    fn fourth_moment_examples() {
        let mut rng = rng::rng_from_seed(16);
        let g = fourth_moment_check(&mut rng, NoiseKind::Gaussian, &[1.0, 0.0, 0.0], 1_000_000).unwrap();
        assert!(g.passed);
        assert!((g.estimate - 3.0).abs() <= 0.15, "{}", g.estimate);
        let r = fourth_moment_check(&mut rng, NoiseKind::Rademacher, &[1.0, 0.0], 10_000).unwrap();
        assert!(r.passed && r.estimate == 1.0);
        let z = fourth_moment_check(&mut rng, NoiseKind::Gaussian, &[0.0, 0.0], 10_000).unwrap();
        assert!(z.passed && z.estimate == 0.0);
        assert!(fourth_moment_check(&mut rng, NoiseKind::Gaussian, &[1.0], 100).is_err());
    }

    #[test]
    fn replay_source_cycles() {
        let mut src = ReplaySource::new(vec![vec![1.0, 0.0], vec![0.0, 2.0]]);
        assert_eq!(src.next_sample(), vec![1.0, 0.0]);
        assert_eq!(src.next_sample(), vec![0.0, 2.0]);
        assert_eq!(src.next_sample(), vec![1.0, 0.0]);
    }
}

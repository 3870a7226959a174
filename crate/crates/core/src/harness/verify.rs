//! Fixed-seed property suites behind the `verify` subcommand.

use rand::Rng as _;
use rand_distr::{Cauchy, Distribution, StandardNormal};
use serde::Serialize;

use crate::diagnostics::{
    classify_region, increment_decomposition, ratio_increment_decomposition, remainder_second_order, stopping_times,
    Recorder, RecorderConfig, AUX_THRESHOLD, C_STAR,
};
use crate::error::{Error, Result};
use crate::model::{angle_report, angle_to_first_axis, coordinate_ratios, BasisSpec, SpectralModel};
use crate::oja::{product_oracle, run_stream, OjaState, StepsizeSchedule};
use crate::oracle::restricted_mean;
use crate::rng::{derive_seed, rng_from_seed};
use crate::sampling::{
    default_p_grid, fourth_moment_check, psi2_norm_estimate, sphere_marginal_cdf, sphere_marginal_density,
    tail_check, uniform_sphere, NoiseKind, ReplaySource, SampleSource, StreamSource,
};
use crate::stats::ks_distance;

pub const SUITES: [&str; 6] = [
    "invariants",
    "oracle_equivalence",
    "remainder_scaling",
    "init_lemma",
    "density",
    "tail",
];

const SUITE_SEED: u64 = 0x5EED_2024;

/// A measured value against an interval; `margin < 0` means failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    pub margin: f64,
    pub passed: bool,
}

impl Check {
    pub fn within(name: impl Into<String>, value: f64, lo: Option<f64>, hi: Option<f64>) -> Check {
        let below = lo.map_or(f64::INFINITY, |lo| value - lo);
        let above = hi.map_or(f64::INFINITY, |hi| hi - value);
        let margin = below.min(above);
        Check {
            name: name.into(),
            value,
            lo,
            hi,
            margin,
            passed: margin >= 0.0,
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, hi: f64) -> Check {
        Check::within(name, value, None, Some(hi))
    }

    pub fn at_least(name: impl Into<String>, value: f64, lo: f64) -> Check {
        Check::within(name, value, Some(lo), None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    fn new(suite: &str, checks: Vec<Check>) -> Self {
        VerifyReport {
            suite: suite.to_string(),
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

pub fn verify(suite: &str) -> Result<VerifyReport> {
    match suite {
        "invariants" => Ok(invariants()),
        "oracle_equivalence" => Ok(oracle_equivalence(100)),
        "remainder_scaling" => Ok(remainder_scaling(50)),
        "init_lemma" => Ok(init_lemma(100_000)),
        "density" => Ok(density(10_000)),
        "tail" => Ok(tail()),
        other => Err(Error::UnknownSuite(other.to_string())),
    }
}

pub fn invariants() -> VerifyReport {
    let mut rng = rng_from_seed(SUITE_SEED);
    let mut checks = Vec::new();

    let model = SpectralModel::spiked(8, 2.0, 1.0, BasisSpec::Seeded(SUITE_SEED)).expect("valid model");
    let mut norm_dev: f64 = 0.0;
    let mut ratio_dev: f64 = 0.0;
    let mut mismatches = 0u32;
    struct Norms<'a> {
        model: &'a SpectralModel,
        norm_dev: &'a mut f64,
        ratio_dev: &'a mut f64,
    }
    impl crate::oja::StepObserver for Norms<'_> {
        fn observe(&mut self, _: &crate::oja::StepInfo, u: &crate::model::UnitVector, _: &[f64]) {
            let n: f64 = u.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
            *self.norm_dev = self.norm_dev.max((n - 1.0).abs());
            let v = self.model.to_eigen_coords(u.as_slice()).expect("dimension");
            if v[0].abs() >= AUX_THRESHOLD {
                let sum: f64 = coordinate_ratios(&v).expect("off equator").iter().map(|r| r * r).sum();
                let tan2 = angle_to_first_axis(&v).tan2.value();
                *self.ratio_dev = self.ratio_dev.max((sum - tan2).abs() / (1.0 + tan2));
            }
        }
    }
    for r in 0..5u64 {
        let seed = derive_seed(SUITE_SEED, r);
        let u0 = uniform_sphere(&mut rng, 8).expect("d > 0");
        let mut state = OjaState::new(u0.clone(), StepsizeSchedule::constant(0.02).expect("beta > 0"));
        let mut src = StreamSource::new(&model, NoiseKind::ALL[r as usize % 3], seed);
        let mut obs = Norms {
            model: &model,
            norm_dev: &mut norm_dev,
            ratio_dev: &mut ratio_dev,
        };
        run_stream(&mut state, &mut src, 2000, &mut obs).expect("run");

        let mut state = OjaState::new(u0, StepsizeSchedule::constant(0.05).expect("beta > 0"));
        let mut src = StreamSource::new(&model, NoiseKind::Gaussian, seed);
        let mut rec = Recorder::new(
            Some(&model),
            RecorderConfig {
                stride: 1,
                threshold: Some(6.0),
                excursion_delay: None,
            },
        );
        run_stream(&mut state, &mut src, 500, &mut rec).expect("run");
        let streamed = rec.stopping_times();
        if stopping_times(&rec.into_trajectory(), 6.0).ok() != Some(streamed) {
            mismatches += 1;
        }
    }
    checks.push(Check::at_most("unit_norm_max_deviation", norm_dev, 1e-12));
    checks.push(Check::at_most("tan2_ratio_identity_max_deviation", ratio_dev, 1e-10));
    checks.push(Check::at_most("stopping_time_scan_mismatches", mismatches as f64, 0.0));

    let mut angle_dev: f64 = 0.0;
    let mut tan2_dev: f64 = 0.0;
    let mut rescale_dev: f64 = 0.0;
    let mut partition_violations = 0u32;
    let principal = model.principal();
    for _ in 0..1000 {
        let u = uniform_sphere(&mut rng, 8).expect("d > 0");
        let w = uniform_sphere(&mut rng, 8).expect("d > 0");
        let a = angle_report(&u, &w);
        angle_dev = angle_dev.max((a.sin2 + a.cos * a.cos - 1.0).abs());
        if let (Some(t), true) = (a.tan2.finite(), a.sin2 < 0.999) {
            tan2_dev = tan2_dev.max((t - a.sin2 / (1.0 - a.sin2)).abs() / (1.0 + t));
        }
        let v = model.rescale_to_eigenbasis(&u).expect("dimension");
        let direct = angle_report(&u, &principal).sin2;
        rescale_dev = rescale_dev.max((direct - angle_to_first_axis(v.as_slice()).sin2).abs());
        let tag = classify_region(&v);
        if tag.in_s1 == tag.in_s2 || (tag.in_s2 && !tag.in_s3) {
            partition_violations += 1;
        }
    }
    checks.push(Check::at_most("angle_identity_max_deviation", angle_dev, 1e-12));
    checks.push(Check::at_most("tan2_sin2_identity_max_deviation", tan2_dev, 1e-9));
    checks.push(Check::at_most("rescaling_angle_max_deviation", rescale_dev, 1e-12));
    checks.push(Check::at_most("region_partition_violations", partition_violations as f64, 0.0));

    let values: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..5.0)).collect();
    let mask: Vec<bool> = (0..200).map(|_| rng.random::<bool>()).collect();
    let rm = restricted_mean(&values, &mask).expect("nonempty");
    let identity_dev = (rm.restricted - rm.frequency * rm.conditional.unwrap_or(0.0)).abs();
    checks.push(Check::at_most("restricted_mean_identity_deviation", identity_dev, 1e-12));

    VerifyReport::new("invariants", checks)
}

/// Largest coordinate gap between the online iteration and the product
/// oracle over `cases` seeded cases with `n <= 1000`, `d <= 20`, `beta <= 0.1`.
pub fn oracle_equivalence_max_diff(cases: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..cases {
        let seed = derive_seed(SUITE_SEED ^ 0xE0, i);
        let mut rng = rng_from_seed(seed);
        let d = rng.random_range(2..=20);
        let n = rng.random_range(1..=1000);
        let beta = rng.random_range(1e-4..=0.1);
        let top = rng.random_range(1.5..4.0);
        let model = SpectralModel::spiked(d, top, 1.0, BasisSpec::Seeded(seed)).expect("valid model");
        let mut src = StreamSource::new(&model, NoiseKind::ALL[(i % 3) as usize], seed);
        let samples: Vec<Vec<f64>> = (0..n).map(|_| src.next_sample()).collect();
        let u0 = uniform_sphere(&mut rng, d).expect("d > 0");
        let mut state = OjaState::new(u0.clone(), StepsizeSchedule::constant(beta).expect("beta > 0"));
        run_stream(&mut state, &mut ReplaySource::new(samples.clone()), n, &mut ()).expect("run");
        let oracle = product_oracle(&u0, &samples, beta).expect("no overflow at this scale");
        for (a, b) in state.iterate().as_slice().iter().zip(oracle.as_slice()) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

pub fn oracle_equivalence(cases: u64) -> VerifyReport {
    let diff = oracle_equivalence_max_diff(cases);
    VerifyReport::new(
        "oracle_equivalence",
        vec![Check::at_most("max_coordinate_difference", diff, 1e-8)],
    )
}

/// A point `v` (with `|v_1| >= 1/3`), sample `y` and zero-based coordinate `k >= 1`.
pub type RemainderFixture = (Vec<f64>, Vec<f64>, usize);

/// Seeded fixtures where `v . y != 0` and both second-order remainder
/// coefficients are at least `0.05` in magnitude.
pub fn generic_remainder_fixtures(seed: u64, count: usize) -> Vec<RemainderFixture> {
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let d = rng.random_range(2..=10);
        let v = uniform_sphere(&mut rng, d).expect("d > 0").into_vec();
        if v[0].abs() < AUX_THRESHOLD {
            continue;
        }
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let k = rng.random_range(1..d);
        let vy: f64 = v.iter().zip(&y).map(|(a, b)| a * b).sum();
        let Ok((c_inc, c_ratio)) = remainder_second_order(&v, &y, k) else {
            continue;
        };
        if vy.abs() < 0.1 || c_inc.abs() < 0.05 || c_ratio.abs() < 0.05 {
            continue;
        }
        out.push((v, y, k));
    }
    out
}

/// `|remainder(beta / 2)| / |remainder(beta)|` for both decompositions.
pub fn remainder_ratios(fixtures: &[RemainderFixture], beta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut inc = Vec::with_capacity(fixtures.len());
    let mut ratio = Vec::with_capacity(fixtures.len());
    for (v, y, k) in fixtures {
        let a = increment_decomposition(v, y, beta, *k)?.remainder;
        let b = increment_decomposition(v, y, beta / 2.0, *k)?.remainder;
        inc.push(b.abs() / a.abs());
        let a = ratio_increment_decomposition(v, y, beta, *k)?.remainder;
        let b = ratio_increment_decomposition(v, y, beta / 2.0, *k)?.remainder;
        ratio.push(b.abs() / a.abs());
    }
    Ok((inc, ratio))
}

pub fn remainder_scaling(count: usize) -> VerifyReport {
    let fixtures = generic_remainder_fixtures(SUITE_SEED ^ 0xA1, count);
    let (inc, ratio) = remainder_ratios(&fixtures, 1e-3).expect("fixtures are valid");
    let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    VerifyReport::new(
        "remainder_scaling",
        vec![
            Check::within("increment_ratio_min", min(&inc), Some(0.2), Some(0.3)),
            Check::within("increment_ratio_max", max(&inc), Some(0.2), Some(0.3)),
            Check::within("ratio_increment_ratio_min", min(&ratio), Some(0.2), Some(0.3)),
            Check::within("ratio_increment_ratio_max", max(&ratio), Some(0.2), Some(0.3)),
        ],
    )
}

/// Empirical `P(tan^2 theta_0 > C* delta^{-2} d)` for a uniform start.
pub fn init_exceedance(d: usize, draws: usize, deltas: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let mut counts = vec![0usize; deltas.len()];
    for _ in 0..draws {
        let u = uniform_sphere(&mut rng, d).expect("d > 0");
        let tan2 = angle_to_first_axis(u.as_slice()).tan2.value();
        for (c, delta) in counts.iter_mut().zip(deltas) {
            if tan2 > C_STAR / (delta * delta) * d as f64 {
                *c += 1;
            }
        }
    }
    counts.iter().map(|&c| c as f64 / draws as f64).collect()
}

pub fn init_lemma(draws: usize) -> VerifyReport {
    let deltas = [0.1, 0.2];
    let mut checks = Vec::new();
    for d in [10usize, 100] {
        let freq = init_exceedance(d, draws, &deltas, derive_seed(SUITE_SEED ^ 0x1D, d as u64));
        for (delta, f) in deltas.iter().zip(freq) {
            checks.push(Check::at_most(format!("d{d}_delta{delta}_exceedance"), f, *delta));
        }
    }
    VerifyReport::new("init_lemma", checks)
}

/// KS distance between first coordinates of uniform sphere draws and the
/// marginal CDF.
pub fn sphere_marginal_ks(d: usize, draws: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let xs: Vec<f64> = (0..draws)
        .map(|_| uniform_sphere(&mut rng, d).expect("d > 0").as_slice()[0])
        .collect();
    ks_distance(&xs, |x| sphere_marginal_cdf(d, x).expect("d >= 2")).expect("nonempty")
}

pub fn density(draws: usize) -> VerifyReport {
    let mut checks = Vec::new();
    for d in [3usize, 5, 20] {
        let ks = sphere_marginal_ks(d, draws, derive_seed(SUITE_SEED ^ 0xD5, d as u64));
        checks.push(Check::at_most(format!("d{d}_ks_distance"), ks, 0.02));
    }
    let dev = (-99..=99)
        .map(|i| (sphere_marginal_density(3, i as f64 / 100.0).expect("d >= 2") - 0.5).abs())
        .fold(0.0, f64::max);
    checks.push(Check::at_most("d3_density_flat_deviation", dev, 1e-12));
    VerifyReport::new("density", checks)
}

pub fn standard_normal_samples(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

pub fn cauchy_samples(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let c = Cauchy::new(0.0, 1.0).expect("valid scale");
    (0..n).map(|_| c.sample(&mut rng)).collect()
}

pub fn tail() -> VerifyReport {
    let mut checks = Vec::new();
    let gauss = standard_normal_samples(1_000_000, SUITE_SEED ^ 0x7A);
    let psi2 = psi2_norm_estimate(&gauss, &default_p_grid()).expect("nonempty");
    checks.push(Check::within("gaussian_psi2_estimate", psi2, Some(0.75), Some(0.85)));

    let e1 = [1.0, 0.0, 0.0, 0.0];
    for (noise, target) in [(NoiseKind::Gaussian, 3.0), (NoiseKind::Rademacher, 1.0)] {
        let mut rng = rng_from_seed(derive_seed(SUITE_SEED ^ 0x4A, target as u64));
        let r = fourth_moment_check(&mut rng, noise, &e1, 1_000_000).expect("n >= 10^4");
        let name = noise.name();
        checks.push(Check::at_most(format!("{name}_fourth_moment_vs_limit"), r.estimate, r.limit));
        checks.push(Check::within(
            format!("{name}_fourth_moment_estimate"),
            r.estimate,
            Some(0.95 * target),
            Some(1.05 * target),
        ));
    }

    let t_grid = [1.0, 2.0, 3.0];
    let report = tail_check(&gauss, 0.8, &t_grid).expect("nonempty");
    for p in &report.points {
        checks.push(Check::at_least(format!("gaussian_tail_t{}_margin", p.t), p.margin, 0.0));
    }
    let cauchy = cauchy_samples(1_000_000, SUITE_SEED ^ 0xCA);
    let report = tail_check(&cauchy, 0.8, &t_grid).expect("nonempty");
    let worst = report.points.iter().map(|p| p.margin).fold(f64::INFINITY, f64::min);
    checks.push(Check::at_most("cauchy_tail_worst_margin", worst, 0.0));
    VerifyReport::new("tail", checks)
}

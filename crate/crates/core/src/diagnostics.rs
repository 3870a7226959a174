//! Computable pieces of the convergence analysis.
//!
//! All quantities live in eigenbasis coordinates `v = U^T u`, `y = U^T x`,
//! where the principal component is `e_1`. The sphere splits into the cold
//! region `S1 = {|v_1| < 1/sqrt 2}` and the warm region `S2 = {|v_1| >= 1/sqrt 2}`;
//! the auxiliary region `S3 = {|v_1| >= 1/3}` is where the ratios
//! `U_k = v_k / v_1` stay well conditioned.

use std::borrow::Cow;
use std::f64::consts::FRAC_1_SQRT_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{angle_to_first_axis, SpectralModel, Tan2, UnitVector, EQUATOR_TOL};
use crate::oja::{StepInfo, StepObserver};

pub const WARM_THRESHOLD: f64 = FRAC_1_SQRT_2;
pub const AUX_THRESHOLD: f64 = 1.0 / 3.0;
/// Default `epsilon`, inside the admissible `(0, 1/8)`.
pub const DEFAULT_EPSILON: f64 = 0.1;
/// Approximate value of the uniform-initialization constant `C*`.
pub const C_STAR: f64 = 2.56;
pub const DEFAULT_DELTA: f64 = 0.25;

/// `c* = C* delta^{-2}` for the default `delta`.
pub fn default_c_star() -> f64 {
    C_STAR / (DEFAULT_DELTA * DEFAULT_DELTA)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegionTag {
    pub in_s1: bool,
    pub in_s2: bool,
    pub in_s3: bool,
}

impl RegionTag {
    pub fn label(&self) -> &'static str {
        match (self.in_s2, self.in_s3) {
            (true, _) => "S2+S3",
            (false, true) => "S1+S3",
            (false, false) => "S1",
        }
    }
}

pub fn classify_abs(v1_abs: f64) -> RegionTag {
    let in_s2 = v1_abs >= WARM_THRESHOLD;
    RegionTag {
        in_s1: !in_s2,
        in_s2,
        in_s3: v1_abs >= AUX_THRESHOLD,
    }
}

/// Region of an eigenbasis vector.
pub fn classify_region(v: &UnitVector) -> RegionTag {
    classify_abs(v.as_slice()[0].abs())
}

/// First indices at which the defining predicates hold; `None` is "never".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct StoppingTimes {
    /// First exit from `S3` (`n >= 0`).
    pub n_w: Option<u64>,
    /// First `max(max_k |Y_k|, |v_prev . Y|) >= M^{1/2}` (`n >= 1`).
    pub n_m: Option<u64>,
    /// First entry into `S2` (`n >= 0`).
    pub n_c: Option<u64>,
}

/// Streaming version of [`stopping_times`], fed one step at a time.
#[derive(Debug, Clone)]
pub struct StoppingTimeDetector {
    sqrt_threshold: Option<f64>,
    times: StoppingTimes,
}

impl StoppingTimeDetector {
    /// `threshold` is `M`; without it `n_m` is never set.
    pub fn new(threshold: Option<f64>) -> Self {
        StoppingTimeDetector {
            sqrt_threshold: threshold.map(f64::sqrt),
            times: StoppingTimes::default(),
        }
    }

    pub fn observe_iterate(&mut self, step: u64, v1_abs: f64) {
        if self.times.n_w.is_none() && v1_abs < AUX_THRESHOLD {
            self.times.n_w = Some(step);
        }
        if self.times.n_c.is_none() && v1_abs >= WARM_THRESHOLD {
            self.times.n_c = Some(step);
        }
    }

    pub fn observe_sample(&mut self, step: u64, sample_max: f64) {
        if let (None, Some(root)) = (self.times.n_m, self.sqrt_threshold) {
            if step >= 1 && sample_max >= root {
                self.times.n_m = Some(step);
            }
        }
    }

    pub fn times(&self) -> StoppingTimes {
        self.times
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub step: u64,
    pub sin2: f64,
    pub tan2: Tan2,
    pub v1_abs: f64,
    pub region: RegionTag,
    /// `max(max_k |Y_k|, |v_prev . Y|)` for the sample that produced this
    /// iterate; absent at step 0.
    pub sample_max: Option<f64>,
    /// Cumulative hit flags for `(n_w, n_m, n_c)` up to this step.
    pub hits: [bool; 3],
}

impl TrajectoryPoint {
    pub fn from_eigen(step: u64, v: &[f64], sample_max: Option<f64>) -> Self {
        let angle = angle_to_first_axis(v);
        let v1_abs = v[0].abs();
        TrajectoryPoint {
            step,
            sin2: angle.sin2,
            tan2: angle.tan2,
            v1_abs,
            region: classify_abs(v1_abs),
            sample_max,
            hits: [false; 3],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn from_points(points: Vec<TrajectoryPoint>) -> Self {
        Trajectory { points }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// CSV with columns `step,sin2,tan2,v1_abs,region,n_w_hit,n_m_hit,n_c_hit`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "sin2", "tan2", "v1_abs", "region", "n_w_hit", "n_m_hit", "n_c_hit"])?;
        for p in &self.points {
            w.write_record([
                p.step.to_string(),
                p.sin2.to_string(),
                p.tan2.to_string(),
                p.v1_abs.to_string(),
                p.region.label().to_string(),
                u8::from(p.hits[0]).to_string(),
                u8::from(p.hits[1]).to_string(),
                u8::from(p.hits[2]).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Stopping times by a direct scan of a recorded trajectory.
///
/// Exact only when the trajectory was recorded at every step.
pub fn stopping_times(traj: &Trajectory, threshold: f64) -> Result<StoppingTimes> {
    let root = threshold.sqrt();
    let mut times = StoppingTimes::default();
    for p in &traj.points {
        if p.step >= 1 && p.sample_max.is_none() {
            return Err(Error::MissingDiagnostics);
        }
    }
    times.n_w = traj.points.iter().find(|p| p.v1_abs < AUX_THRESHOLD).map(|p| p.step);
    times.n_c = traj.points.iter().find(|p| p.v1_abs >= WARM_THRESHOLD).map(|p| p.step);
    times.n_m = traj
        .points
        .iter()
        .find(|p| p.step >= 1 && p.sample_max.is_some_and(|m| m >= root))
        .map(|p| p.step);
    Ok(times)
}

/// Recording stride: every step up to 10^4 steps, then `ceil(n / 10^4)`.
pub fn default_stride(n_steps: u64) -> u64 {
    n_steps.div_ceil(10_000).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecorderConfig {
    /// Record every `stride`-th iterate (and always the last); `0` disables
    /// the trajectory while keeping stopping-time detection.
    pub stride: u64,
    /// Magnitude threshold `M` for `n_m`.
    pub threshold: Option<f64>,
    /// Steps after `n_c` before the ratio excursion starts being tracked.
    pub excursion_delay: Option<u64>,
}

impl Default for RecorderConfig {
    fn default() -> Self {
        RecorderConfig {
            stride: 1,
            threshold: None,
            excursion_delay: None,
        }
    }
}

/// Step observer that tracks stopping times at full resolution and keeps a
/// (possibly strided) trajectory.
#[derive(Debug, Clone)]
pub struct Recorder<'a> {
    model: Option<&'a SpectralModel>,
    config: RecorderConfig,
    detector: StoppingTimeDetector,
    trajectory: Trajectory,
    pending: Option<TrajectoryPoint>,
    excursion: Option<f64>,
    last_step: u64,
}

impl<'a> Recorder<'a> {
    /// `model` maps iterates to eigenbasis coordinates; `None` means the
    /// iterate already is in eigenbasis coordinates.
    pub fn new(model: Option<&'a SpectralModel>, config: RecorderConfig) -> Self {
        Recorder {
            model,
            config,
            detector: StoppingTimeDetector::new(config.threshold),
            trajectory: Trajectory::default(),
            pending: None,
            excursion: None,
            last_step: 0,
        }
    }

    fn eigen<'u>(&self, u: &'u UnitVector) -> Cow<'u, [f64]> {
        match self.model {
            Some(m) => Cow::Owned(m.to_eigen_coords(u.as_slice()).expect("iterate dimension matches model")),
            None => Cow::Borrowed(u.as_slice()),
        }
    }

    fn hits(&self) -> [bool; 3] {
        let t = self.detector.times();
        [t.n_w.is_some(), t.n_m.is_some(), t.n_c.is_some()]
    }

    fn track_excursion(&mut self, step: u64, v: &[f64]) {
        let (Some(delay), Some(n_c)) = (self.config.excursion_delay, self.detector.times().n_c) else {
            return;
        };
        if step < n_c + delay || v[0].abs() <= EQUATOR_TOL {
            return;
        }
        let worst = linalg::max_abs(&v[1..]) / v[0].abs();
        self.excursion = Some(self.excursion.map_or(worst, |e| e.max(worst)));
    }

    pub fn stopping_times(&self) -> StoppingTimes {
        self.detector.times()
    }

    /// `sup_k |U_k|` over steps at least `excursion_delay` after `n_c`.
    pub fn ratio_excursion(&self) -> Option<f64> {
        self.excursion
    }

    /// Flushes the final iterate and returns the trajectory.
    pub fn into_trajectory(mut self) -> Trajectory {
        if let Some(p) = self.pending.take() {
            self.trajectory.points.push(p);
        }
        self.trajectory
    }

    pub fn last_step(&self) -> u64 {
        self.last_step
    }
}

impl StepObserver for Recorder<'_> {
    fn start(&mut self, initial: &UnitVector) {
        let v = self.eigen(initial);
        self.detector.observe_iterate(0, v[0].abs());
        self.track_excursion(0, &v);
        if self.config.stride > 0 {
            let mut p = TrajectoryPoint::from_eigen(0, &v, None);
            p.hits = self.hits();
            self.trajectory.points.push(p);
        }
    }

    fn observe(&mut self, info: &StepInfo, iterate: &UnitVector, y: &[f64]) {
        let v = self.eigen(iterate);
        // |v_prev . y| = |u_prev . x| since U is orthogonal.
        let sample_max = linalg::max_abs(y).max(info.projection.abs());
        self.detector.observe_sample(info.step, sample_max);
        self.detector.observe_iterate(info.step, v[0].abs());
        self.track_excursion(info.step, &v);
        self.last_step = info.step;
        if self.config.stride > 0 {
            let mut p = TrajectoryPoint::from_eigen(info.step, &v, Some(sample_max));
            p.hits = self.hits();
            if info.step % self.config.stride == 0 {
                self.trajectory.points.push(p);
                self.pending = None;
            } else {
                self.pending = Some(p);
            }
        }
    }
}

/// `beta_hat = lambda_1^2 beta / (lambda_1 - lambda_2)`.
pub fn rescaled_stepsize(lambda1: f64, lambda2: f64, beta: f64) -> f64 {
    lambda1 * lambda1 * beta / (lambda1 - lambda2)
}

/// `M = lambda_1 beta_hat^{-2 epsilon}`.
pub fn magnitude_threshold(lambda1: f64, beta_hat: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 0.125) {
        return Err(Error::EpsilonOutOfRange);
    }
    if !(beta_hat > 0.0) || !beta_hat.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "rescaled stepsize must be positive, got {beta_hat}"
        )));
    }
    if beta_hat >= 1.0 {
        log::warn!("rescaled stepsize {beta_hat} >= 1: threshold M falls below lambda_1");
    }
    Ok(lambda1 * beta_hat.powf(-2.0 * epsilon))
}

fn contraction_log(beta: f64, lambda1: f64, lambda2: f64) -> Result<f64> {
    let gap = lambda1 - lambda2;
    if !(gap > 0.0) || !(beta > 0.0) {
        return Err(Error::InvalidArgument("gap and beta must be positive".into()));
    }
    let rate = beta * gap;
    if rate >= 1.0 {
        return Err(Error::ContractionNonPositive);
    }
    Ok(-(1.0 - rate).ln())
}

/// `N*_{beta,s} = ceil(s log(lambda_1^{-2} gap / beta) / -log(1 - beta gap))`,
/// clamped to 0 (with a warning) when the log argument is at most 1.
pub fn rescaled_time_star(beta: f64, s: f64, lambda1: f64, lambda2: f64) -> Result<u64> {
    let denom = contraction_log(beta, lambda1, lambda2)?;
    let arg = (lambda1 - lambda2) / (lambda1 * lambda1 * beta);
    if arg <= 1.0 {
        log::warn!("rescaled time N*: log argument {arg} <= 1, clamping to 0");
        return Ok(0);
    }
    Ok(ceil_nonneg(s * arg.ln() / denom))
}

/// `N^o_beta(c*) = ceil(log(4 c* d) / -log(1 - beta gap))`.
pub fn rescaled_time_warm(beta: f64, c_star: f64, d: usize, lambda1: f64, lambda2: f64) -> Result<u64> {
    if !(c_star > 0.0) || d == 0 {
        return Err(Error::InvalidArgument("c* and d must be positive".into()));
    }
    let denom = contraction_log(beta, lambda1, lambda2)?;
    Ok(ceil_nonneg((4.0 * c_star * d as f64).ln() / denom))
}

fn ceil_nonneg(x: f64) -> u64 {
    if x <= 0.0 {
        0
    } else {
        x.ceil() as u64
    }
}

/// Computable ingredients of the high-probability warm-entry event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WarmEntryFlags {
    /// `n_c <= N^o_beta(c*)`.
    pub entered_in_time: bool,
    /// Tracked `sup |U_k|` stays within `2 beta_hat^{0.5 - epsilon}`.
    pub excursion_within: Option<bool>,
}

pub fn warm_entry_flags(
    times: &StoppingTimes,
    warm_time: u64,
    excursion: Option<f64>,
    beta_hat: f64,
    epsilon: f64,
) -> WarmEntryFlags {
    let limit = 2.0 * beta_hat.powf(0.5 - epsilon);
    WarmEntryFlags {
        entered_in_time: times.n_c.is_some_and(|n| n <= warm_time),
        excursion_within: excursion.map(|e| e <= limit),
    }
}

/// Exact one-step change of a coordinate versus its first-order expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub exact_increment: f64,
    pub leading_term: f64,
    /// `exact_increment - leading_term`.
    pub remainder: f64,
    pub beta: f64,
}

impl DecompositionReport {
    fn new(exact: f64, leading: f64, beta: f64) -> Self {
        DecompositionReport {
            exact_increment: exact,
            leading_term: leading,
            remainder: exact - leading,
            beta,
        }
    }
}

fn check_pair(v: &[f64], y: &[f64], k: usize) -> Result<()> {
    if v.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len(),
            actual: y.len(),
        });
    }
    if k >= v.len() {
        return Err(Error::InvalidArgument(format!("coordinate {k} out of range")));
    }
    Ok(())
}

fn projected_update(v: &[f64], y: &[f64], beta: f64, vy: f64) -> Vec<f64> {
    let mut w = v.to_vec();
    linalg::axpy(beta * vy, y, &mut w);
    let n = linalg::norm(&w);
    linalg::scale(1.0 / n, &mut w);
    w
}

/// Increment of coordinate `k` (zero-based) after one step with sample `y`,
/// split as `beta [(v.y) y_k - v_k (v.y)^2 (1 + beta |y|^2 / 2)] + remainder`.
pub fn increment_decomposition(v: &[f64], y: &[f64], beta: f64, k: usize) -> Result<DecompositionReport> {
    check_pair(v, y, k)?;
    let vy = linalg::dot(v, y);
    let magnitude = linalg::max_abs(y).max(vy.abs());
    if beta * magnitude * magnitude > 1.0 / 3.0 {
        log::warn!("increment decomposition outside the small-step regime");
    }
    if vy == 0.0 {
        return Ok(DecompositionReport::new(0.0, 0.0, beta));
    }
    let next = projected_update(v, y, beta, vy);
    let exact = next[k] - v[k];
    let leading = beta * (vy * y[k] - v[k] * vy * vy * (1.0 + 0.5 * beta * linalg::norm_sq(y)));
    Ok(DecompositionReport::new(exact, leading, beta))
}

/// Increment of the ratio `U_k = v_k / v_1` (zero-based `k >= 1`), split as
/// `beta (v.y / v_1) (y_k - (v_k / v_1) y_1) + remainder`.
pub fn ratio_increment_decomposition(
    v: &[f64],
    y: &[f64],
    beta: f64,
    k: usize,
) -> Result<DecompositionReport> {
    check_pair(v, y, k)?;
    if k == 0 {
        return Err(Error::InvalidArgument("ratio coordinate must be k >= 1".into()));
    }
    if v[0].abs() <= EQUATOR_TOL {
        return Err(Error::RatioOnEquator);
    }
    if v[0].abs() < AUX_THRESHOLD {
        log::warn!("ratio decomposition evaluated outside S3 (|v_1| = {})", v[0].abs());
    }
    let vy = linalg::dot(v, y);
    if vy == 0.0 {
        return Ok(DecompositionReport::new(0.0, 0.0, beta));
    }
    let before = v[k] / v[0];
    let next = projected_update(v, y, beta, vy);
    if next[0].abs() <= EQUATOR_TOL {
        return Err(Error::RatioUndefined);
    }
    let exact = next[k] / next[0] - before;
    let leading = beta * (vy / v[0]) * (y[k] - before * y[0]);
    Ok(DecompositionReport::new(exact, leading, beta))
}

/// Closed-form `beta^2` coefficients of the two remainders, as
/// `(increment, ratio)`. A fixture is generic when both are away from zero.
pub fn remainder_second_order(v: &[f64], y: &[f64], k: usize) -> Result<(f64, f64)> {
    check_pair(v, y, k)?;
    if v[0].abs() <= EQUATOR_TOL {
        return Err(Error::RatioOnEquator);
    }
    let a = linalg::dot(v, y);
    let increment = a.powi(3) * (1.5 * v[k] * a - y[k]);
    let ratio = -(a * a * y[0] / (v[0] * v[0])) * (y[k] - v[k] / v[0] * y[0]);
    Ok((increment, ratio))
}

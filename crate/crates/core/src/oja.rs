//! Oja's online update and its stepsize schedules.
//!
//! One step is `u <- normalize(u + beta_n * x * (x . u))`, which costs O(d)
//! and never forms a `d x d` matrix.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{project_to_sphere, UnitVector};
use crate::sampling::SampleSource;

/// Largest admissible `beta_n |x|^2` for a single step.
pub const OVERFLOW_GUARD: f64 = 1e12;

/// Rule mapping the step index `n` to `beta_n` (units of 1 / variance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepsizeSchedule {
    Constant { beta: f64 },
    /// `2 log N / (gap N)`.
    PaperOptimal { gap: f64, horizon: u64 },
    /// `2 / (gap (n + n1))`.
    Balsubramani { gap: f64, offset: u64 },
    /// `16 / (gap N)`.
    DeSa { gap: f64, horizon: u64 },
    /// `lambda_1 log N / (gap N)`.
    Shamir { lambda1: f64, gap: f64, horizon: u64 },
    /// `1 / (gap (n + n2))`.
    Jain { gap: f64, offset: u64 },
}

fn check_gap(gap: f64) -> Result<()> {
    if gap > 0.0 && gap.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("eigengap must be positive, got {gap}")))
    }
}

fn check_horizon(horizon: u64) -> Result<()> {
    if horizon < 2 {
        Err(Error::DegenerateHorizon)
    } else {
        Ok(())
    }
}

fn check_offset(offset: u64) -> Result<()> {
    if offset == 0 {
        Err(Error::InvalidArgument("starting offset must be at least 1".into()))
    } else {
        Ok(())
    }
}

impl StepsizeSchedule {
    pub fn constant(beta: f64) -> Result<Self> {
        if beta > 0.0 && beta.is_finite() {
            Ok(StepsizeSchedule::Constant { beta })
        } else {
            Err(Error::InvalidArgument(format!("stepsize must be positive, got {beta}")))
        }
    }

    pub fn paper_optimal(gap: f64, horizon: u64) -> Result<Self> {
        check_gap(gap)?;
        check_horizon(horizon)?;
        Ok(StepsizeSchedule::PaperOptimal { gap, horizon })
    }

    pub fn balsubramani(gap: f64, offset: u64) -> Result<Self> {
        check_gap(gap)?;
        check_offset(offset)?;
        Ok(StepsizeSchedule::Balsubramani { gap, offset })
    }

    pub fn desa(gap: f64, horizon: u64) -> Result<Self> {
        check_gap(gap)?;
        check_horizon(horizon)?;
        Ok(StepsizeSchedule::DeSa { gap, horizon })
    }

    pub fn shamir(lambda1: f64, gap: f64, horizon: u64) -> Result<Self> {
        check_gap(gap)?;
        check_horizon(horizon)?;
        if !(lambda1 > 0.0) {
            return Err(Error::InvalidArgument("lambda_1 must be positive".into()));
        }
        Ok(StepsizeSchedule::Shamir { lambda1, gap, horizon })
    }

    pub fn jain(gap: f64, offset: u64) -> Result<Self> {
        check_gap(gap)?;
        check_offset(offset)?;
        Ok(StepsizeSchedule::Jain { gap, offset })
    }

    pub fn name(&self) -> &'static str {
        match self {
            StepsizeSchedule::Constant { .. } => "constant",
            StepsizeSchedule::PaperOptimal { .. } => "paper_optimal",
            StepsizeSchedule::Balsubramani { .. } => "balsubramani",
            StepsizeSchedule::DeSa { .. } => "desa",
            StepsizeSchedule::Shamir { .. } => "shamir",
            StepsizeSchedule::Jain { .. } => "jain",
        }
    }

    /// True when `beta_n` does not depend on `n`.
    pub fn is_constant(&self) -> bool {
        !matches!(
            self,
            StepsizeSchedule::Balsubramani { .. } | StepsizeSchedule::Jain { .. }
        )
    }

    /// `beta_n` for step index `n`.
    pub fn stepsize(&self, n: u64) -> f64 {
        match *self {
            StepsizeSchedule::Constant { beta } => beta,
            StepsizeSchedule::PaperOptimal { gap, horizon } => {
                2.0 * (horizon as f64).ln() / (gap * horizon as f64)
            }
            StepsizeSchedule::Balsubramani { gap, offset } => 2.0 / (gap * (n + offset) as f64),
            StepsizeSchedule::DeSa { gap, horizon } => 16.0 / (gap * horizon as f64),
            StepsizeSchedule::Shamir { lambda1, gap, horizon } => {
                lambda1 * (horizon as f64).ln() / (gap * horizon as f64)
            }
            StepsizeSchedule::Jain { gap, offset } => 1.0 / (gap * (n + offset) as f64),
        }
    }

    /// Short description of the stepsizes over steps `1..=steps`.
    pub fn summary(&self, steps: u64) -> String {
        if self.is_constant() || steps <= 1 {
            format!("{}", self.stepsize(1))
        } else {
            format!("{}..{}", self.stepsize(1), self.stepsize(steps))
        }
    }

    /// Warns when `beta_1 * gap >= 1`, where the contraction factor
    /// `1 - beta * gap` is no longer positive. Returns whether it warned.
    pub fn warn_if_not_contracting(&self, gap: f64) -> bool {
        let beta = self.stepsize(1);
        if beta * gap >= 1.0 {
            log::warn!(
                "{} schedule: beta * gap = {} >= 1, contraction factor is non-positive",
                self.name(),
                beta * gap
            );
            true
        } else {
            false
        }
    }
}

/// What a single step saw, for observers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Index of the iterate just produced (1-based).
    pub step: u64,
    pub beta: f64,
    /// `x . u_prev`.
    pub projection: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OjaState {
    iterate: UnitVector,
    step_count: u64,
    schedule: StepsizeSchedule,
}

impl OjaState {
    pub fn new(initial: UnitVector, schedule: StepsizeSchedule) -> Self {
        OjaState {
            iterate: initial,
            step_count: 0,
            schedule,
        }
    }

    pub fn iterate(&self) -> &UnitVector {
        &self.iterate
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn schedule(&self) -> &StepsizeSchedule {
        &self.schedule
    }

    /// Applies one update with sample `x` using `beta_{n}` for the new index `n`.
    pub fn step(&mut self, x: &[f64]) -> Result<StepInfo> {
        let d = self.iterate.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: x.len(),
            });
        }
        let n = self.step_count + 1;
        let beta = self.schedule.stepsize(n);
        let u = self.iterate.as_slice();
        let projection = linalg::dot(x, u);
        let x_norm_sq = linalg::norm_sq(x);
        if !projection.is_finite() || !x_norm_sq.is_finite() {
            return Err(Error::NonFinite);
        }
        if beta * x_norm_sq >= OVERFLOW_GUARD {
            return Err(Error::InvalidArgument(format!(
                "beta |x|^2 = {:e} exceeds the overflow guard",
                beta * x_norm_sq
            )));
        }
        let mut next = u.to_vec();
        linalg::axpy(beta * projection, x, &mut next);
        let norm = linalg::norm(&next);
        // I + beta x x^T is positive definite, so the update cannot vanish.
        assert!(norm > 0.0 && norm.is_finite(), "Oja update produced norm {norm}");
        linalg::scale(1.0 / norm, &mut next);
        self.iterate = UnitVector::from_unit(next);
        self.step_count = n;
        Ok(StepInfo {
            step: n,
            beta,
            projection,
        })
    }
}

/// Receives the iterate after every step of [`run_stream`].
pub trait StepObserver {
    fn start(&mut self, _initial: &UnitVector) {}
    /// `y` is the eigenbasis form of the sample that produced `iterate`.
    fn observe(&mut self, _info: &StepInfo, _iterate: &UnitVector, _y: &[f64]) {}
}

impl StepObserver for () {}

/// Draws `n_steps` samples from `source` and applies them to `state`.
pub fn run_stream<S: SampleSource + ?Sized, O: StepObserver + ?Sized>(
    state: &mut OjaState,
    source: &mut S,
    n_steps: u64,
    observer: &mut O,
) -> Result<()> {
    let d = state.iterate.dim();
    if source.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: source.dim(),
        });
    }
    observer.start(&state.iterate);
    let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
    for _ in 0..n_steps {
        source.fill_next(&mut x, &mut y);
        let info = state.step(&x)?;
        observer.observe(&info, &state.iterate, &y);
    }
    Ok(())
}

/// Direction of `(I + beta x_n x_n^T) ... (I + beta x_1 x_1^T) u0`, computed
/// without per-step projection. The running vector is rescaled only when its
/// magnitude leaves `[1e-100, 1e100]`.
pub fn product_oracle(u0: &UnitVector, samples: &[Vec<f64>], beta: f64) -> Result<UnitVector> {
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument("product oracle needs beta > 0".into()));
    }
    let mut w = u0.as_slice().to_vec();
    for x in samples {
        if x.len() != w.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                actual: x.len(),
            });
        }
        let c = beta * linalg::dot(x, &w);
        linalg::axpy(c, x, &mut w);
        let norm = linalg::norm(&w);
        if !norm.is_finite() {
            return Err(Error::Overflow);
        }
        if !(1e-100..=1e100).contains(&norm) {
            linalg::scale(1.0 / norm, &mut w);
        }
    }
    project_to_sphere(&w).map_err(|e| match e {
        Error::NonFinite => Error::Overflow,
        other => other,
    })
}

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{magnitude_threshold, rescaled_stepsize, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::model::{project_to_sphere, BasisSpec, SpectralModel, UnitVector};
use crate::oja::StepsizeSchedule;
use crate::rng;
use crate::sampling::{uniform_sphere, NoiseKind};

/// Model section of a config: either a full spectrum or a spiked shorthand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ModelConfig {
    Spiked {
        dim: usize,
        top: f64,
        rest: f64,
        #[serde(default = "identity")]
        basis: BasisSpec,
    },
    Full {
        dim: usize,
        eigenvalues: Vec<f64>,
        #[serde(default = "identity")]
        basis: BasisSpec,
    },
}

fn identity() -> BasisSpec {
    BasisSpec::Identity
}

impl ModelConfig {
    pub fn build(&self) -> Result<SpectralModel> {
        match self {
            ModelConfig::Spiked { dim, top, rest, basis } => SpectralModel::spiked(*dim, *top, *rest, basis.clone()),
            ModelConfig::Full { dim, eigenvalues, basis } => {
                if eigenvalues.len() != *dim {
                    return Err(Error::DimensionMismatch {
                        expected: *dim,
                        actual: eigenvalues.len(),
                    });
                }
                SpectralModel::new(eigenvalues.clone(), basis.clone())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelConfig::Spiked { dim, .. } | ModelConfig::Full { dim, .. } => *dim,
        }
    }

    pub fn top(&self) -> f64 {
        match self {
            ModelConfig::Spiked { top, .. } => *top,
            ModelConfig::Full { eigenvalues, .. } => eigenvalues.first().copied().unwrap_or(f64::NAN),
        }
    }

    /// Same spectrum family in dimension `dim`; needs `lambda_2 = ... = lambda_d`.
    pub fn with_dim(&self, dim: usize) -> Result<ModelConfig> {
        let (top, rest, basis) = self.spike_parts()?;
        Ok(ModelConfig::Spiked { dim, top, rest, basis })
    }

    /// Same family with the top eigenvalue replaced.
    pub fn with_top(&self, top: f64) -> Result<ModelConfig> {
        match self {
            ModelConfig::Spiked { dim, rest, basis, .. } => Ok(ModelConfig::Spiked {
                dim: *dim,
                top,
                rest: *rest,
                basis: basis.clone(),
            }),
            ModelConfig::Full { dim, eigenvalues, basis } => {
                let mut eigenvalues = eigenvalues.clone();
                eigenvalues[0] = top;
                Ok(ModelConfig::Full {
                    dim: *dim,
                    eigenvalues,
                    basis: basis.clone(),
                })
            }
        }
    }

    fn spike_parts(&self) -> Result<(f64, f64, BasisSpec)> {
        let basis_ok = |b: &BasisSpec| !matches!(b, BasisSpec::Explicit(_));
        match self {
            ModelConfig::Spiked { top, rest, basis, .. } if basis_ok(basis) => Ok((*top, *rest, basis.clone())),
            ModelConfig::Full { eigenvalues, basis, .. }
                if basis_ok(basis) && eigenvalues.len() >= 2 && eigenvalues[1..].iter().all(|l| *l == eigenvalues[1]) =>
            {
                Ok((eigenvalues[0], eigenvalues[1], basis.clone()))
            }
            _ => Err(Error::InvalidArgument(
                "varying the dimension needs a spiked spectrum and a non-explicit basis".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    PaperOptimal,
    Balsubramani,
    Desa,
    Shamir,
    Jain,
}

impl ScheduleKind {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Constant => "constant",
            ScheduleKind::PaperOptimal => "paper_optimal",
            ScheduleKind::Balsubramani => "balsubramani",
            ScheduleKind::Desa => "desa",
            ScheduleKind::Shamir => "shamir",
            ScheduleKind::Jain => "jain",
        }
    }
}

pub const DEFAULT_OFFSET: u64 = 25;

/// Schedule variant plus whatever parameters it needs. The eigengap and the
/// horizon come from the model and the run length unless overridden.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<u64>,
}

impl ScheduleSpec {
    pub fn of(kind: ScheduleKind) -> Self {
        ScheduleSpec {
            kind,
            beta: None,
            offset: None,
        }
    }

    pub fn build(&self, model: &SpectralModel, gap_override: Option<f64>, horizon: u64) -> Result<StepsizeSchedule> {
        let gap = gap_override.unwrap_or_else(|| model.eigengap());
        let offset = self.offset.unwrap_or(DEFAULT_OFFSET);
        match self.kind {
            ScheduleKind::Constant => {
                let beta = self
                    .beta
                    .ok_or_else(|| Error::InvalidArgument("constant schedule needs beta".into()))?;
                StepsizeSchedule::constant(beta)
            }
            ScheduleKind::PaperOptimal => StepsizeSchedule::paper_optimal(gap, horizon),
            ScheduleKind::Balsubramani => StepsizeSchedule::balsubramani(gap, offset),
            ScheduleKind::Desa => StepsizeSchedule::desa(gap, horizon),
            ScheduleKind::Shamir => StepsizeSchedule::shamir(model.lambda1(), gap, horizon),
            ScheduleKind::Jain => StepsizeSchedule::jain(gap, offset),
        }
    }
}

/// Initial iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// Uniform on the sphere.
    Uniform,
    /// `|v_1| = v1` in eigenbasis coordinates, remaining direction uniform.
    Warm { v1: f64 },
    /// Fixed ambient vector, projected to the sphere.
    Explicit { vector: Vec<f64> },
}

impl InitSpec {
    pub fn draw(&self, model: &SpectralModel, seed: u64) -> Result<UnitVector> {
        let d = model.dim();
        match self {
            InitSpec::Uniform => uniform_sphere(&mut rng::rng_from_seed(seed), d),
            InitSpec::Warm { v1 } => {
                if !(0.0..=1.0).contains(v1) {
                    return Err(Error::InvalidArgument(format!("warm start needs v1 in [0, 1], got {v1}")));
                }
                let mut v = vec![0.0; d];
                v[0] = *v1;
                if d > 1 {
                    let rest = uniform_sphere(&mut rng::rng_from_seed(seed), d - 1)?;
                    let r = (1.0 - v1 * v1).max(0.0).sqrt();
                    for (vi, ri) in v[1..].iter_mut().zip(rest.as_slice()) {
                        *vi = r * ri;
                    }
                }
                project_to_sphere(&model.from_eigen_coords(&v)?)
            }
            InitSpec::Explicit { vector } => {
                if vector.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        actual: vector.len(),
                    });
                }
                project_to_sphere(vector)
            }
        }
    }
}

/// Computable per-run event used for restricted aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SuccessEvent {
    Always,
    /// Final `tan^2` at most `tau`.
    Tan2AtMost { tau: f64 },
    /// The magnitude stopping time never fired.
    MagnitudeNeverExceeded,
    AnyOf { events: Vec<SuccessEvent> },
    AllOf { events: Vec<SuccessEvent> },
}

impl Default for SuccessEvent {
    fn default() -> Self {
        SuccessEvent::AnyOf {
            events: vec![SuccessEvent::Tan2AtMost { tau: 1.0 }, SuccessEvent::MagnitudeNeverExceeded],
        }
    }
}

impl SuccessEvent {
    /// `tan2` is `+inf` when unbounded; `n_m` is `None` when it never fired.
    pub fn holds(&self, tan2: f64, n_m: Option<u64>) -> bool {
        match self {
            SuccessEvent::Always => true,
            SuccessEvent::Tan2AtMost { tau } => tan2 <= *tau,
            SuccessEvent::MagnitudeNeverExceeded => n_m.is_none(),
            SuccessEvent::AnyOf { events } => events.iter().any(|e| e.holds(tan2, n_m)),
            SuccessEvent::AllOf { events } => events.iter().all(|e| e.holds(tan2, n_m)),
        }
    }
}

fn default_init() -> InitSpec {
    InitSpec::Uniform
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_replicates() -> u64 {
    1
}

/// One Monte-Carlo experiment: `replicates` independent runs of `horizon` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub noise: NoiseKind,
    pub schedule: ScheduleSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_override: Option<f64>,
    /// Samples per run, `N`.
    pub horizon: u64,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    pub base_seed: u64,
    #[serde(default = "default_init")]
    pub init: InitSpec,
    #[serde(default)]
    pub success_event: SuccessEvent,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Trajectory stride; absent means no trajectory is kept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.build()?;
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.125) {
            return Err(Error::EpsilonOutOfRange);
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }

    /// `M` for the stopping time `n_m`, from the first-step stepsize.
    pub fn threshold(&self, model: &SpectralModel, schedule: &StepsizeSchedule) -> Result<f64> {
        let beta_hat = rescaled_stepsize(model.lambda1(), model.lambda2(), schedule.stepsize(1));
        magnitude_threshold(model.lambda1(), beta_hat, self.epsilon)
    }
}

//! Experiment orchestration: configs, seeded replication, sweeps, rate fits,
//! property suites and CSV/JSON output.

pub mod config;
pub mod experiment;
pub mod fit;
pub mod output;
pub mod sweep;
pub mod verify;

pub use config::{ExperimentConfig, InitSpec, ModelConfig, ScheduleKind, ScheduleSpec, SuccessEvent};
pub use experiment::{aggregate, run_experiment, run_replicate, AggregateReport, ExperimentResult, RunRecord};
pub use fit::{fit_rate, RateFit};
pub use sweep::{sweep, GridSpec, SweepRow};
pub use verify::{verify, Check, VerifyReport};

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use crate::diagnostics::{default_stride, Recorder, RecorderConfig, StoppingTimes, Trajectory};
use crate::error::{Error, Result};
use crate::model::{angle_report, Tan2};
use crate::oja::{run_stream, OjaState};
use crate::oracle::{restricted_mean, RestrictedMean};
use crate::rng::derive_seed;
use crate::sampling::StreamSource;
use crate::stats::{mean, quantile_sorted, sorted};

pub const SCHEMA_VERSION: u32 = 1;

/// One replicate's outcome. Metric fields are `None` when the run failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub replicate: u64,
    pub seed: u64,
    pub d: usize,
    pub horizon: u64,
    pub schedule: String,
    pub beta_summary: String,
    pub noise: String,
    pub sin2: Option<f64>,
    pub tan2: Option<Tan2>,
    pub theta: Option<f64>,
    pub stopping_times: StoppingTimes,
    pub success: bool,
    pub wall_ms: f64,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    /// Equality ignoring the wall-clock column.
    pub fn same_outcome(&self, other: &RunRecord) -> bool {
        let mut a = self.clone();
        a.wall_ms = other.wall_ms;
        &a == other
    }
}

/// Seeds used by replicate `i`: `(replicate, init, stream)`.
pub fn replicate_seeds(base_seed: u64, i: u64) -> (u64, u64, u64) {
    let seed = derive_seed(base_seed, i);
    (seed, derive_seed(seed, 0), derive_seed(seed, 1))
}

/// Runs replicate `i` and returns its record plus the trajectory when the
/// config asks for one. Failures are reported inside the record.
pub fn run_replicate(config: &ExperimentConfig, i: u64) -> (RunRecord, Option<Trajectory>) {
    let start = Instant::now();
    let (seed, init_seed, stream_seed) = replicate_seeds(config.base_seed, i);
    let mut record = RunRecord {
        config_hash: config.hash(),
        replicate: i,
        seed,
        d: config.model.dim(),
        horizon: config.horizon,
        schedule: config.schedule.kind.name().to_string(),
        beta_summary: String::new(),
        noise: config.noise.name().to_string(),
        sin2: None,
        tan2: None,
        theta: None,
        stopping_times: StoppingTimes::default(),
        success: false,
        wall_ms: 0.0,
        error: None,
    };
    let outcome = replicate_inner(config, init_seed, stream_seed, &mut record);
    let trajectory = match outcome {
        Ok(t) => t,
        Err(e) => {
            record.error = Some(e.to_string());
            record.success = false;
            None
        }
    };
    record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    (record, trajectory)
}

fn replicate_inner(
    config: &ExperimentConfig,
    init_seed: u64,
    stream_seed: u64,
    record: &mut RunRecord,
) -> Result<Option<Trajectory>> {
    let model = config.model.build()?;
    let u0 = config.init.draw(&model, init_seed)?;
    let principal = model.principal();
    let mut state = None;
    let mut threshold = None;
    if config.horizon > 0 {
        let schedule = config.schedule.build(&model, config.gap_override, config.horizon)?;
        schedule.warn_if_not_contracting(model.eigengap());
        record.beta_summary = schedule.summary(config.horizon);
        threshold = Some(config.threshold(&model, &schedule)?);
        state = Some(OjaState::new(u0.clone(), schedule));
    }
    let stride = config.stride.map(|s| if s == 0 { default_stride(config.horizon) } else { s });
    let mut recorder = Recorder::new(
        (!model.is_axis_aligned()).then_some(&model),
        RecorderConfig {
            stride: stride.unwrap_or(0),
            threshold,
            excursion_delay: None,
        },
    );
    let final_iterate = match state.as_mut() {
        Some(state) => {
            let mut source = StreamSource::new(&model, config.noise, stream_seed);
            run_stream(state, &mut source, config.horizon, &mut recorder)?;
            state.iterate().clone()
        }
        None => {
            crate::oja::StepObserver::start(&mut recorder, &u0);
            u0
        }
    };
    let angle = angle_report(&final_iterate, &principal);
    record.sin2 = Some(angle.sin2);
    record.tan2 = Some(angle.tan2);
    record.theta = Some(angle.theta);
    record.stopping_times = recorder.stopping_times();
    record.success = config.success_event.holds(angle.tan2.value(), record.stopping_times.n_m);
    Ok(stride.map(|_| recorder.into_trajectory()))
}

/// Worker count from `OJA_THREADS`, else the machine's parallelism.
pub fn thread_count() -> usize {
    std::env::var("OJA_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f` on a pool sized by [`thread_count`].
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .expect("thread pool");
    pool.install(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub q10: f64,
    pub q25: f64,
    pub q75: f64,
    pub q90: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let s = sorted(values);
        Some(Summary {
            mean: mean(values),
            median: quantile_sorted(&s, 0.5),
            q10: quantile_sorted(&s, 0.1),
            q25: quantile_sorted(&s, 0.25),
            q75: quantile_sorted(&s, 0.75),
            q90: quantile_sorted(&s, 0.9),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateReport {
    pub config_hash: String,
    pub replicates: u64,
    pub failures: u64,
    pub sin2: Summary,
    /// Over replicates with a finite `tan^2`.
    pub tan2: Option<Summary>,
    pub tan2_unbounded: u64,
    /// `sin^2` restricted to the success event.
    pub sin2_restricted: RestrictedMean,
}

/// Deterministic fold over records sorted by replicate index.
pub fn aggregate(config_hash: &str, records: &[RunRecord]) -> Result<AggregateReport> {
    let ok: Vec<&RunRecord> = records.iter().filter(|r| r.is_ok()).collect();
    if ok.is_empty() {
        return Err(Error::AllReplicatesFailed);
    }
    let sin2: Vec<f64> = ok.iter().map(|r| r.sin2.expect("ok record has sin2")).collect();
    let tan2: Vec<Tan2> = ok.iter().map(|r| r.tan2.expect("ok record has tan2")).collect();
    let finite: Vec<f64> = tan2.iter().filter_map(|t| t.finite()).collect();
    let mask: Vec<bool> = ok.iter().map(|r| r.success).collect();
    Ok(AggregateReport {
        config_hash: config_hash.to_string(),
        replicates: records.len() as u64,
        failures: (records.len() - ok.len()) as u64,
        sin2: Summary::of(&sin2).expect("nonempty"),
        tan2: Summary::of(&finite),
        tan2_unbounded: (tan2.len() - finite.len()) as u64,
        sin2_restricted: restricted_mean(&sin2, &mask)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub records: Vec<RunRecord>,
    pub aggregate: AggregateReport,
}

/// All replicates of `config`, in parallel, sorted by replicate index.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let mut records: Vec<RunRecord> = with_pool(|| {
        (0..config.replicates)
            .into_par_iter()
            .map(|i| run_replicate(config, i).0)
            .collect()
    });
    records.sort_by_key(|r| r.replicate);
    for r in records.iter().filter(|r| !r.is_ok()) {
        log::warn!("replicate {} failed: {}", r.replicate, r.error.as_deref().unwrap_or(""));
    }
    let aggregate = aggregate(&config.hash(), &records)?;
    Ok(ExperimentResult { records, aggregate })
}

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ScheduleSpec};
use super::experiment::{run_experiment, AggregateReport};
use crate::error::{Error, Result};
use crate::sampling::NoiseKind;

/// Axes of a sweep. Absent axes keep the base config's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub horizons: Option<Vec<u64>>,
    #[serde(default)]
    pub dims: Option<Vec<usize>>,
    #[serde(default)]
    pub schedules: Option<Vec<ScheduleSpec>>,
    #[serde(default)]
    pub noises: Option<Vec<NoiseKind>>,
    /// Top eigenvalue `lambda_1`, the remaining spectrum held fixed.
    #[serde(default)]
    pub top_eigenvalues: Option<Vec<f64>>,
}

impl GridSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("grid: {e}")))
    }

    /// Cell configs in lexicographic order over (N, d, schedule, noise, lambda_1).
    pub fn cells(&self, base: &ExperimentConfig) -> Result<Vec<ExperimentConfig>> {
        let horizons = self.horizons.clone().unwrap_or_else(|| vec![base.horizon]);
        let dims = self.dims.clone();
        let schedules = self.schedules.clone().unwrap_or_else(|| vec![base.schedule]);
        let noises = self.noises.clone().unwrap_or_else(|| vec![base.noise]);
        let tops = self.top_eigenvalues.clone();
        let axes_empty = horizons.is_empty()
            || dims.as_ref().is_some_and(Vec::is_empty)
            || schedules.is_empty()
            || noises.is_empty()
            || tops.as_ref().is_some_and(Vec::is_empty);
        if axes_empty {
            return Err(Error::InvalidArgument("sweep grid has an empty axis".into()));
        }
        let dim_axis: Vec<Option<usize>> = dims.map_or(vec![None], |v| v.into_iter().map(Some).collect());
        let top_axis: Vec<Option<f64>> = tops.map_or(vec![None], |v| v.into_iter().map(Some).collect());
        let mut out = Vec::new();
        for &n in &horizons {
            for d in &dim_axis {
                for s in &schedules {
                    for &noise in &noises {
                        for top in &top_axis {
                            let mut c = base.clone();
                            c.horizon = n;
                            if let Some(d) = d {
                                c.model = c.model.with_dim(*d)?;
                            }
                            if let Some(top) = top {
                                c.model = c.model.with_top(*top)?;
                            }
                            c.schedule = *s;
                            c.noise = noise;
                            out.push(c);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub cell: usize,
    pub config_hash: String,
    pub base_seed: u64,
    pub horizon: u64,
    pub d: usize,
    pub schedule: String,
    pub noise: String,
    pub top_eigenvalue: f64,
    pub replicates: u64,
    pub aggregate: Option<AggregateReport>,
    pub error: Option<String>,
}

/// One aggregate row per grid cell, in grid order.
pub fn sweep(base: &ExperimentConfig, grid: &GridSpec) -> Result<Vec<SweepRow>> {
    let cells = grid.cells(base)?;
    Ok(cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let result = run_experiment(c);
            let (aggregate, error) = match result {
                Ok(r) => (Some(r.aggregate), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SweepRow {
                cell: i,
                config_hash: c.hash(),
                base_seed: c.base_seed,
                horizon: c.horizon,
                d: c.model.dim(),
                schedule: c.schedule.kind.name().to_string(),
                noise: c.noise.name().to_string(),
                top_eigenvalue: c.model.top(),
                replicates: c.replicates,
                aggregate,
                error,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ScheduleKind;
    use crate::harness::experiment::run_experiment;

    fn base() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{"model": {"dim": 4, "top": 2, "rest": 1}, "noise": "gaussian",
                "schedule": {"kind": "paper_optimal"}, "horizon": 200, "replicates": 4, "base_seed": 5}"#,
        )
        .unwrap()
    }

    #[test]
    fn single_cell_matches_experiment() {
        let rows = sweep(&base(), &GridSpec::default()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].aggregate.as_ref().unwrap(), &run_experiment(&base()).unwrap().aggregate);
    }

    #[test]
    fn grid_order_is_lexicographic() {
        let grid = GridSpec {
            horizons: Some(vec![100, 200]),
            dims: Some(vec![3, 6]),
            schedules: Some(vec![ScheduleSpec::of(ScheduleKind::PaperOptimal), ScheduleSpec::of(ScheduleKind::Jain)]),
            noises: None,
            top_eigenvalues: None,
        };
        let cells = grid.cells(&base()).unwrap();
        let keys: Vec<(u64, usize, &str)> = cells
            .iter()
            .map(|c| (c.horizon, c.model.dim(), c.schedule.kind.name()))
            .collect();
        assert_eq!(keys.len(), 8);
        assert_eq!(keys[0], (100, 3, "paper_optimal"));
        assert_eq!(keys[1], (100, 3, "jain"));
        assert_eq!(keys[2], (100, 6, "paper_optimal"));
        assert_eq!(keys[7], (200, 6, "jain"));
        assert!(cells.iter().all(|c| c.base_seed == 5));
    }

    #[test]
    fn per_cell_errors_are_recorded() {
        let grid = GridSpec {
            horizons: Some(vec![1, 50]),
            ..GridSpec::default()
        };
        let rows = sweep(&base(), &grid).unwrap();
        assert!(rows[0].error.is_some() && rows[0].aggregate.is_none());
        assert!(rows[1].error.is_none());
        assert!(GridSpec { dims: Some(vec![]), ..GridSpec::default() }.cells(&base()).is_err());
    }
}

use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use super::experiment::{RunRecord, SCHEMA_VERSION};
use super::sweep::SweepRow;
use crate::oracle::BoundKind;

pub const TIMESTAMP_PREFIX: &str = "# generated_unix=";

pub const RECORD_COLUMNS: [&str; 18] = [
    "schema",
    "config_hash",
    "replicate",
    "seed",
    "d",
    "N",
    "schedule",
    "beta_summary",
    "noise",
    "sin2",
    "tan2",
    "theta",
    "n_w",
    "n_m",
    "n_c",
    "success",
    "wall_ms",
    "error",
];

pub const SWEEP_COLUMNS: [&str; 23] = [
    "schema",
    "cell",
    "config_hash",
    "base_seed",
    "d",
    "N",
    "schedule",
    "noise",
    "lambda1",
    "replicates",
    "failures",
    "success_freq",
    "sin2_mean",
    "sin2_median",
    "sin2_q10",
    "sin2_q25",
    "sin2_q75",
    "sin2_q90",
    "tan2_median",
    "tan2_unbounded",
    "sin2_restricted",
    "sin2_conditional",
    "error",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// `# schema=1` followed by the timestamp line, which comparisons skip.
pub fn write_header<W: Write>(out: &mut W) -> std::io::Result<()> {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    writeln!(out, "# schema={SCHEMA_VERSION}")?;
    writeln!(out, "{TIMESTAMP_PREFIX}{secs}")
}

/// Drops the timestamp line so two outputs can be compared byte for byte.
pub fn strip_timestamp(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with(TIMESTAMP_PREFIX))
        .map(|l| format!("{l}\n"))
        .collect()
}

pub fn write_records_csv<W: Write>(mut out: W, records: &[RunRecord]) -> anyhow::Result<()> {
    write_header(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.write_record([
            SCHEMA_VERSION.to_string(),
            r.config_hash.clone(),
            r.replicate.to_string(),
            r.seed.to_string(),
            r.d.to_string(),
            r.horizon.to_string(),
            r.schedule.clone(),
            r.beta_summary.clone(),
            r.noise.clone(),
            opt(r.sin2),
            opt(r.tan2),
            opt(r.theta),
            opt(r.stopping_times.n_w),
            opt(r.stopping_times.n_m),
            opt(r.stopping_times.n_c),
            r.success.to_string(),
            format!("{:.3}", r.wall_ms),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> anyhow::Result<()> {
    write_header(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_COLUMNS)?;
    for r in rows {
        let a = r.aggregate.as_ref();
        w.write_record([
            SCHEMA_VERSION.to_string(),
            r.cell.to_string(),
            r.config_hash.clone(),
            r.base_seed.to_string(),
            r.d.to_string(),
            r.horizon.to_string(),
            r.schedule.clone(),
            r.noise.clone(),
            r.top_eigenvalue.to_string(),
            r.replicates.to_string(),
            opt(a.map(|a| a.failures)),
            opt(a.map(|a| a.sin2_restricted.frequency)),
            opt(a.map(|a| a.sin2.mean)),
            opt(a.map(|a| a.sin2.median)),
            opt(a.map(|a| a.sin2.q10)),
            opt(a.map(|a| a.sin2.q25)),
            opt(a.map(|a| a.sin2.q75)),
            opt(a.map(|a| a.sin2.q90)),
            opt(a.and_then(|a| a.tan2).map(|t| t.median)),
            opt(a.map(|a| a.tan2_unbounded)),
            opt(a.map(|a| a.sin2_restricted.restricted)),
            opt(a.and_then(|a| a.sin2_restricted.conditional)),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Bound curves as `(N, kind, value)`; the constant `C` is echoed in a comment.
pub fn write_bounds_csv<W: Write>(mut out: W, c: f64, rows: &[(u64, BoundKind, f64)]) -> anyhow::Result<()> {
    write_header(&mut out)?;
    writeln!(out, "# C={c}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["N", "kind", "value"])?;
    for (n, kind, value) in rows {
        w.write_record([n.to_string(), kind.to_string(), value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use oja_pca::diagnostics::{default_c_star, rescaled_time_warm, DEFAULT_EPSILON};
use oja_pca::harness::output::{write_bounds_csv, write_records_csv, write_sweep_csv};
use oja_pca::harness::{run_experiment, sweep, verify, ExperimentConfig, GridSpec, ModelConfig};
use oja_pca::oracle::{bound_curve, BoundKind, FiniteTimeContext};

#[derive(Parser)]
#[command(name = "ojapca", version, about = "Online PCA with Oja's iteration: experiments and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Writes records.csv and aggregate.json here; prints the aggregate otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a grid of experiments and write sweep.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a property suite; exits non-zero if any check fails.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate reference bound curves.
    Bounds {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "thm3a,thm3b,minimax")]
        kinds: Vec<BoundKind>,
        #[arg(long = "C")]
        c: f64,
        #[arg(long = "N-grid", value_delimiter = ',', required = true)]
        n_grid: Vec<u64>,
        /// Constant stepsize for the finite-time curve.
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn sink(out: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut config = ExperimentConfig::from_json(&read(&config)?)?;
            if let Some(seed) = seed {
                config.base_seed = seed;
            }
            let result = run_experiment(&config)?;
            let aggregate = serde_json::to_string_pretty(&result.aggregate)? + "\n";
            match out {
                Some(dir) => {
                    fs::create_dir_all(&dir)?;
                    write_records_csv(create(&dir.join("records.csv"))?, &result.records)?;
                    fs::write(dir.join("aggregate.json"), aggregate)?;
                }
                None => print!("{aggregate}"),
            }
        }
        Command::Sweep { config, grid, out } => {
            let config = ExperimentConfig::from_json(&read(&config)?)?;
            let grid = GridSpec::from_json(&read(&grid)?)?;
            let rows = sweep(&config, &grid)?;
            fs::create_dir_all(&out)?;
            write_sweep_csv(create(&out.join("sweep.csv"))?, &rows)?;
        }
        Command::Verify { suite, out } => {
            let report = verify(&suite)?;
            sink(out.as_deref())?.write_all(report.to_json().as_bytes())?;
            if !report.passed {
                for c in report.checks.iter().filter(|c| !c.passed) {
                    eprintln!("FAIL {}: value {} margin {}", c.name, c.value, c.margin);
                }
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Bounds {
            model,
            kinds,
            c,
            n_grid,
            beta,
            epsilon,
            out,
        } => {
            let spec: ModelConfig =
                serde_json::from_str(&read(&model)?).context("parsing model file")?;
            let model = spec.build()?;
            let d = model.dim();
            let mut rows = Vec::new();
            for &n in &n_grid {
                for &kind in &kinds {
                    let ctx = match (kind, beta) {
                        (BoundKind::Thm1, Some(beta)) => Some(FiniteTimeContext {
                            beta,
                            step: n,
                            warm_time: rescaled_time_warm(beta, default_c_star(), d, model.lambda1(), model.lambda2())?,
                            epsilon,
                        }),
                        (BoundKind::Thm1, None) => bail!("thm1 needs --beta"),
                        _ => None,
                    };
                    rows.push((n, kind, bound_curve(kind, &model, d, n, c, ctx.as_ref())?));
                }
            }
            write_bounds_csv(sink(out.as_deref())?, c, &rows)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

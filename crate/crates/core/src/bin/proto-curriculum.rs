use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use proto_curriculum::config::{KSweepRange, PipelineConfig};
use proto_curriculum::data_io::{generate_synthetic, save_embeddings, save_embeddings_csv, SyntheticSpec};
use proto_curriculum::pipeline::{self, EpochSelection};
use proto_curriculum::schedule::ScheduleMode;
use proto_curriculum::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_VERIFY: u8 = 4;

/// Prototype-driven curriculum sampling.
///
/// Embeddings are not L2-normalized unless `normalize_l2` is set in the config.
#[derive(Parser)]
#[command(name = "proto-curriculum", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    master_seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit k-means (or sweep k) and persist the model.
    Cluster {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, requires = "k_max")]
        k_min: Option<usize>,
        #[arg(long, requires = "k_min")]
        k_max: Option<usize>,
    },
    /// Compute prototypicality scores against the persisted model.
    Score {
        #[command(flatten)]
        common: Common,
    },
    /// Build the annealing schedule and its CSV curve.
    Schedule {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<ScheduleMode>,
        #[arg(long)]
        start: Option<f64>,
        #[arg(long)]
        end: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Write epoch index files.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with = "all", required_unless_present = "all")]
        epoch: Option<usize>,
        #[arg(long)]
        all: bool,
    },
    /// Cross-check artifacts against the reference implementations.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Write a Gaussian-blob embedding fixture.
    Synth {
        #[arg(long)]
        clusters: usize,
        #[arg(long)]
        per_cluster: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        separation: f64,
        #[arg(long)]
        spread: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv: bool,
    },
}

fn parse_mode(s: &str) -> Result<ScheduleMode, String> {
    match s {
        "tau_range" => Ok(ScheduleMode::TauRange),
        "effective_size" => Ok(ScheduleMode::EffectiveSize),
        _ => Err(format!("expected tau_range or effective_size, got {s:?}")),
    }
}

enum Failure {
    Pipeline(Error),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Pipeline(e)
    }
}

fn load(common: &Common) -> Result<PipelineConfig, Error> {
    let mut cfg = PipelineConfig::load(&common.config)?;
    if let Some(dir) = &common.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = common.master_seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn print<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Cluster { common, k, k_min, k_max } => {
            let mut cfg = load(&common)?;
            if let Some(k) = k {
                cfg.kmeans.k = k;
                cfg.k_sweep = None;
            }
            if let (Some(k_min), Some(k_max)) = (k_min, k_max) {
                cfg.k_sweep = Some(KSweepRange { k_min, k_max });
            }
            print(&pipeline::run_cluster(&cfg)?);
        }
        Command::Score { common } => print(&pipeline::run_score(&load(&common)?)?),
        Command::Schedule { common, mode, start, end, epochs } => {
            let mut cfg = load(&common)?;
            let s = &mut cfg.schedule;
            s.mode = mode.unwrap_or(s.mode);
            s.start = start.unwrap_or(s.start);
            s.end = end.unwrap_or(s.end);
            s.total_epochs = epochs.unwrap_or(s.total_epochs);
            let schedule = pipeline::run_schedule(&cfg)?;
            print(&serde_json::json!({
                "total_epochs": schedule.total_epochs,
                "tau": [schedule.entries[0].tau, schedule.entries[schedule.total_epochs - 1].tau],
                "effective_fraction": [
                    schedule.entries[0].effective_fraction,
                    schedule.entries[schedule.total_epochs - 1].effective_fraction
                ],
            }));
        }
        Command::Sample { common, epoch, all } => {
            let which = match (all, epoch) {
                (true, _) => EpochSelection::All,
                (false, Some(e)) => EpochSelection::One(e),
                (false, None) => unreachable!("clap requires --epoch or --all"),
            };
            let written = pipeline::run_sample(&load(&common)?, which)?;
            print(&serde_json::json!({ "files": written }));
        }
        Command::Verify { common, trials } => {
            let report = pipeline::run_verify(&load(&common)?, trials)?;
            print(&report);
            if !report.passed {
                return Err(Failure::Verification);
            }
        }
        Command::Synth { clusters, per_cluster, dim, separation, spread, seed, out, csv } => {
            let spec = SyntheticSpec {
                n_clusters: clusters,
                samples_per_cluster: per_cluster,
                dim,
                separation,
                spread,
                seed,
            };
            let m = generate_synthetic(&spec)?;
            if csv {
                save_embeddings_csv(&out, &m)?;
            } else {
                save_embeddings(&out, &m)?;
            }
            print(&serde_json::json!({ "n_samples": m.n_samples(), "dim": m.dim(), "path": out }));
        }
    }
    Ok(())
}

fn init_threads() {
    let Ok(raw) = std::env::var("PROTO_CURRICULUM_THREADS") else {
        return;
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("cannot size thread pool: {e}");
            }
        }
        _ => log::warn!("ignoring PROTO_CURRICULUM_THREADS={raw:?}"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    init_threads();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(EXIT_VERIFY),
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_DATA })
        }
    }
}

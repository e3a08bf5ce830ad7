//! Command-line surface for the crossbar co-exploration engine.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 data error, 4 runtime error.
//! The flags --seed, --workers, and --out override the config file, and the
//! environment variables XBARNAS_SEED / XBARNAS_WORKERS / XBARNAS_OUT sit
//! between the two (flag > env > file), so CI can retarget runs without
//! editing configs.

mod commands;
mod config;
mod error;
mod report;
mod rundir;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "xbarnas", version, about = "Device/circuit/architecture co-exploration for crossbar compute-in-memory accelerators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured search pipeline (resumes a matching run directory).
    Search {
        #[arg(long)]
        config: PathBuf,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Parallel candidate-evaluation workers (0 = default).
        #[arg(long)]
        workers: Option<usize>,
        /// Output run directory override.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay one logged candidate and check it reproduces bit-exactly.
    Evaluate {
        #[arg(long)]
        run: PathBuf,
        /// Episode id to replay.
        #[arg(long)]
        candidate: u64,
    },
    /// Map an architecture file and print its hardware metrics.
    Cost {
        #[arg(long)]
        arch: PathBuf,
        /// Uniform weight format, e.g. s1.4 (per-layer values in the arch
        /// file win).
        #[arg(long)]
        wq: Option<String>,
        /// Uniform activation format, e.g. u1.4.
        #[arg(long)]
        aq: Option<String>,
        /// Device name from the default library.
        #[arg(long)]
        device: Option<String>,
        /// Cost-coefficient preset file.
        #[arg(long)]
        tech: Option<PathBuf>,
    },
    /// Extract the Pareto frontier of a run.
    Pareto {
        #[arg(long)]
        run: PathBuf,
        /// Comma list like "accuracy,latency" or "area:min,reward:max".
        #[arg(long)]
        objectives: Option<String>,
    },
    /// Regenerate CSV reports from a run's history log.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn env_u64(name: &str) -> CliResult<Option<u64>> {
    match std::env::var(name) {
        Ok(v) => v
            .parse()
            .map(Some)
            .map_err(|_| CliError::config(format!("{name} must be an integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

fn env_path(name: &str) -> Option<PathBuf> {
    std::env::var_os(name).map(PathBuf::from)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Search {
            config,
            seed,
            workers,
            out,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed.or(env_u64("XBARNAS_SEED")?) {
                cfg.seed = s;
            }
            if let Some(w) = workers.or(env_u64("XBARNAS_WORKERS")?.map(|w| w as usize)) {
                cfg.workers = w;
            }
            if let Some(o) = out.or(env_path("XBARNAS_OUT")) {
                cfg.out_dir = o;
            }
            cfg.validate()?;
            if cfg.workers > 0 {
                // Ignored if a global pool already exists (tests).
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(cfg.workers)
                    .build_global();
            }
            commands::search(&cfg)
        }
        Command::Evaluate { run, candidate } => commands::evaluate(&run, candidate),
        Command::Cost {
            arch,
            wq,
            aq,
            device,
            tech,
        } => commands::cost(&arch, wq.as_deref(), aq.as_deref(), device.as_deref(), tech.as_deref()),
        Command::Pareto { run, objectives } => commands::pareto(&run, objectives.as_deref()),
        Command::Report { run } => commands::run_report(&run),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}

//! `neuroplex`: experiment driver for chaotic-signal multiplexing.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use neuroplex::recovery::SolverKind;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "neuroplex", version, about = "Multiplex chaotic neuron signals and recover them by sparse approximation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write noiseless and noisy Hindmarsh-Rose traces as CSV.
    SimulateNeuron {
        #[command(flatten)]
        common: Common,
        /// Number of signals to write.
        #[arg(long)]
        signals: Option<usize>,
    },
    /// Run seeded end-to-end trials and write reports and reconstructions.
    Run {
        #[command(flatten)]
        common: Common,
        /// Also store each transmitter matrix as a binary ensemble file.
        #[arg(long)]
        save_ensemble: bool,
    },
    /// Success rate over a grid of (N, k, M) and the fitted measurement constant.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Print the resolved configuration, or the header of an ensemble file.
    Inspect {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        ensemble: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Bpdn,
    Omp,
}

#[derive(Args)]
struct Common {
    /// JSON configuration; absent fields take their defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Trials for `run`, or trials per grid point for `sweep`.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum)]
    solver: Option<Solver>,
    /// Support threshold T.
    #[arg(long)]
    threshold: Option<f64>,
}

impl Common {
    fn config(&self, sweep: bool) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(t) = self.trials {
            if sweep {
                cfg.sweep.trials = t;
            } else {
                cfg.trials = t;
            }
        }
        if let Some(s) = self.solver {
            cfg.solver.kind = match s {
                Solver::Bpdn => SolverKind::Bpdn,
                Solver::Omp => SolverKind::Omp,
            };
        }
        if let Some(t) = self.threshold {
            cfg.threshold = t;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::SimulateNeuron { common, signals } => {
            let mut cfg = common.config(false)?;
            if let Some(s) = signals {
                cfg.signals = s;
            }
            commands::simulate_neuron(&cfg)?;
        }
        Command::Run { common, save_ensemble } => {
            let failed = commands::run(&common.config(false)?, save_ensemble)?;
            if failed > 0 {
                eprintln!("{failed} trial(s) did not complete; see report.json");
                return Ok(ExitCode::from(2));
            }
        }
        Command::Sweep { common } => commands::sweep(&common.config(true)?)?,
        Command::Inspect { common, ensemble } => {
            let v = commands::inspect(&common.config(false)?, ensemble.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&v)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

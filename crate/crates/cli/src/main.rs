//! `jpa`: synthesize scenes, train pair models, solve, evaluate, sweep and
//! benchmark.

mod commands;
mod config;
mod error;
mod store;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "jpa", version, about = "Local joint-to-person association experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// TOML or JSON file with [synth], [train], [solve] and [eval] sections
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the synthesis and training seeds
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Confidence threshold for candidates
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Candidates sampled per joint map
    #[arg(long = "n-candidates", global = true)]
    pub n_candidates: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Report errors as JSON on stderr
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeArg {
    Argmax,
    Ljpa,
    Global,
}

impl From<ModeArg> for jpa_core::pipeline::Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Argmax => Self::Argmax,
            ModeArg::Ljpa => Self::Ljpa,
            ModeArg::Global => Self::Global,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Tau,
    N,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate scene files and a manifest
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// clean, occluded or crowded
        #[arg(long)]
        preset: Option<String>,
    },
    /// Train the pair models and print held-out accuracies
    Train {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the accuracy table as CSV
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Estimate one pose per region; timings go to <out stem>.timing.json
    Solve {
        #[arg(long)]
        scenes: PathBuf,
        /// Required unless --mode argmax
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-joint AP of a predictions file
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        scenes: PathBuf,
        /// CSV report path
        #[arg(long)]
        out: Option<PathBuf>,
        /// Row label (default: derived from the predictions)
        #[arg(long)]
        setting: Option<String>,
    },
    /// Solve and evaluate over a grid of tau or N
    Sweep {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values (default: 0,0.1,...,0.9 for tau; 1,3,5 for n)
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Local versus global solve times on the same detections
    Bench {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "4,6,8,10")]
        sizes: String,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn report(e: &CliError, json: bool) {
    if json {
        eprintln!("{}", e.to_json());
    } else {
        eprintln!("{e}");
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let json_requested = std::env::args().any(|a| a == "--json");
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if json_requested {
                report(&CliError::usage(e.to_string().trim().to_string()), true);
            } else {
                let _ = e.print();
            }
            return ExitCode::from(error::EXIT_USAGE as u8);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e, cli.global.json);
            ExitCode::from(e.code as u8)
        }
    }
}

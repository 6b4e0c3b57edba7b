//! `ncoreset`: train, prune and evaluate dense networks with neuron coresets.
//!
//! Usage:
//!   ncoreset --out runs/base train --data data/mnist
//!   ncoreset --out runs/c90 compress --model runs/base/model.json --data data/mnist --samples 32,64 --fine-tune
//!   ncoreset --out runs/sweep sweep --source gaussian_weights --sizes 50:1000:50 --runs 10
//!   ncoreset eval --original a.json --pruned b.json --data data/mnist
//!   ncoreset lowerbound 20 3 1.0 1.0 7
//!
//! Exit status: 0 success, 2 usage or config error, 3 data error, 4 numeric failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use neuron_coreset::Error;

use commands::{CompressArgs, EvalArgs, LowerboundArgs, SweepArgs, TrainArgs};

#[derive(Parser)]
#[command(
    name = "ncoreset",
    version,
    about = "Neuron coresets for dense network compression"
)]
struct Cli {
    /// Master seed for every random choice
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for output files
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// JSON experiment config; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a dense network on MNIST and write `model.json`
    Train(TrainArgs),
    /// Prune a trained model and write `pruned.json` and `prune_report.csv`
    Compress(CompressArgs),
    /// Measure single-layer approximation error across sample sizes
    Sweep(SweepArgs),
    /// Compare an original and a pruned model on the MNIST test split
    Eval(EvalArgs),
    /// Certify that no proper subset is a multiplicative coreset
    Lowerbound(LowerboundArgs),
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Numeric(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numeric(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e.root() {
            Error::InvalidParameter(_) | Error::NotPrunable { .. } => Failure::Usage(msg),
            Error::AllZeroSensitivity
            | Error::NonFiniteLoss { .. }
            | Error::DegenerateInstance { .. } => Failure::Numeric(msg),
            _ => Failure::Data(msg),
        }
    }
}

pub struct Globals {
    pub seed: u64,
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(path) => config::load(path)?,
        None => config::ExperimentConfig::default(),
    };
    let globals = Globals {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        out: cli.out.or(file.out),
    };
    match cli.command {
        Command::Train(a) => commands::train(&globals, config::overlay(file.train, a)?),
        Command::Compress(a) => commands::compress(&globals, config::overlay(file.compress, a)?),
        Command::Sweep(a) => commands::sweep(&globals, config::overlay(file.sweep, a)?),
        Command::Eval(a) => commands::eval(&globals, config::overlay(file.eval, a)?),
        Command::Lowerbound(a) => {
            commands::lowerbound(&globals, config::overlay(file.lowerbound, a)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

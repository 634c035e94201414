//! `hmc-pso`: run optimizations, Golomb searches and training jobs.
//!
//! Results go to standard output and, as CSV, into `--out`. Failures print
//! one line `error[<kind>]: <message>` to standard error and exit nonzero.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

#[derive(Debug, Parser)]
#[command(name = "hmc-pso", version, about = "Swarm optimization coupled with Hamiltonian Monte Carlo")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimize the objective named in a config file.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Search for a short Golomb ruler of the given order.
    Golomb {
        #[arg(long, value_parser = clap::value_parser!(u64).range(2..=50))]
        order: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Train a classifier with swarm-estimated output gradients.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the benchmark suite and print a results table.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug)]
pub struct CliError {
    kind: &'static str,
    message: String,
}

impl CliError {
    pub fn new(kind: &'static str, message: String) -> Self {
        Self { kind, message }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "error[{}]: {}", self.kind, self.message.replace('\n', " "))
    }
}

impl From<hmc_pso::Error> for CliError {
    fn from(e: hmc_pso::Error) -> Self {
        Self::new(e.kind(), e.to_string())
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Optimize { config, seed, out } => commands::optimize(&config, seed, &out),
        Command::Golomb { order, config, seed, out } => commands::golomb(order as usize, config.as_deref(), seed, &out),
        Command::Train { config, seed, out } => commands::train_cmd(&config, seed, &out),
        Command::Bench { config, seed, out } => commands::bench(config.as_deref(), seed, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}

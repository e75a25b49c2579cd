mod commands;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ringcode_core::Error;

#[derive(Parser, Debug)]
#[command(name = "ringcode", version, about = "Linear coding over finite rings for Markov sources")]
pub struct Cli {
    /// Directory searched for documents named on the command line.
    #[arg(long, global = true, env = "RINGCODE_WORKSPACE")]
    pub workspace: Option<PathBuf>,

    /// Worker threads for library parallelism.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    /// Print the machine-readable document instead of the table.
    #[arg(long, global = true)]
    pub json: bool,

    /// Also write the machine-readable document to this file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Inspect a ring document.
    #[command(subcommand)]
    Ring(RingCmd),
    /// Analyze or sample a chain document.
    #[command(subcommand)]
    Chain(ChainCmd),
    /// Achievable-rate reports.
    #[command(subcommand)]
    Rate(RateCmd),
    /// Run a Monte Carlo coding simulation from a sim-config document.
    Simulate(SimulateArgs),
    /// Recompute a bundled example and compare against its reference values.
    Reproduce {
        /// One of 1, 3, 4, 6.
        example: u32,
    },
}

#[derive(Subcommand, Debug)]
pub enum RingCmd {
    /// Order, characteristic, axiom checks, ideals and cosets.
    Inspect { ring: String },
    /// Left ideals only.
    Ideals { ring: String },
}

#[derive(Subcommand, Debug)]
pub enum ChainCmd {
    /// Irreducibility, invariant distribution, entropy rate and Burke form.
    Analyze {
        chain: String,
        /// State subset (comma-separated indices) whose stochastic complement to print; repeatable.
        #[arg(long = "subset")]
        subsets: Vec<String>,
        /// Labeling keys, one per state (comma-separated), to test lumpability and bound the label process.
        #[arg(long)]
        labeling: Option<String>,
        #[arg(long, default_value_t = 8)]
        depth: usize,
    },
    /// Sample a path from the invariant distribution.
    Sample {
        chain: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug, Clone, Copy)]
pub struct DepthArg {
    /// Depth cap for entropy-rate bounds of non-Markov coset processes.
    #[arg(long, default_value_t = 8)]
    pub depth: usize,
}

#[derive(Subcommand, Debug)]
pub enum RateCmd {
    /// Threshold for one chain whose states are the ring elements.
    Single {
        ring: String,
        chain: String,
        /// Sweep every injection of the states into the ring and keep the best.
        #[arg(long)]
        search_injections: bool,
        #[command(flatten)]
        depth: DepthArg,
    },
    /// Symmetric threshold for computing a function through a presentation.
    Compute {
        problem: String,
        presentation: String,
        #[command(flatten)]
        depth: DepthArg,
    },
    /// Sum-rate constraints for recovering every source.
    Cover {
        joint: String,
        #[command(flatten)]
        depth: DepthArg,
    },
    /// Rank several presentations of the same function.
    Compare {
        problem: String,
        #[arg(required = true)]
        presentations: Vec<String>,
        #[command(flatten)]
        depth: DepthArg,
    },
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    pub config: String,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Run every k from 1 to n and write `k,rate,trials,errors,error_prob,std_error` rows here.
    #[arg(long)]
    pub sweep_csv: Option<PathBuf>,
}

/// Failure with an exit code: 1 for validation, 2 for numeric or acceptance failures.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match e {
            Error::Singular(_) | Error::Numeric(_) | Error::DepthCap { .. } => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Failure {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Failure {
        Failure::validation(format!("{}: {e}", path.display()))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.max(1)).build_global() {
        log::warn!("thread pool: {e}");
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("ringcode: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use robust_alloc::cli;

#[derive(Parser)]
#[command(name = "robust-alloc", version, about = "Regime-ambiguity robust portfolio allocation")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one robust allocation problem.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the DRO-versus-SAA sweep.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "ROBUST_ALLOC_JOBS")]
        jobs: Option<usize>,
    },
    /// Solve with a recorded trace of J(z_k) - J*.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-check fast paths against the reference oracles.
    Selftest {
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { cli::EXIT_CONFIG } else { cli::EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match args.command {
        Command::Solve { config, seed, out } => cli::cmd_solve(&config, seed, &out),
        Command::Experiment { config, seed, out, jobs } => cli::cmd_experiment(&config, seed, &out, jobs),
        Command::Convergence { config, seed, out } => cli::cmd_convergence(&config, seed, &out),
        Command::Selftest { seed } => cli::cmd_selftest(seed),
    };
    ExitCode::from(code as u8)
}

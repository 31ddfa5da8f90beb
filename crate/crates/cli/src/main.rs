use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use delay_horizon_cli::commands::{self, GammaRange, Kind, RunConfig};
use delay_horizon_cli::error::EXIT_USAGE;
use delay_horizon_cli::pool::{WorkerPool, WORKERS_ENV};

/// Low-gain feedback design and analysis for plants with delayed inputs.
#[derive(Debug, Parser)]
#[command(name = "delay-horizon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// System JSON (defaults to the built-in oscillator benchmark).
    #[arg(long, global = true)]
    system: Option<PathBuf>,
    /// Network JSON (defaults to the built-in six-agent digraph).
    #[arg(long, global = true)]
    network: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Sweep grid as lo:hi:n.
    #[arg(long, global = true)]
    gamma_range: Option<GammaRange>,
    #[arg(long, global = true, value_enum)]
    kind: Option<Kind>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    horizon: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    step: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    mu: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// Initial state, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    x0: Option<Vec<f64>>,
    /// Seed for random initial agent states.
    #[arg(long, global = true, default_value_t = 9)]
    seed: u64,
    /// Criteria to run, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    criteria: Option<Vec<u8>>,
    #[arg(long, global = true, hide = true)]
    corrupt_gain: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parametric Riccati design; writes gain.json.
    Design,
    /// Prints the assumption report.
    Check,
    /// Spectral-abscissa sweep over gamma.
    Sweep,
    /// Closed-loop simulation for one controller kind.
    Simulate,
    /// Leader-following consensus on a directed network.
    Consensus,
    /// Runs the acceptance criteria.
    Verify,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if cli.workers == Some(0) {
        eprintln!("error: --workers must be at least 1");
        return ExitCode::from(EXIT_USAGE);
    }
    let cfg = RunConfig {
        system: cli.system,
        network: cli.network,
        gamma: cli.gamma,
        gamma_range: cli.gamma_range,
        kind: cli.kind,
        horizon: cli.horizon,
        step: cli.step,
        mu: cli.mu,
        out: cli.out,
        workers: cli.workers.unwrap_or_else(WorkerPool::default_workers),
        x0: cli.x0,
        seed: cli.seed,
        criteria: cli.criteria,
        corrupt_gain: cli.corrupt_gain,
    };
    let result = match cli.command {
        Command::Design => commands::cmd_design(&cfg),
        Command::Check => commands::cmd_check(&cfg),
        Command::Sweep => commands::cmd_sweep(&cfg),
        Command::Simulate => commands::cmd_simulate(&cfg),
        Command::Consensus => commands::cmd_consensus(&cfg),
        Command::Verify => commands::cmd_verify(&cfg),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! `gport` — goal-based portfolio experiments from a single config file.
//!
//! Data goes to files in the output directory; logs go to stderr. Exit
//! codes: 0 success, 2 configuration error, 3 numeric/solver error,
//! 4 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gport_cli::artifacts;
use gport_cli::config::RunConfig;
use gport_core::error::Error;

#[derive(Parser)]
#[command(
    name = "gport",
    version,
    about = "Goal-based dynamic portfolio optimization: simulate a synthetic market, \
             solve for the planning policy, roll out trajectories, recover reward \
             parameters from them, and report performance."
)]
struct Cli {
    /// Flat run-configuration file (defaults apply when omitted).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override seeds.base.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,

    /// Override output.dir.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Override seeds.num_trajectories.
    #[arg(long, global = true, value_name = "INT")]
    trajectories: Option<usize>,

    /// Literal-likelihood and naive-Sharpe variants for side-by-side
    /// comparisons.
    #[arg(long, global = true)]
    replication_mode: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the market and asset universe; write market, returns, and
    /// universe artifacts.
    Simulate,
    /// Solve the planning policy from the simulated artifacts.
    Solve,
    /// Roll out trajectories under the solved policy and score them.
    Rollout,
    /// Recover reward parameters from the stored trajectories.
    Girl,
    /// Aggregate Sharpe over independent evaluation seeds and emit plot data.
    Report,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Usage(_) | Error::Parse { .. } => 2,
        Error::Io { .. } => 4,
        _ => 3,
    }
}

fn run(cli: &Cli) -> gport_core::error::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.base_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(count) = cli.trajectories {
        cfg.num_trajectories = count;
    }
    cfg.validate()?;

    match cli.command {
        Command::Simulate => artifacts::cmd_simulate(&cfg),
        Command::Solve => artifacts::cmd_solve(&cfg),
        Command::Rollout => artifacts::cmd_rollout(&cfg, cli.replication_mode),
        Command::Girl => artifacts::cmd_girl(&cfg, cli.replication_mode),
        Command::Report => artifacts::cmd_report(&cfg, cli.replication_mode),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            log::error!("{err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

//! Subcommand implementations: artifact reading/writing around the pipeline.
//!
//! Every subcommand writes `config_echo.cfg` (the fully resolved
//! configuration) into the output directory, so any artifact can be
//! reproduced from its own directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;

use gport_core::error::{Error, Result};
use gport_core::io;
use gport_core::io::{FitDocument, ParameterComparison};

use crate::config::RunConfig;
use crate::pipeline::{
    self, generate_trajectories, plot_series, rollout_performance, run_eval, run_girl,
    simulate_world_artifacts, solve_world, World,
};

pub const CONFIG_ECHO: &str = "config_echo.cfg";
pub const MARKET_CSV: &str = "market.csv";
pub const RETURNS_CSV: &str = "returns.csv";
pub const UNIVERSE_JSON: &str = "universe.json";
pub const POLICY_JSON: &str = "policy.json";
pub const TRAJECTORIES_CSV: &str = "trajectories.csv";
pub const CONTRIBUTIONS_CSV: &str = "contributions.csv";
pub const ROLLOUT_PERFORMANCE_JSON: &str = "rollout_performance.json";
pub const FIT_JSON: &str = "fit.json";
pub const REPORT_JSON: &str = "report.json";
pub const PLOT_DATA_CSV: &str = "plot_data.csv";

fn require(dir: &Path, name: &str, produced_by: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(Error::io(
            path.display().to_string(),
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("missing artifact; run `gport {produced_by}` first"),
            ),
        ));
    }
    Ok(path)
}

/// Creates the output directory and drops the resolved config echo into it.
pub fn prepare_output(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| Error::io(cfg.output_dir.display().to_string(), e))?;
    let echo = cfg.output_dir.join(CONFIG_ECHO);
    std::fs::write(&echo, cfg.to_flat()).map_err(|e| Error::io(echo.display().to_string(), e))
}

fn read_world(cfg: &RunConfig) -> Result<World> {
    let dir = &cfg.output_dir;
    let market = io::read_market_csv(&require(dir, MARKET_CSV, "simulate")?)?;
    let universe = io::read_universe_json(&require(dir, UNIVERSE_JSON, "simulate")?)?;
    let panel = io::read_returns_csv(&require(dir, RETURNS_CSV, "simulate")?)?;
    Ok(World {
        market,
        universe,
        panel,
    })
}

/// `simulate`: market + universe + return panel files.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    prepare_output(cfg)?;
    let world = simulate_world_artifacts(cfg, cfg.base_seed)?;
    let dir = &cfg.output_dir;
    io::write_market_csv(&dir.join(MARKET_CSV), &world.market)?;
    io::write_returns_csv(&dir.join(RETURNS_CSV), &world.panel)?;
    io::write_universe_json(&dir.join(UNIVERSE_JSON), &world.universe)?;
    info!(
        "simulate: wrote {MARKET_CSV}, {RETURNS_CSV}, {UNIVERSE_JSON} to {}",
        dir.display()
    );
    Ok(())
}

/// `solve`: backward solve on the simulated world, policy to JSON.
pub fn cmd_solve(cfg: &RunConfig) -> Result<()> {
    prepare_output(cfg)?;
    let world = read_world(cfg)?;
    let solution = solve_world(cfg, &world)?;
    io::write_policy_json(&cfg.output_dir.join(POLICY_JSON), &solution)?;
    info!("solve: wrote {POLICY_JSON} (horizon {})", solution.horizon());
    Ok(())
}

/// `rollout`: trajectories under the solved policy plus their performance.
pub fn cmd_rollout(cfg: &RunConfig, replication_mode: bool) -> Result<()> {
    prepare_output(cfg)?;
    let world = read_world(cfg)?;
    let solution = io::read_policy_json(&require(&cfg.output_dir, POLICY_JSON, "solve")?)?;
    let trajectories =
        generate_trajectories(cfg, &world, &solution, cfg.num_trajectories, cfg.base_seed)?;
    let dir = &cfg.output_dir;
    io::write_trajectories_csv(&dir.join(TRAJECTORIES_CSV), &trajectories)?;
    io::write_contributions_csv(&dir.join(CONTRIBUTIONS_CSV), &trajectories)?;
    let performance = rollout_performance(cfg, &trajectories, replication_mode)?;
    io::write_json(&dir.join(ROLLOUT_PERFORMANCE_JSON), &performance)?;
    info!(
        "rollout: {} trajectories, Sharpe {:.3} +/- {:.3}",
        trajectories.len(),
        performance.sharpe_mean,
        performance.sharpe_std
    );
    Ok(())
}

/// `girl`: fit reward parameters to the stored trajectories.
pub fn cmd_girl(cfg: &RunConfig, replication_mode: bool) -> Result<()> {
    prepare_output(cfg)?;
    let world = read_world(cfg)?;
    let trajectories = io::read_trajectories_csv(
        &require(&cfg.output_dir, TRAJECTORIES_CSV, "rollout")?,
        &require(&cfg.output_dir, CONTRIBUTIONS_CSV, "rollout")?,
    )?;
    let started = Instant::now();
    let report = run_girl(cfg, &world, &trajectories, replication_mode)?;
    let wall = started.elapsed().as_secs_f64();
    let mut doc = FitDocument::new(&report, wall);
    doc.comparison = Some(ParameterComparison {
        reference: cfg.reward,
        learned: report.theta_star,
    });
    io::write_json(&cfg.output_dir.join(FIT_JSON), &doc)?;
    info!(
        "girl: {} iterations in {wall:.1}s, converged={}, theta=({:.5}, {:.3}, {:.3}, {:.3})",
        report.iterations,
        report.converged,
        report.theta_star.lambda,
        report.theta_star.eta,
        report.theta_star.rho,
        report.theta_star.omega
    );
    Ok(())
}

/// `report`: aggregate Sharpe over independent evaluation seeds and emit
/// the plot-ready series of the first one.
pub fn cmd_report(cfg: &RunConfig, replication_mode: bool) -> Result<()> {
    prepare_output(cfg)?;
    let (report, representative) = run_eval(cfg, replication_mode)?;
    let dir = &cfg.output_dir;
    io::write_json(&dir.join(REPORT_JSON), &report)?;
    let series = plot_series(cfg, &representative, replication_mode)?;
    io::write_plot_data_csv(
        &dir.join(PLOT_DATA_CSV),
        &series.values,
        &series.benchmark,
        &series.contributions,
        &series.step_returns,
    )?;
    info!(
        "report: Sharpe {:.3} +/- {:.3} over {} seeds",
        report.sharpe_mean, report.sharpe_std, report.num_eval_seeds
    );
    Ok(())
}

/// Shorthand used by tests: simulate, solve, rollout, report in sequence.
pub fn run_full_pipeline(cfg: &RunConfig, replication_mode: bool) -> Result<()> {
    cmd_simulate(cfg)?;
    cmd_solve(cfg)?;
    cmd_rollout(cfg, replication_mode)?;
    cmd_report(cfg, replication_mode)?;
    Ok(())
}

/// The pipeline module re-exported for binary use.
pub use pipeline::ReportDocument;

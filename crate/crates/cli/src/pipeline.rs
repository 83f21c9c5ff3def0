//! Seeded compositions of the library operations, one per subcommand.
//!
//! Sub-seed layout (see `gport_core::rng::derive_seed`): from the base seed,
//! the main world uses domains `market`/`universe`/`asset-noise` (index 0);
//! trajectory `k` redraws realized returns under `traj-noise`/`k` and samples
//! actions under `trajectory`/`k`; evaluation replication `k` derives a fresh
//! base under `eval`/`k` and repeats the whole pipeline inside it.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use gport_core::analytics::{
    build_report, portfolio_values, sharpe_stats, step_returns, PerformanceReport, SharpeOptions,
};
use gport_core::error::Result;
use gport_core::girl::{girl_fit, FitReport, GirlInputs};
use gport_core::glearner::{
    rollout, solve_portfolio, DynamicsModel, PolicySolution, PriorPolicy, Trajectory,
};
use gport_core::io::SCHEMA_VERSION;
use gport_core::market::{
    realized_returns, simulate_world, AssetUniverse, MarketPath, ReturnsPanel,
};
use gport_core::rng::derive_seed;

use crate::config::RunConfig;

/// One simulated market world.
#[derive(Debug, Clone)]
pub struct World {
    pub market: MarketPath,
    pub universe: AssetUniverse,
    pub panel: ReturnsPanel,
}

/// Simulates market, universe, and return panels from a base seed.
pub fn simulate_world_artifacts(cfg: &RunConfig, base_seed: u64) -> Result<World> {
    let (market, universe, panel) = simulate_world(&cfg.market, base_seed)?;
    Ok(World {
        market,
        universe,
        panel,
    })
}

/// Initial portfolio: `initial_value` split equally across all assets.
pub fn initial_portfolio(cfg: &RunConfig) -> DVector<f64> {
    let n = cfg.market.num_assets();
    DVector::from_element(n, cfg.initial_value / n as f64)
}

pub fn build_prior(cfg: &RunConfig) -> Result<PriorPolicy> {
    PriorPolicy::isotropic(
        cfg.market.num_steps,
        cfg.market.num_assets(),
        cfg.prior_c0,
        cfg.prior_sigma_p,
    )
}

pub fn dynamics_of(cfg: &RunConfig, world: &World) -> DynamicsModel {
    DynamicsModel::from_market(&world.universe, &world.panel, &cfg.market)
}

/// Solves the planner for the configured reward on a simulated world.
pub fn solve_world(cfg: &RunConfig, world: &World) -> Result<PolicySolution> {
    let dynamics = dynamics_of(cfg, world);
    let prior = build_prior(cfg)?;
    solve_portfolio(&cfg.reward, &cfg.benchmark, &dynamics, &prior, &cfg.solver)
}

/// Rolls out `count` trajectories. Each one resamples the idiosyncratic
/// return noise around the shared expected panel (`traj-noise`/k) and uses
/// its own action stream (`trajectory`/k), so the set explores distinct
/// realized-return paths under one policy.
pub fn generate_trajectories(
    cfg: &RunConfig,
    world: &World,
    solution: &PolicySolution,
    count: usize,
    base_seed: u64,
) -> Result<Vec<Trajectory>> {
    let x0 = initial_portfolio(cfg);
    (0..count)
        .map(|k| {
            let realized = realized_returns(
                &world.universe,
                &world.market,
                &world.panel.expected,
                &cfg.market,
                derive_seed(base_seed, "traj-noise", k as u64),
            )?;
            let panel = ReturnsPanel {
                expected: world.panel.expected.clone(),
                realized,
            };
            rollout(
                solution,
                &panel,
                &x0,
                derive_seed(base_seed, "trajectory", k as u64),
            )
        })
        .collect()
}

fn sharpe_options(replication_mode: bool) -> SharpeOptions {
    SharpeOptions {
        contribution_adjusted: !replication_mode,
        annualize_dt: None,
    }
}

/// Performance of every trajectory in a rollout set plus the aggregate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RolloutPerformanceDocument {
    pub schema_version: u32,
    pub per_trajectory: Vec<PerformanceReport>,
    pub sharpe_mean: f64,
    pub sharpe_std: f64,
}

pub fn rollout_performance(
    cfg: &RunConfig,
    trajectories: &[Trajectory],
    replication_mode: bool,
) -> Result<RolloutPerformanceDocument> {
    let opts = sharpe_options(replication_mode);
    let per_trajectory: Vec<PerformanceReport> = trajectories
        .iter()
        .map(|t| build_report(t, &cfg.benchmark, cfg.market.r_f_step(), opts))
        .collect::<Result<_>>()?;
    let (mean, std) = mean_std(&per_trajectory.iter().map(|r| r.sharpe).collect::<Vec<_>>());
    Ok(RolloutPerformanceDocument {
        schema_version: SCHEMA_VERSION,
        per_trajectory,
        sharpe_mean: mean,
        sharpe_std: std,
    })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregated evaluation: independent full replications of the pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub num_eval_seeds: usize,
    pub sharpe_mean: f64,
    pub sharpe_std: f64,
    pub per_seed_sharpe: Vec<f64>,
    /// Performance of the first evaluation seed's trajectory.
    pub representative: PerformanceReport,
}

/// Plot-ready series from one trajectory.
#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub values: Vec<f64>,
    pub benchmark: Vec<f64>,
    pub contributions: Vec<f64>,
    pub step_returns: Vec<f64>,
}

pub fn plot_series(cfg: &RunConfig, traj: &Trajectory, replication_mode: bool) -> Result<PlotSeries> {
    let values = portfolio_values(traj);
    let benchmark = (0..values.len()).map(|t| cfg.benchmark.value_at(t)).collect();
    let returns = step_returns(&values, &traj.contributions, !replication_mode)?;
    Ok(PlotSeries {
        values,
        benchmark,
        contributions: traj.contributions.clone(),
        step_returns: returns,
    })
}

/// One full replication: fresh world, fresh solve, one rollout, one Sharpe.
pub fn replicate_once(
    cfg: &RunConfig,
    eval_base: u64,
    replication_mode: bool,
) -> Result<(f64, Trajectory)> {
    let world = simulate_world_artifacts(cfg, eval_base)?;
    let solution = solve_world(cfg, &world)?;
    let x0 = initial_portfolio(cfg);
    let traj = rollout(
        &solution,
        &world.panel,
        &x0,
        derive_seed(eval_base, "trajectory", 0),
    )?;
    let values = portfolio_values(&traj);
    let (sharpe, _, _) = sharpe_stats(
        &values,
        &traj.contributions,
        cfg.market.r_f_step(),
        sharpe_options(replication_mode),
    )?;
    Ok((sharpe, traj))
}

/// Runs `num_eval_seeds` independent replications and aggregates the Sharpe
/// ratio. Returns the report plus the first seed's trajectory for plotting.
pub fn run_eval(cfg: &RunConfig, replication_mode: bool) -> Result<(ReportDocument, Trajectory)> {
    let mut per_seed = Vec::with_capacity(cfg.num_eval_seeds);
    let mut first: Option<Trajectory> = None;
    for k in 0..cfg.num_eval_seeds {
        let eval_base = derive_seed(cfg.base_seed, "eval", k as u64);
        let (sharpe, traj) = replicate_once(cfg, eval_base, replication_mode)?;
        per_seed.push(sharpe);
        if first.is_none() {
            first = Some(traj);
        }
    }
    let (mean, std) = mean_std(&per_seed);
    let representative_traj = first.expect("num_eval_seeds >= 1");
    let representative = build_report(
        &representative_traj,
        &cfg.benchmark,
        cfg.market.r_f_step(),
        sharpe_options(replication_mode),
    )?;
    Ok((
        ReportDocument {
            schema_version: SCHEMA_VERSION,
            num_eval_seeds: cfg.num_eval_seeds,
            sharpe_mean: mean,
            sharpe_std: std,
            per_seed_sharpe: per_seed,
            representative,
        },
        representative_traj,
    ))
}

/// Fits the reward parameters to a trajectory set; the world supplies the
/// expected panel and covariance shared by generation and inference.
pub fn run_girl(
    cfg: &RunConfig,
    world: &World,
    trajectories: &[Trajectory],
    replication_mode: bool,
) -> Result<FitReport> {
    let dynamics = dynamics_of(cfg, world);
    let prior = build_prior(cfg)?;
    let mut inputs = GirlInputs::new(&dynamics, &cfg.benchmark, &prior, &cfg.solver);
    inputs.include_prior_term = !replication_mode;
    girl_fit(trajectories, &cfg.girl, &inputs)
}

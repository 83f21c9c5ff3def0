//! Portfolio performance metrics and benchmark comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glearner::Trajectory;
use crate::reward::BenchmarkSpec;

/// Summary of one trajectory's performance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub sharpe: f64,
    /// Mean per-step excess return.
    pub mean_excess_return: f64,
    /// Sample standard deviation of per-step excess returns.
    pub return_volatility: f64,
    pub total_contributions: f64,
    pub final_value: f64,
    pub benchmark_final: f64,
    /// `B_T - v_T`: positive when the portfolio finishes under the goal.
    pub goal_gap: f64,
}

/// How per-step returns feed the Sharpe ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpeOptions {
    /// Subtract each step's cash contribution from the value change, so
    /// deposits do not masquerade as performance. Disable for the naive
    /// `v_{t+1}/v_t - 1` variant.
    pub contribution_adjusted: bool,
    /// Multiply the ratio by `sqrt(1/dt)` when set.
    pub annualize_dt: Option<f64>,
}

impl Default for SharpeOptions {
    fn default() -> Self {
        SharpeOptions {
            contribution_adjusted: true,
            annualize_dt: None,
        }
    }
}

/// Portfolio value series `v_t = 1'x_t`.
pub fn portfolio_values(traj: &Trajectory) -> Vec<f64> {
    traj.states.iter().map(|x| x.sum()).collect()
}

/// Per-step portfolio returns,
/// `r_p[t] = (v[t+1] - c[t]) / v[t] - 1` (contribution-adjusted) or
/// `v[t+1]/v[t] - 1` (naive).
pub fn step_returns(
    values: &[f64],
    contributions: &[f64],
    contribution_adjusted: bool,
) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::Usage("need at least two portfolio values".into()));
    }
    if contributions.len() != values.len() - 1 {
        return Err(Error::Shape(format!(
            "{} contributions for {} values; expected one per step",
            contributions.len(),
            values.len()
        )));
    }
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Usage("portfolio values must be strictly positive".into()));
    }
    Ok(values
        .windows(2)
        .zip(contributions)
        .map(|(w, c)| {
            let adjusted = if contribution_adjusted { w[1] - c } else { w[1] };
            adjusted / w[0] - 1.0
        })
        .collect())
}

/// Sharpe ratio plus the mean/volatility behind it.
pub fn sharpe_stats(
    values: &[f64],
    contributions: &[f64],
    r_f_step: f64,
    opts: SharpeOptions,
) -> Result<(f64, f64, f64)> {
    if values.len() < 3 {
        return Err(Error::Usage(format!(
            "Sharpe ratio needs at least 3 values (2 returns), got {}",
            values.len()
        )));
    }
    let returns = step_returns(values, contributions, opts.contribution_adjusted)?;
    let excess: Vec<f64> = returns.iter().map(|r| r - r_f_step).collect();
    let n = excess.len() as f64;
    let mean = excess.iter().sum::<f64>() / n;
    let var = excess.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    if std == 0.0 || !std.is_finite() {
        return Err(Error::UndefinedSharpe);
    }
    let scale = match opts.annualize_dt {
        Some(dt) => (1.0 / dt).sqrt(),
        None => 1.0,
    };
    Ok((scale * mean / std, mean, std))
}

/// Per-step Sharpe ratio on contribution-adjusted returns.
pub fn sharpe_ratio(values: &[f64], contributions: &[f64], r_f_step: f64) -> Result<f64> {
    sharpe_stats(values, contributions, r_f_step, SharpeOptions::default()).map(|(s, _, _)| s)
}

/// Benchmark series and goal gap for a value series of length T+1.
pub fn compare_to_benchmark(values: &[f64], bench: &BenchmarkSpec) -> (f64, f64) {
    let horizon = values.len().saturating_sub(1);
    let benchmark_final = bench.value_at(horizon);
    let goal_gap = benchmark_final - values[values.len() - 1];
    (benchmark_final, goal_gap)
}

/// Full performance report for one trajectory.
pub fn build_report(
    traj: &Trajectory,
    bench: &BenchmarkSpec,
    r_f_step: f64,
    opts: SharpeOptions,
) -> Result<PerformanceReport> {
    let values = portfolio_values(traj);
    let (sharpe, mean_excess, vol) = sharpe_stats(&values, &traj.contributions, r_f_step, opts)?;
    let (benchmark_final, goal_gap) = compare_to_benchmark(&values, bench);
    Ok(PerformanceReport {
        sharpe,
        mean_excess_return: mean_excess,
        return_volatility: vol,
        total_contributions: traj.contributions.iter().sum(),
        final_value: values[values.len() - 1],
        benchmark_final,
        goal_gap,
    })
}

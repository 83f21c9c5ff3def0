//! The flat run-configuration file.
//!
//! Format: one `section.key = value` assignment per line, `#` comments,
//! blank lines ignored. Unknown keys are rejected so typos fail loudly.
//! Omitted keys fall back to the defaults listed in the README; some
//! defaults are derived from other keys:
//!
//! - `benchmark.b0` defaults to `portfolio.initial_value`
//! - `prior.sigma_p` defaults to 10% of the initial per-asset position
//! - `girl.theta0_*` default to the reward parameters perturbed by
//!   x2 (lambda, omega) and /2 (eta, rho)

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gport_core::error::{Error, Result};
use gport_core::girl::GirlConfig;
use gport_core::glearner::SolverConfig;
use gport_core::market::MarketConfig;
use gport_core::reward::{BenchmarkSpec, RewardParams};

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub market: MarketConfig,
    pub reward: RewardParams,
    pub benchmark: BenchmarkSpec,
    /// Total initial wealth, split equally across all assets.
    pub initial_value: f64,
    /// Nominal per-step contribution of the prior policy.
    pub prior_c0: f64,
    /// Standard deviation of the isotropic prior action noise.
    pub prior_sigma_p: f64,
    pub solver: SolverConfig,
    pub girl: GirlConfig,
    pub base_seed: u64,
    pub num_trajectories: usize,
    pub num_eval_seeds: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    /// Reference experiment: the default market, theta = (0.002, 1.3, 0.5,
    /// 1.1), a $1000 equally-split portfolio, and a GIRL start perturbed by
    /// x2 / /2 per coordinate.
    fn default() -> Self {
        let market = MarketConfig::default();
        let reward = RewardParams::reference();
        let initial_value = 1000.0;
        let girl_theta0 = RewardParams {
            lambda: reward.lambda * 2.0,
            eta: reward.eta / 2.0,
            rho: reward.rho / 2.0,
            omega: reward.omega * 2.0,
        };
        RunConfig {
            benchmark: BenchmarkSpec {
                b0: initial_value,
                growth: DEFAULT_BENCHMARK_GROWTH,
            },
            initial_value,
            prior_c0: 0.0,
            prior_sigma_p: default_prior_sigma_p(initial_value, market.num_assets()),
            solver: SolverConfig::default(),
            girl: GirlConfig {
                learning_rate: 1e-7,
                grad_eps: 1e-4,
                max_iter: 150,
                tol: 1e-4,
                theta0: girl_theta0,
            },
            base_seed: 42,
            num_trajectories: 100,
            num_eval_seeds: 50,
            output_dir: PathBuf::from("out"),
            market,
            reward,
        }
    }
}

/// Default per-step benchmark growth. A 5% quarterly target keeps the
/// benchmark on the same scale as the portfolio over a 25-step horizon;
/// growth rates on the order of `eta - 1` compound the target out of reach
/// of any feasible contribution schedule and destroy the conditioning of
/// the inverse fit.
pub const DEFAULT_BENCHMARK_GROWTH: f64 = 0.05;

fn default_prior_sigma_p(initial_value: f64, num_assets: usize) -> f64 {
    0.1 * initial_value / num_assets as f64
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        self.reward.validate()?;
        BenchmarkSpec::new(self.benchmark.b0, self.benchmark.growth)?;
        self.solver.validate()?;
        self.girl.validate()?;
        if !(self.initial_value > 0.0) {
            return Err(Error::Config(format!(
                "portfolio.initial_value must be > 0, got {}",
                self.initial_value
            )));
        }
        if !(self.prior_sigma_p > 0.0) {
            return Err(Error::Config(format!(
                "prior.sigma_p must be > 0, got {}",
                self.prior_sigma_p
            )));
        }
        if self.num_trajectories < 1 {
            return Err(Error::Config("seeds.num_trajectories must be >= 1".into()));
        }
        if self.num_eval_seeds < 1 {
            return Err(Error::Config("seeds.num_eval_seeds must be >= 1".into()));
        }
        Ok(())
    }

    /// Parses the flat key/value text, starting from the defaults.
    pub fn parse(text: &str, origin: &str) -> Result<RunConfig> {
        let mut assignments: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_string(),
                line: idx + 1,
                msg: format!("expected `section.key = value`, got {raw:?}"),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if assignments.insert(key.clone(), (idx + 1, value)).is_some() {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line: idx + 1,
                    msg: format!("duplicate key {key}"),
                });
            }
        }

        let mut cfg = RunConfig::default();
        // Derived defaults are recomputed after parsing unless set.
        let mut explicit_b0 = false;
        let mut explicit_sigma_p = false;
        let mut explicit_theta0 = [false; 4];

        for (key, (line, value)) in &assignments {
            let line = *line;
            let err = |msg: String| Error::Parse {
                path: origin.to_string(),
                line,
                msg,
            };
            let f = || -> Result<f64> {
                value
                    .parse::<f64>()
                    .map_err(|_| err(format!("{key}: bad float {value:?}")))
            };
            let us = || -> Result<usize> {
                value
                    .parse::<usize>()
                    .map_err(|_| err(format!("{key}: bad integer {value:?}")))
            };
            let u64v = || -> Result<u64> {
                value
                    .parse::<u64>()
                    .map_err(|_| err(format!("{key}: bad seed {value:?}")))
            };
            match key.as_str() {
                "market.mu_m" => cfg.market.mu_m = f()?,
                "market.sigma_m" => cfg.market.sigma_m = f()?,
                "market.s0" => cfg.market.s0 = f()?,
                "market.r_f" => cfg.market.r_f = f()?,
                "market.num_steps" => cfg.market.num_steps = us()?,
                "market.dt" => cfg.market.dt = f()?,
                "market.num_risky" => cfg.market.num_risky = us()?,
                "market.oracle_c" => cfg.market.oracle_c = f()?,
                "market.sigma_idio" => cfg.market.sigma_idio = f()?,
                "reward.lambda" => cfg.reward.lambda = f()?,
                "reward.eta" => cfg.reward.eta = f()?,
                "reward.rho" => cfg.reward.rho = f()?,
                "reward.omega" => cfg.reward.omega = f()?,
                "benchmark.b0" => {
                    cfg.benchmark.b0 = f()?;
                    explicit_b0 = true;
                }
                "benchmark.growth" => cfg.benchmark.growth = f()?,
                "portfolio.initial_value" => cfg.initial_value = f()?,
                "prior.c0" => cfg.prior_c0 = f()?,
                "prior.sigma_p" => {
                    cfg.prior_sigma_p = f()?;
                    explicit_sigma_p = true;
                }
                "solver.beta" => cfg.solver.beta = f()?,
                "solver.gamma" => cfg.solver.gamma = f()?,
                "solver.max_iter" => cfg.solver.max_iter = us()?,
                "solver.eps" => cfg.solver.eps = f()?,
                "girl.learning_rate" => cfg.girl.learning_rate = f()?,
                "girl.grad_eps" => cfg.girl.grad_eps = f()?,
                "girl.max_iter" => cfg.girl.max_iter = us()?,
                "girl.tol" => cfg.girl.tol = f()?,
                "girl.theta0_lambda" => {
                    cfg.girl.theta0.lambda = f()?;
                    explicit_theta0[0] = true;
                }
                "girl.theta0_eta" => {
                    cfg.girl.theta0.eta = f()?;
                    explicit_theta0[1] = true;
                }
                "girl.theta0_rho" => {
                    cfg.girl.theta0.rho = f()?;
                    explicit_theta0[2] = true;
                }
                "girl.theta0_omega" => {
                    cfg.girl.theta0.omega = f()?;
                    explicit_theta0[3] = true;
                }
                "seeds.base" => cfg.base_seed = u64v()?,
                "seeds.num_trajectories" => cfg.num_trajectories = us()?,
                "seeds.num_eval_seeds" => cfg.num_eval_seeds = us()?,
                "output.dir" => cfg.output_dir = PathBuf::from(value),
                other => return Err(err(format!("unknown key {other}"))),
            }
        }

        if !explicit_b0 {
            cfg.benchmark.b0 = cfg.initial_value;
        }
        if !explicit_sigma_p {
            cfg.prior_sigma_p = default_prior_sigma_p(cfg.initial_value, cfg.market.num_assets());
        }
        if !explicit_theta0[0] {
            cfg.girl.theta0.lambda = cfg.reward.lambda * 2.0;
        }
        if !explicit_theta0[1] {
            cfg.girl.theta0.eta = cfg.reward.eta / 2.0;
        }
        if !explicit_theta0[2] {
            cfg.girl.theta0.rho = cfg.reward.rho / 2.0;
        }
        if !explicit_theta0[3] {
            cfg.girl.theta0.omega = cfg.reward.omega * 2.0;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        RunConfig::parse(&text, &path.display().to_string())
    }

    /// Serializes every resolved key, so the echo alone reproduces the run.
    pub fn to_flat(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "market.mu_m = {}", self.market.mu_m);
        let _ = writeln!(s, "market.sigma_m = {}", self.market.sigma_m);
        let _ = writeln!(s, "market.s0 = {}", self.market.s0);
        let _ = writeln!(s, "market.r_f = {}", self.market.r_f);
        let _ = writeln!(s, "market.num_steps = {}", self.market.num_steps);
        let _ = writeln!(s, "market.dt = {}", self.market.dt);
        let _ = writeln!(s, "market.num_risky = {}", self.market.num_risky);
        let _ = writeln!(s, "market.oracle_c = {}", self.market.oracle_c);
        let _ = writeln!(s, "market.sigma_idio = {}", self.market.sigma_idio);
        let _ = writeln!(s, "reward.lambda = {}", self.reward.lambda);
        let _ = writeln!(s, "reward.eta = {}", self.reward.eta);
        let _ = writeln!(s, "reward.rho = {}", self.reward.rho);
        let _ = writeln!(s, "reward.omega = {}", self.reward.omega);
        let _ = writeln!(s, "benchmark.b0 = {}", self.benchmark.b0);
        let _ = writeln!(s, "benchmark.growth = {}", self.benchmark.growth);
        let _ = writeln!(s, "portfolio.initial_value = {}", self.initial_value);
        let _ = writeln!(s, "prior.c0 = {}", self.prior_c0);
        let _ = writeln!(s, "prior.sigma_p = {}", self.prior_sigma_p);
        let _ = writeln!(s, "solver.beta = {}", self.solver.beta);
        let _ = writeln!(s, "solver.gamma = {}", self.solver.gamma);
        let _ = writeln!(s, "solver.max_iter = {}", self.solver.max_iter);
        let _ = writeln!(s, "solver.eps = {}", self.solver.eps);
        let _ = writeln!(s, "girl.learning_rate = {}", self.girl.learning_rate);
        let _ = writeln!(s, "girl.grad_eps = {}", self.girl.grad_eps);
        let _ = writeln!(s, "girl.max_iter = {}", self.girl.max_iter);
        let _ = writeln!(s, "girl.tol = {}", self.girl.tol);
        let _ = writeln!(s, "girl.theta0_lambda = {}", self.girl.theta0.lambda);
        let _ = writeln!(s, "girl.theta0_eta = {}", self.girl.theta0.eta);
        let _ = writeln!(s, "girl.theta0_rho = {}", self.girl.theta0.rho);
        let _ = writeln!(s, "girl.theta0_omega = {}", self.girl.theta0.omega);
        let _ = writeln!(s, "seeds.base = {}", self.base_seed);
        let _ = writeln!(s, "seeds.num_trajectories = {}", self.num_trajectories);
        let _ = writeln!(s, "seeds.num_eval_seeds = {}", self.num_eval_seeds);
        let _ = writeln!(s, "output.dir = {}", self.output_dir.display());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_experiment() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.market.mu_m, 0.05);
        assert_eq!(cfg.market.sigma_m, 0.25);
        assert_eq!(cfg.market.s0, 100.0);
        assert_eq!(cfg.market.r_f, 0.02);
        assert_eq!(cfg.market.num_steps, 25);
        assert_eq!(cfg.market.dt, 0.25);
        assert_eq!(cfg.market.num_risky, 99);
        assert_eq!(cfg.reward, RewardParams::reference());
        assert_eq!(cfg.benchmark.b0, 1000.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn parse_round_trips_through_flat_text() {
        let cfg = RunConfig::default();
        let text = cfg.to_flat();
        let back = RunConfig::parse(&text, "inline").unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("market.mu = 0.05\n", "inline");
        assert!(matches!(err, Err(Error::Parse { .. })));
    }

    #[test]
    fn derived_defaults_follow_their_sources() {
        let cfg = RunConfig::parse(
            "portfolio.initial_value = 500\nmarket.num_risky = 4\nreward.eta = 1.2\n",
            "inline",
        )
        .unwrap();
        assert_eq!(cfg.benchmark.b0, 500.0);
        assert_eq!(cfg.benchmark.growth, DEFAULT_BENCHMARK_GROWTH);
        assert!((cfg.prior_sigma_p - 0.1 * 500.0 / 5.0).abs() < 1e-12);
        assert!((cfg.girl.theta0.eta - 0.6).abs() < 1e-12);

        let cfg = RunConfig::parse("benchmark.growth = 0.01\nprior.sigma_p = 3\n", "inline").unwrap();
        assert_eq!(cfg.benchmark.growth, 0.01);
        assert_eq!(cfg.prior_sigma_p, 3.0);
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let cfg = RunConfig::parse(
            "# a comment\n\nmarket.mu_m = 0.07  # trailing comment\n",
            "inline",
        )
        .unwrap();
        assert_eq!(cfg.market.mu_m, 0.07);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        assert!(RunConfig::parse("reward.lambda = -1\n", "inline").is_err());
        assert!(RunConfig::parse("market.dt = 0\n", "inline").is_err());
    }
}

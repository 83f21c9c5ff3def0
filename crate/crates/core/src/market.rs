//! Synthetic market: GBM market factor, one-factor risky-asset universe,
//! and per-step expected/realized return panels.
//!
//! Asset 0 is always the risk-free bond with deterministic per-step return
//! `r_f * dt`. The `num_risky` remaining assets follow a one-factor model:
//!
//! ```text
//! r_bar[t,i] = alpha[i] + beta0[i] * ((1-c) * mu_M * dt + c * r_M[t])
//! r[t,i]     = r_bar[t,i] + beta0[i] * (r_M[t] - mu_M * dt)
//!              + sigma_i * sqrt(1 - beta0[i]^2) * sqrt(dt) * W[t,i]
//! ```
//!
//! with the market step return `r_M[t] = mu_M * dt + sigma_M * sqrt(dt) * Z[t]`
//! sharing its normal draw with the GBM value path.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Uniform sampling range for per-step excess drift `alpha`.
pub const ALPHA_RANGE: (f64, f64) = (-0.05, 0.15);
/// Uniform sampling range for market loading `beta0`.
pub const BETA0_RANGE: (f64, f64) = (0.05, 0.85);

/// Market and asset-universe parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    /// Annual market drift.
    pub mu_m: f64,
    /// Annual market volatility.
    pub sigma_m: f64,
    /// Initial market value.
    pub s0: f64,
    /// Per-annum risk-free rate.
    pub r_f: f64,
    /// Horizon T (number of steps).
    pub num_steps: usize,
    /// Time increment in years.
    pub dt: f64,
    /// Number of risky assets (N - 1).
    pub num_risky: usize,
    /// CAPM blend coefficient c in [0, 1] between unconditional drift and
    /// the realized market return.
    pub oracle_c: f64,
    /// Annual idiosyncratic volatility, shared by all risky assets.
    pub sigma_idio: f64,
}

impl Default for MarketConfig {
    /// Reference market: quarterly steps over ~6 years, 99 risky assets.
    fn default() -> Self {
        MarketConfig {
            mu_m: 0.05,
            sigma_m: 0.25,
            s0: 100.0,
            r_f: 0.02,
            num_steps: 25,
            dt: 0.25,
            num_risky: 99,
            oracle_c: 0.2,
            sigma_idio: 0.05,
        }
    }
}

impl MarketConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_m > 0.0 || self.sigma_m == 0.0) || self.sigma_m < 0.0 {
            return Err(Error::Config(format!("sigma_m must be >= 0, got {}", self.sigma_m)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.num_steps < 1 {
            return Err(Error::Config("num_steps must be >= 1".into()));
        }
        if self.num_risky < 1 {
            return Err(Error::Config("num_risky must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.oracle_c) {
            return Err(Error::Config(format!(
                "oracle_c must lie in [0, 1], got {}",
                self.oracle_c
            )));
        }
        if !(self.s0 > 0.0) {
            return Err(Error::Config(format!("s0 must be > 0, got {}", self.s0)));
        }
        if self.sigma_idio < 0.0 {
            return Err(Error::Config(format!(
                "sigma_idio must be >= 0, got {}",
                self.sigma_idio
            )));
        }
        for (name, v) in [
            ("mu_m", self.mu_m),
            ("sigma_m", self.sigma_m),
            ("s0", self.s0),
            ("r_f", self.r_f),
            ("dt", self.dt),
            ("oracle_c", self.oracle_c),
            ("sigma_idio", self.sigma_idio),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Total asset count N (bond + risky).
    pub fn num_assets(&self) -> usize {
        self.num_risky + 1
    }

    /// Deterministic per-step bond return `r_f * dt`.
    pub fn r_f_step(&self) -> f64 {
        self.r_f * self.dt
    }
}

/// A simulated market-factor path.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketPath {
    /// Market values `S_t`, length T+1, strictly positive.
    pub values: Vec<f64>,
    /// Per-step market returns `r_M[t] = mu_M*dt + sigma_M*sqrt(dt)*Z_t`,
    /// length T, sharing `Z_t` with the value path.
    pub returns: Vec<f64>,
}

impl MarketPath {
    pub fn num_steps(&self) -> usize {
        self.returns.len()
    }
}

/// Simulates the GBM market factor.
///
/// `values[t+1] = values[t] * exp((mu - sigma^2/2)*dt + sigma*sqrt(dt)*Z_t)`.
pub fn simulate_market(config: &MarketConfig, seed: u64) -> Result<MarketPath> {
    config.validate()?;
    let mut rng = rng_from_seed(seed);
    let sqrt_dt = config.dt.sqrt();
    let log_drift = (config.mu_m - 0.5 * config.sigma_m * config.sigma_m) * config.dt;

    let mut values = Vec::with_capacity(config.num_steps + 1);
    let mut returns = Vec::with_capacity(config.num_steps);
    values.push(config.s0);
    for t in 0..config.num_steps {
        let z: f64 = rng.sample(StandardNormal);
        let shock = config.sigma_m * sqrt_dt * z;
        values.push(values[t] * (log_drift + shock).exp());
        returns.push(config.mu_m * config.dt + shock);
    }
    Ok(MarketPath { values, returns })
}

/// The risky-asset universe: per-asset drift and market loading plus the
/// derived per-step covariance of risky returns.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetUniverse {
    /// Per-step excess drift, one entry per risky asset.
    pub alpha: DVector<f64>,
    /// Market loading, one entry per risky asset.
    pub beta0: DVector<f64>,
    /// Annual idiosyncratic volatility (shared scalar).
    pub sigma_idio: f64,
    /// Per-step covariance of risky returns, (N-1) x (N-1).
    pub sigma_r: DMatrix<f64>,
}

/// Draws `alpha` and `beta0` i.i.d. uniform on their ranges and builds the
/// implied return covariance.
pub fn draw_universe(config: &MarketConfig, seed: u64) -> Result<AssetUniverse> {
    config.validate()?;
    let mut rng = rng_from_seed(seed);
    let n_risky = config.num_risky;
    // alpha first, then beta0, each in asset order.
    let alpha = DVector::from_fn(n_risky, |_, _| rng.random_range(ALPHA_RANGE.0..ALPHA_RANGE.1));
    let beta0 = DVector::from_fn(n_risky, |_, _| rng.random_range(BETA0_RANGE.0..BETA0_RANGE.1));
    let sigma_r = build_covariance(&beta0, config.sigma_idio, config)?;
    Ok(AssetUniverse {
        alpha,
        beta0,
        sigma_idio: config.sigma_idio,
        sigma_r,
    })
}

/// Per-step covariance of risky returns implied by the one-factor model:
///
/// `Sigma_r = sigma_M^2 * dt * beta0 beta0^T
///            + dt * diag(sigma_i^2 * (1 - beta0_i^2))`.
pub fn build_covariance(
    beta0: &DVector<f64>,
    sigma_idio: f64,
    config: &MarketConfig,
) -> Result<DMatrix<f64>> {
    if !sigma_idio.is_finite() || beta0.iter().any(|b| !b.is_finite()) {
        return Err(Error::Numeric("non-finite input to covariance".into()));
    }
    let factor_var = config.sigma_m * config.sigma_m * config.dt;
    let mut cov = beta0 * beta0.transpose() * factor_var;
    for i in 0..beta0.len() {
        let b = beta0[i];
        cov[(i, i)] += config.dt * sigma_idio * sigma_idio * (1.0 - b * b);
    }
    Ok(cov)
}

/// T x N panels of expected and realized per-step returns; column 0 is the
/// deterministic bond.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    pub expected: DMatrix<f64>,
    pub realized: DMatrix<f64>,
}

impl ReturnsPanel {
    pub fn num_steps(&self) -> usize {
        self.expected.nrows()
    }

    pub fn num_assets(&self) -> usize {
        self.expected.ncols()
    }

    /// Expected return vector at step `t` (length N).
    pub fn expected_at(&self, t: usize) -> DVector<f64> {
        self.expected.row(t).transpose()
    }

    /// Realized return vector at step `t` (length N).
    pub fn realized_at(&self, t: usize) -> DVector<f64> {
        self.realized.row(t).transpose()
    }
}

/// Expected per-step returns: bond column `r_f * dt`, risky columns from
/// the CAPM blend with oracle coefficient `c`.
pub fn expected_returns(
    universe: &AssetUniverse,
    path: &MarketPath,
    config: &MarketConfig,
) -> Result<DMatrix<f64>> {
    if path.num_steps() != config.num_steps {
        return Err(Error::Shape(format!(
            "market path has {} steps, config expects {}",
            path.num_steps(),
            config.num_steps
        )));
    }
    if universe.alpha.len() != config.num_risky {
        return Err(Error::Shape(format!(
            "universe has {} risky assets, config expects {}",
            universe.alpha.len(),
            config.num_risky
        )));
    }
    let t_steps = config.num_steps;
    let n = config.num_assets();
    let c = config.oracle_c;
    let drift_step = config.mu_m * config.dt;
    let mut expected = DMatrix::zeros(t_steps, n);
    for t in 0..t_steps {
        expected[(t, 0)] = config.r_f_step();
        let blend = (1.0 - c) * drift_step + c * path.returns[t];
        for i in 0..config.num_risky {
            expected[(t, i + 1)] = universe.alpha[i] + universe.beta0[i] * blend;
        }
    }
    Ok(expected)
}

/// Realized per-step returns: expected plus the market surprise scaled by
/// `beta0` plus idiosyncratic noise. The bond column is copied from
/// `expected`. Noise draws are ordered step-major, asset-minor.
pub fn realized_returns(
    universe: &AssetUniverse,
    path: &MarketPath,
    expected: &DMatrix<f64>,
    config: &MarketConfig,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if expected.nrows() != config.num_steps || expected.ncols() != config.num_assets() {
        return Err(Error::Shape(format!(
            "expected panel is {}x{}, config expects {}x{}",
            expected.nrows(),
            expected.ncols(),
            config.num_steps,
            config.num_assets()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let sqrt_dt = config.dt.sqrt();
    let drift_step = config.mu_m * config.dt;
    let mut realized = expected.clone();
    for t in 0..config.num_steps {
        let surprise = path.returns[t] - drift_step;
        for i in 0..config.num_risky {
            let b = universe.beta0[i];
            let w: f64 = rng.sample(StandardNormal);
            let idio = universe.sigma_idio * (1.0 - b * b).max(0.0).sqrt() * sqrt_dt * w;
            realized[(t, i + 1)] += b * surprise + idio;
        }
    }
    Ok(realized)
}

/// Convenience: simulate the market, draw the universe, and build both
/// return panels from derived sub-seeds of `base_seed`.
pub fn simulate_world(
    config: &MarketConfig,
    base_seed: u64,
) -> Result<(MarketPath, AssetUniverse, ReturnsPanel)> {
    use crate::rng::derive_seed;
    let path = simulate_market(config, derive_seed(base_seed, "market", 0))?;
    let universe = draw_universe(config, derive_seed(base_seed, "universe", 0))?;
    let expected = expected_returns(&universe, &path, config)?;
    let realized = realized_returns(
        &universe,
        &path,
        &expected,
        config,
        derive_seed(base_seed, "asset-noise", 0),
    )?;
    Ok((path, universe, ReturnsPanel { expected, realized }))
}

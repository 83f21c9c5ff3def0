//! Target-tracking quadratic reward.
//!
//! One step of the planner earns
//!
//! ```text
//! R(x, u) = -1'u - lambda * E[(P_hat - (1+r)'(x+u))^2] - omega * u'u
//! ```
//!
//! where the target is a blend of an exogenous benchmark and scaled current
//! wealth, `P_hat = (1-rho) * B_t + rho * eta * 1'x`, and the expectation
//! over next-step returns is evaluated analytically. Expanding in `(x, u)`
//! gives the six quadratic blocks of [`QuadReward`]; both routes are kept
//! and cross-checked in tests.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{embed_risky_block, quad_form, symmetrized};

/// Free parameters of the reward, `theta = (lambda, eta, rho, omega)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    /// Target-shortfall penalty weight (1/currency^2).
    pub lambda: f64,
    /// Desired per-step portfolio growth factor.
    pub eta: f64,
    /// Benchmark blend weight in [0, 1].
    pub rho: f64,
    /// Transaction-cost scalar; the cost matrix is `omega * I`.
    pub omega: f64,
}

impl RewardParams {
    pub fn new(lambda: f64, eta: f64, rho: f64, omega: f64) -> Result<Self> {
        let params = RewardParams {
            lambda,
            eta,
            rho,
            omega,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.eta > 0.0) {
            return Err(Error::Config(format!("eta must be > 0, got {}", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        if !(self.omega > 0.0) {
            return Err(Error::Config(format!("omega must be > 0, got {}", self.omega)));
        }
        Ok(())
    }

    /// Reference configuration used throughout the experiments.
    pub fn reference() -> Self {
        RewardParams {
            lambda: 0.002,
            eta: 1.3,
            rho: 0.5,
            omega: 1.1,
        }
    }
}

/// Exogenous benchmark series `B_t = b0 * (1 + growth)^t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    /// Initial benchmark value.
    pub b0: f64,
    /// Per-step growth rate.
    pub growth: f64,
}

impl BenchmarkSpec {
    pub fn new(b0: f64, growth: f64) -> Result<Self> {
        if !(b0 > 0.0) {
            return Err(Error::Config(format!("benchmark b0 must be > 0, got {b0}")));
        }
        if !growth.is_finite() {
            return Err(Error::Config(format!("benchmark growth must be finite, got {growth}")));
        }
        Ok(BenchmarkSpec { b0, growth })
    }

    pub fn value_at(&self, t: usize) -> f64 {
        self.b0 * (1.0 + self.growth).powi(t as i32)
    }
}

/// Quadratic coefficient blocks of the one-step reward,
/// `R(x,u) = x'r_xx x + u'r_ux x + u'r_uu u + x'r_x + u'r_u + r_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadReward {
    pub r_xx: DMatrix<f64>,
    pub r_ux: DMatrix<f64>,
    pub r_uu: DMatrix<f64>,
    pub r_x: DVector<f64>,
    pub r_u: DVector<f64>,
    pub r_0: f64,
}

impl QuadReward {
    pub fn dim(&self) -> usize {
        self.r_x.len()
    }
}

/// Target value `P_hat = (1-rho) * b_t + rho * eta * 1'x`.
pub fn target_value(x: &DVector<f64>, b_t: f64, params: &RewardParams) -> f64 {
    (1.0 - params.rho) * b_t + params.rho * params.eta * x.sum()
}

/// Second-moment matrix of gross next-step returns:
/// `Sigma_hat = [[0,0],[0,Sigma_r]] + (1+rbar)(1+rbar)'`.
pub fn sigma_hat(rbar_t: &DVector<f64>, sigma_r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = rbar_t.len();
    if sigma_r.nrows() != n - 1 || sigma_r.ncols() != n - 1 {
        return Err(Error::Shape(format!(
            "sigma_r is {}x{}, expected {}x{} for {n} assets",
            sigma_r.nrows(),
            sigma_r.ncols(),
            n - 1,
            n - 1
        )));
    }
    let gross = rbar_t.add_scalar(1.0);
    Ok(embed_risky_block(sigma_r, n) + &gross * gross.transpose())
}

/// Assembles the six coefficient blocks for one timestep.
pub fn reward_coeffs(
    params: &RewardParams,
    rbar_t: &DVector<f64>,
    sigma_r: &DMatrix<f64>,
    b_t: f64,
) -> Result<QuadReward> {
    params.validate()?;
    let n = rbar_t.len();
    let lambda = params.lambda;
    let eta = params.eta;
    let rho = params.rho;
    let gross = rbar_t.add_scalar(1.0);
    let ones = DVector::from_element(n, 1.0);
    let s_hat = sigma_hat(rbar_t, sigma_r)?;

    let gross_ones_t = &gross * ones.transpose();
    let r_xx = symmetrized(
        &(DMatrix::from_element(n, n, -lambda * eta * eta * rho * rho)
            + &gross_ones_t * (2.0 * lambda * eta * rho)
            - &s_hat * lambda),
    );
    let r_ux = &gross_ones_t * (2.0 * lambda * eta * rho) - &s_hat * (2.0 * lambda);
    let r_uu = symmetrized(&(-&s_hat * lambda - DMatrix::identity(n, n) * params.omega));
    let bench_pull = 2.0 * lambda * (1.0 - rho) * b_t;
    let r_x = &ones * (-bench_pull * eta * rho) + &gross * bench_pull;
    let r_u = &ones * -1.0 + &gross * bench_pull;
    let r_0 = -lambda * (1.0 - rho) * (1.0 - rho) * b_t * b_t;

    Ok(QuadReward {
        r_xx,
        r_ux,
        r_uu,
        r_x,
        r_u,
        r_0,
    })
}

/// One-step rewards for every timestep of a horizon, with the benchmark
/// evaluated at each step.
pub fn build_rewards(
    params: &RewardParams,
    expected: &[DVector<f64>],
    sigma_r: &DMatrix<f64>,
    bench: &BenchmarkSpec,
) -> Result<Vec<QuadReward>> {
    expected
        .iter()
        .enumerate()
        .map(|(t, rbar)| reward_coeffs(params, rbar, sigma_r, bench.value_at(t)))
        .collect()
}

/// Direct evaluation of the reward with the expectation taken analytically:
/// `E[(P_hat - (1+r)'z)^2] = (P_hat - (1+rbar)'z)^2 + z_r' Sigma_r z_r`.
pub fn reward_direct(
    x: &DVector<f64>,
    u: &DVector<f64>,
    params: &RewardParams,
    rbar_t: &DVector<f64>,
    sigma_r: &DMatrix<f64>,
    b_t: f64,
) -> f64 {
    let z = x + u;
    let gross = rbar_t.add_scalar(1.0);
    let p_hat = target_value(x, b_t, params);
    let shortfall = p_hat - gross.dot(&z);
    let z_risky = z.rows(1, z.len() - 1).into_owned();
    let variance = quad_form(&z_risky, sigma_r, &z_risky);
    -u.sum() - params.lambda * (shortfall * shortfall + variance) - params.omega * u.dot(u)
}

/// Evaluates the quadratic form exactly as written.
pub fn reward_quad(x: &DVector<f64>, u: &DVector<f64>, coeffs: &QuadReward) -> f64 {
    quad_form(x, &coeffs.r_xx, x)
        + quad_form(u, &coeffs.r_ux, x)
        + quad_form(u, &coeffs.r_uu, u)
        + x.dot(&coeffs.r_x)
        + u.dot(&coeffs.r_u)
        + coeffs.r_0
}

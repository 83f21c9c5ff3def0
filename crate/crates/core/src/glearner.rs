//! Finite-horizon backward solve of the KL-regularized Bellman recursion.
//!
//! With a quadratic one-step reward, Gaussian reference policy, and the
//! multiplicative wealth dynamics
//!
//! ```text
//! x[t+1] = diag(1 + rbar_t) (x + u) + (x + u) ∘ eps_t,
//! ```
//!
//! the state-action value G and the free energy F stay quadratic at every
//! timestep, so the backward pass is exact in one sweep. The optimal policy
//! at each step is Gaussian:
//!
//! ```text
//! precision    = Sigma_p^-1 - 2 beta Quu
//! u_tilde      = Sigma_tilde (Sigma_p^-1 u_bar + beta Qu)
//! v_tilde      = Sigma_tilde (Sigma_p^-1 v_bar + beta Qux)
//! ```
//!
//! `beta` is the inverse temperature: `beta -> 0` reverts to the reference
//! policy, large `beta` approaches the greedy maximizer of G.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky, embed_risky_block, gaussian_logdensity, logdet, quad_form, symmetrized,
};
use crate::market::{AssetUniverse, MarketConfig, ReturnsPanel};
use crate::reward::{build_rewards, BenchmarkSpec, QuadReward, RewardParams};
use crate::rng::{rng_from_seed, standard_normal_vector};

/// Solver knobs for the backward pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Inverse temperature of the KL regularization.
    pub beta: f64,
    /// Discount factor in (0, 1].
    pub gamma: f64,
    /// Maximum number of backward sweeps. The recursion is exact after one
    /// sweep; further sweeps only confirm convergence.
    pub max_iter: usize,
    /// Convergence tolerance on the largest coefficient change between
    /// sweeps.
    pub eps: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            beta: 0.5,
            gamma: 0.95,
            max_iter: 2,
            eps: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::Config(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be >= 1".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!("eps must be > 0, got {}", self.eps)));
        }
        Ok(())
    }
}

/// Reference (prior) policy: `u ~ N(u_bar_t + v_bar_t x, Sigma_p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorPolicy {
    /// State-independent mean shift, one vector per timestep.
    pub u_bar: Vec<DVector<f64>>,
    /// State-dependent mean loading, one matrix per timestep.
    pub v_bar: Vec<DMatrix<f64>>,
    /// Action covariance, shared across timesteps.
    pub sigma_p: DMatrix<f64>,
}

impl PriorPolicy {
    /// Time-invariant prior: `u_bar = (c0/n) 1`, `v_bar = 0`,
    /// `Sigma_p = sigma_p_std^2 I`.
    pub fn isotropic(horizon: usize, n: usize, c0: f64, sigma_p_std: f64) -> Result<Self> {
        if !(sigma_p_std > 0.0) {
            return Err(Error::Config(format!(
                "prior sigma_p must be > 0, got {sigma_p_std}"
            )));
        }
        Ok(PriorPolicy {
            u_bar: vec![DVector::from_element(n, c0 / n as f64); horizon],
            v_bar: vec![DMatrix::zeros(n, n); horizon],
            sigma_p: DMatrix::identity(n, n) * sigma_p_std * sigma_p_std,
        })
    }

    pub fn horizon(&self) -> usize {
        self.u_bar.len()
    }

    pub fn num_assets(&self) -> usize {
        self.sigma_p.nrows()
    }

    pub fn validate(&self, horizon: usize, n: usize) -> Result<()> {
        if self.u_bar.len() != horizon || self.v_bar.len() != horizon {
            return Err(Error::Shape(format!(
                "prior has {} steps, expected {horizon}",
                self.u_bar.len()
            )));
        }
        if self.sigma_p.shape() != (n, n)
            || self.u_bar.iter().any(|u| u.len() != n)
            || self.v_bar.iter().any(|v| v.shape() != (n, n))
        {
            return Err(Error::Shape("prior dimensions do not match asset count".into()));
        }
        Ok(())
    }

    /// Mean action at state `x` and step `t`.
    pub fn mean(&self, t: usize, x: &DVector<f64>) -> DVector<f64> {
        &self.u_bar[t] + &self.v_bar[t] * x
    }

    /// Factorize `Sigma_p` once for reuse across timesteps.
    pub fn factorize(&self) -> Result<PriorFactor> {
        let chol = cholesky(&self.sigma_p, "prior covariance")?;
        let sigma_p_inv = chol.inverse();
        let logdet_sigma_p = logdet(&chol);
        Ok(PriorFactor {
            chol,
            sigma_p_inv,
            logdet_sigma_p,
        })
    }

    /// Log-density of the prior policy at `(t, x, u)`.
    pub fn logdensity(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
        let factor = self.factorize()?;
        Ok(gaussian_logdensity(u, &self.mean(t, x), &factor.chol))
    }
}

/// Cached factorization of the prior covariance.
#[derive(Debug, Clone)]
pub struct PriorFactor {
    pub chol: Cholesky<f64, Dyn>,
    pub sigma_p_inv: DMatrix<f64>,
    pub logdet_sigma_p: f64,
}

/// Quadratic blocks of the state-action value G at one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct GCoeffs {
    pub q_xx: DMatrix<f64>,
    pub q_ux: DMatrix<f64>,
    pub q_uu: DMatrix<f64>,
    pub q_x: DVector<f64>,
    pub q_u: DVector<f64>,
    pub q_0: f64,
}

impl GCoeffs {
    pub fn zeros(n: usize) -> Self {
        GCoeffs {
            q_xx: DMatrix::zeros(n, n),
            q_ux: DMatrix::zeros(n, n),
            q_uu: DMatrix::zeros(n, n),
            q_x: DVector::zeros(n),
            q_u: DVector::zeros(n),
            q_0: 0.0,
        }
    }

    /// `G(x, u)` from the blocks.
    pub fn value(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        quad_form(x, &self.q_xx, x)
            + quad_form(u, &self.q_ux, x)
            + quad_form(u, &self.q_uu, u)
            + x.dot(&self.q_x)
            + u.dot(&self.q_u)
            + self.q_0
    }
}

/// Quadratic blocks of the free energy F at one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct FCoeffs {
    pub f_xx: DMatrix<f64>,
    pub f_x: DVector<f64>,
    pub f_0: f64,
}

impl FCoeffs {
    pub fn zeros(n: usize) -> Self {
        FCoeffs {
            f_xx: DMatrix::zeros(n, n),
            f_x: DVector::zeros(n),
            f_0: 0.0,
        }
    }

    /// `F(x)` from the blocks.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        quad_form(x, &self.f_xx, x) + x.dot(&self.f_x) + self.f_0
    }
}

/// The discounted continuation `gamma E[F_{t+1}(x_{t+1}) | z]` expanded as a
/// quadratic in `z = x + u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Continuation {
    pub m: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: f64,
}

impl Continuation {
    /// Evaluates the continuation at a given `z = x + u`.
    pub fn value(&self, z: &DVector<f64>) -> f64 {
        quad_form(z, &self.m, z) + z.dot(&self.b) + self.c
    }
}

/// Market inputs the solver needs: expected returns per step and the risky
/// return covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsModel {
    /// Expected per-step returns, one N-vector per timestep.
    pub expected: Vec<DVector<f64>>,
    /// Per-step covariance of risky returns, (N-1) x (N-1).
    pub sigma_r: DMatrix<f64>,
    /// Deterministic per-step bond return.
    pub r_f_step: f64,
}

impl DynamicsModel {
    pub fn from_market(
        universe: &AssetUniverse,
        panel: &ReturnsPanel,
        config: &MarketConfig,
    ) -> Self {
        let expected = (0..panel.num_steps()).map(|t| panel.expected_at(t)).collect();
        DynamicsModel {
            expected,
            sigma_r: universe.sigma_r.clone(),
            r_f_step: config.r_f_step(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.expected.len()
    }

    pub fn num_assets(&self) -> usize {
        self.sigma_r.nrows() + 1
    }
}

/// Per-timestep Gaussian policy plus the value coefficients behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySolution {
    /// State-independent policy mean, per timestep.
    pub u_tilde: Vec<DVector<f64>>,
    /// State-dependent policy loading, per timestep.
    pub v_tilde: Vec<DMatrix<f64>>,
    /// Policy covariance, per timestep.
    pub sigma_tilde: Vec<DMatrix<f64>>,
    /// G blocks, per timestep (length T).
    pub g: Vec<GCoeffs>,
    /// F blocks, indices 0..=T with `f[T] = 0`.
    pub f: Vec<FCoeffs>,
}

impl PolicySolution {
    /// Solution for an empty horizon (no actions to take).
    pub fn empty(n: usize) -> Self {
        PolicySolution {
            u_tilde: Vec::new(),
            v_tilde: Vec::new(),
            sigma_tilde: Vec::new(),
            g: Vec::new(),
            f: vec![FCoeffs::zeros(n)],
        }
    }

    pub fn horizon(&self) -> usize {
        self.u_tilde.len()
    }

    pub fn num_assets(&self) -> usize {
        self.f[0].f_xx.nrows()
    }

    /// Mean action at `(t, x)`.
    pub fn policy_mean(&self, t: usize, x: &DVector<f64>) -> DVector<f64> {
        &self.u_tilde[t] + &self.v_tilde[t] * x
    }

    /// `G_t(x, u)`.
    pub fn g_value(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        self.g[t].value(x, u)
    }

    /// `F_t(x)`, defined for `t <= T` with `F_T = 0`.
    pub fn f_value(&self, t: usize, x: &DVector<f64>) -> f64 {
        self.f[t].value(x)
    }

    /// Log-density of the optimal policy at `(t, x, u)`.
    pub fn policy_logdensity(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
        let chol = cholesky(&self.sigma_tilde[t], "policy covariance")?;
        Ok(gaussian_logdensity(u, &self.policy_mean(t, x), &chol))
    }
}

/// Expands `gamma E[F_{t+1}(x_{t+1})]` as a quadratic in `z = x + u`.
///
/// With `A = diag(1 + rbar_t)` and noise covariance `Sigma_eps` (zero bond
/// row/column, `Sigma_r` in the risky block):
///
/// ```text
/// E[F(A z + z ∘ eps)] = z' (A' f_xx A + f_xx ∘ Sigma_eps) z + z' A' f_x + f_0
/// ```
///
/// The Hadamard term is the multiplicative-noise correction; it is validated
/// against Monte Carlo in the tests rather than trusted blindly.
pub fn continuation_coeffs(
    f_next: &FCoeffs,
    rbar_t: &DVector<f64>,
    sigma_r: &DMatrix<f64>,
    gamma: f64,
) -> Continuation {
    let n = rbar_t.len();
    let gross = rbar_t.add_scalar(1.0);
    let sigma_eps = embed_risky_block(sigma_r, n);
    // A' f_xx A for diagonal A is an elementwise scaling by gross[i]*gross[j],
    // so both terms collapse to one Hadamard product.
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = gamma * f_next.f_xx[(i, j)] * (gross[i] * gross[j] + sigma_eps[(i, j)]);
        }
    }
    let b = DVector::from_fn(n, |i, _| gamma * gross[i] * f_next.f_x[i]);
    Continuation {
        m,
        b,
        c: gamma * f_next.f_0,
    }
}

/// G blocks at one timestep: reward blocks plus the continuation quadratic
/// redistributed from `z = x + u` onto `(x, u)`.
pub fn g_coeffs_at(
    reward: &QuadReward,
    f_next: &FCoeffs,
    rbar_t: &DVector<f64>,
    sigma_r: &DMatrix<f64>,
    gamma: f64,
) -> GCoeffs {
    let cont = continuation_coeffs(f_next, rbar_t, sigma_r, gamma);
    let m = symmetrized(&cont.m);
    GCoeffs {
        q_xx: symmetrized(&(&reward.r_xx + &m)),
        q_ux: &reward.r_ux + &m * 2.0,
        q_uu: symmetrized(&(&reward.r_uu + &m)),
        q_x: &reward.r_x + &cont.b,
        q_u: &reward.r_u + &cont.b,
        q_0: reward.r_0 + cont.c,
    }
}

/// Optimal Gaussian policy at one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyAt {
    pub sigma_tilde: DMatrix<f64>,
    pub u_tilde: DVector<f64>,
    pub v_tilde: DMatrix<f64>,
}

/// Computes the optimal policy from the G blocks and the prior at one step.
pub fn policy_from_g(
    g: &GCoeffs,
    u_bar: &DVector<f64>,
    v_bar: &DMatrix<f64>,
    prior: &PriorFactor,
    beta: f64,
) -> Result<PolicyAt> {
    let precision = &prior.sigma_p_inv - &g.q_uu * (2.0 * beta);
    let chol = cholesky(&precision, "policy precision")?;
    let sigma_tilde = chol.inverse();
    let u_tilde = &sigma_tilde * (&prior.sigma_p_inv * u_bar + &g.q_u * beta);
    let v_tilde = &sigma_tilde * (&prior.sigma_p_inv * v_bar + &g.q_ux * beta);
    Ok(PolicyAt {
        sigma_tilde,
        u_tilde,
        v_tilde,
    })
}

/// Marginalizes the action out of G to obtain the F blocks, via the
/// Gaussian integral of `exp(beta G)` under the prior:
///
/// ```text
/// U = beta Qux + Sigma_p^-1 v_bar        W = beta Qu + Sigma_p^-1 u_bar
/// P = Sigma_p^-1 - 2 beta Quu
/// f_xx = Qxx + (U' P^-1 U - v_bar' Sigma_p^-1 v_bar) / (2 beta)
/// f_x  = Qx  + (U' P^-1 W - v_bar' Sigma_p^-1 u_bar) / beta
/// f_0  = Q0  + (W' P^-1 W - u_bar' Sigma_p^-1 u_bar) / (2 beta)
///            - (log|Sigma_p| + log|P|) / (2 beta)
/// ```
pub fn f_coeffs_from_g(
    g: &GCoeffs,
    u_bar: &DVector<f64>,
    v_bar: &DMatrix<f64>,
    prior: &PriorFactor,
    beta: f64,
) -> Result<FCoeffs> {
    let u_mat = &g.q_ux * beta + &prior.sigma_p_inv * v_bar;
    let w = &g.q_u * beta + &prior.sigma_p_inv * u_bar;
    let precision = &prior.sigma_p_inv - &g.q_uu * (2.0 * beta);
    let chol = cholesky(&precision, "marginalization precision")?;
    let solved_u = chol.solve(&u_mat);
    let solved_w = chol.solve(&w);

    let f_xx = symmetrized(
        &(&g.q_xx
            + (u_mat.transpose() * &solved_u - v_bar.transpose() * (&prior.sigma_p_inv * v_bar))
                / (2.0 * beta)),
    );
    let f_x = &g.q_x
        + (u_mat.transpose() * &solved_w - v_bar.transpose() * (&prior.sigma_p_inv * u_bar)) / beta;
    let f_0 = g.q_0
        + (w.dot(&solved_w) - u_bar.dot(&(&prior.sigma_p_inv * u_bar))) / (2.0 * beta)
        - (prior.logdet_sigma_p + logdet(&chol)) / (2.0 * beta);
    Ok(FCoeffs { f_xx, f_x, f_0 })
}

fn max_abs_diff_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

fn max_abs_diff_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}

fn solution_delta(a: &PolicySolution, b: &PolicySolution) -> f64 {
    let mut d: f64 = 0.0;
    for t in 0..a.horizon() {
        d = d
            .max(max_abs_diff_mat(&a.g[t].q_xx, &b.g[t].q_xx))
            .max(max_abs_diff_mat(&a.g[t].q_ux, &b.g[t].q_ux))
            .max(max_abs_diff_mat(&a.g[t].q_uu, &b.g[t].q_uu))
            .max(max_abs_diff_vec(&a.g[t].q_x, &b.g[t].q_x))
            .max(max_abs_diff_vec(&a.g[t].q_u, &b.g[t].q_u))
            .max((a.g[t].q_0 - b.g[t].q_0).abs())
            .max(max_abs_diff_mat(&a.sigma_tilde[t], &b.sigma_tilde[t]))
            .max(max_abs_diff_vec(&a.u_tilde[t], &b.u_tilde[t]))
            .max(max_abs_diff_mat(&a.v_tilde[t], &b.v_tilde[t]));
    }
    for t in 0..a.f.len() {
        d = d
            .max(max_abs_diff_mat(&a.f[t].f_xx, &b.f[t].f_xx))
            .max(max_abs_diff_vec(&a.f[t].f_x, &b.f[t].f_x))
            .max((a.f[t].f_0 - b.f[t].f_0).abs());
    }
    d
}

/// Backward solve over the whole horizon.
///
/// Initializes `F_T = 0` and walks `t = T-1 .. 0`, computing the G blocks,
/// the policy, and the F blocks at each step. One sweep is exact for this
/// quadratic structure; additional sweeps (up to `config.max_iter`) stop
/// early once the largest coefficient change drops below `config.eps`.
pub fn backward_solve(
    rewards: &[QuadReward],
    dynamics: &DynamicsModel,
    prior: &PriorPolicy,
    config: &SolverConfig,
) -> Result<PolicySolution> {
    config.validate()?;
    let horizon = rewards.len();
    if horizon == 0 {
        return Err(Error::Usage("backward_solve requires horizon >= 1".into()));
    }
    let n = rewards[0].dim();
    if dynamics.horizon() != horizon {
        return Err(Error::Shape(format!(
            "dynamics cover {} steps, rewards cover {horizon}",
            dynamics.horizon()
        )));
    }
    if dynamics.num_assets() != n || rewards.iter().any(|r| r.dim() != n) {
        return Err(Error::Shape("reward/dynamics asset counts disagree".into()));
    }
    prior.validate(horizon, n)?;
    let factor = prior.factorize()?;

    let mut solution: Option<PolicySolution> = None;
    for _sweep in 0..config.max_iter {
        let mut f = vec![FCoeffs::zeros(n); horizon + 1];
        let mut g: Vec<GCoeffs> = (0..horizon).map(|_| GCoeffs::zeros(n)).collect();
        let mut u_tilde = vec![DVector::zeros(n); horizon];
        let mut v_tilde = vec![DMatrix::zeros(n, n); horizon];
        let mut sigma_tilde = vec![DMatrix::zeros(n, n); horizon];

        for t in (0..horizon).rev() {
            let g_t = g_coeffs_at(
                &rewards[t],
                &f[t + 1],
                &dynamics.expected[t],
                &dynamics.sigma_r,
                config.gamma,
            );
            let policy = policy_from_g(&g_t, &prior.u_bar[t], &prior.v_bar[t], &factor, config.beta)
                .map_err(|e| Error::Solver {
                    t,
                    msg: e.to_string(),
                })?;
            let f_t = f_coeffs_from_g(&g_t, &prior.u_bar[t], &prior.v_bar[t], &factor, config.beta)
                .map_err(|e| Error::Solver {
                    t,
                    msg: e.to_string(),
                })?;
            f[t] = f_t;
            g[t] = g_t;
            u_tilde[t] = policy.u_tilde;
            v_tilde[t] = policy.v_tilde;
            sigma_tilde[t] = policy.sigma_tilde;
        }

        let next = PolicySolution {
            u_tilde,
            v_tilde,
            sigma_tilde,
            g,
            f,
        };
        let delta = match &solution {
            Some(prev) => solution_delta(prev, &next),
            None => f64::INFINITY,
        };
        solution = Some(next);
        if delta < config.eps {
            break;
        }
    }
    Ok(solution.expect("at least one sweep"))
}

/// Convenience: build the per-step rewards from `theta` and solve.
pub fn solve_portfolio(
    params: &RewardParams,
    bench: &BenchmarkSpec,
    dynamics: &DynamicsModel,
    prior: &PriorPolicy,
    config: &SolverConfig,
) -> Result<PolicySolution> {
    let rewards = build_rewards(params, &dynamics.expected, &dynamics.sigma_r, bench)?;
    backward_solve(&rewards, dynamics, prior, config)
}

/// Draws `u ~ N(u_tilde_t + v_tilde_t x, Sigma_tilde_t)` using the lower
/// Cholesky factor of the covariance; deterministic given the seed.
pub fn sample_action(
    solution: &PolicySolution,
    t: usize,
    x: &DVector<f64>,
    seed: u64,
) -> Result<DVector<f64>> {
    if t >= solution.horizon() {
        return Err(Error::Usage(format!(
            "sample_action at t={t} beyond horizon {}",
            solution.horizon()
        )));
    }
    let chol = cholesky(&solution.sigma_tilde[t], "policy covariance")?;
    let mut rng = rng_from_seed(seed);
    let z = standard_normal_vector(&mut rng, x.len());
    Ok(solution.policy_mean(t, x) + chol.l() * z)
}

/// One step of the wealth dynamics: `x' = (1 + r) ∘ (x + u)` elementwise.
/// The bond component is deterministic because `realized_r[0]` carries the
/// per-step risk-free return.
pub fn step_dynamics(x: &DVector<f64>, u: &DVector<f64>, realized_r: &DVector<f64>) -> DVector<f64> {
    let z = x + u;
    DVector::from_fn(x.len(), |i, _| (1.0 + realized_r[i]) * z[i])
}

/// A rolled-out path: states `x_0..x_T`, actions `u_0..u_{T-1}`, and
/// contributions `c_t = 1'u_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub actions: Vec<DVector<f64>>,
    pub contributions: Vec<f64>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn num_assets(&self) -> usize {
        self.states[0].len()
    }
}

/// Rolls the policy forward under the panel's realized returns.
pub fn rollout(
    solution: &PolicySolution,
    panel: &ReturnsPanel,
    x0: &DVector<f64>,
    seed: u64,
) -> Result<Trajectory> {
    let horizon = solution.horizon();
    if x0.len() != solution.num_assets() {
        return Err(Error::Shape(format!(
            "x0 has {} assets, policy expects {}",
            x0.len(),
            solution.num_assets()
        )));
    }
    if horizon > 0 && panel.num_steps() < horizon {
        return Err(Error::Shape(format!(
            "panel covers {} steps, policy needs {horizon}",
            panel.num_steps()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let chols: Vec<_> = (0..horizon)
        .map(|t| cholesky(&solution.sigma_tilde[t], "policy covariance"))
        .collect::<Result<_>>()?;

    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut contributions = Vec::with_capacity(horizon);
    states.push(x0.clone());
    for t in 0..horizon {
        let z = standard_normal_vector(&mut rng, x0.len());
        let u = solution.policy_mean(t, &states[t]) + chols[t].l() * z;
        let next = step_dynamics(&states[t], &u, &panel.realized_at(t));
        contributions.push(u.sum());
        actions.push(u);
        states.push(next);
    }
    Ok(Trajectory {
        states,
        actions,
        contributions,
    })
}

/// Expected contribution under the optimal policy, `1'(u_tilde + v_tilde x)`.
pub fn expected_contribution(solution: &PolicySolution, t: usize, x: &DVector<f64>) -> f64 {
    solution.policy_mean(t, x).sum()
}

/// Expected contribution under the prior policy, `1'(u_bar + v_bar x)`.
pub fn expected_contribution_prior(prior: &PriorPolicy, t: usize, x: &DVector<f64>) -> f64 {
    prior.mean(t, x).sum()
}

/// Closed-form KL divergence from the optimal policy to the prior at
/// `(t, x)`; non-negative by construction.
pub fn kl_to_prior(
    solution: &PolicySolution,
    prior: &PriorPolicy,
    t: usize,
    x: &DVector<f64>,
) -> Result<f64> {
    let n = x.len() as f64;
    let factor = prior.factorize()?;
    let sigma_tilde = &solution.sigma_tilde[t];
    let chol_tilde = cholesky(sigma_tilde, "policy covariance")?;
    let mean_diff = prior.mean(t, x) - solution.policy_mean(t, x);
    let trace = (&factor.sigma_p_inv * sigma_tilde).trace();
    let maha = mean_diff.dot(&(&factor.sigma_p_inv * &mean_diff));
    Ok(0.5 * (trace + maha - n + factor.logdet_sigma_p - logdet(&chol_tilde)))
}

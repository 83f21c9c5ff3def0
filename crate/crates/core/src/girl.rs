//! GIRL: recovering reward parameters from observed trajectories.
//!
//! Under the generative model, a trajectory factorizes into policy and
//! transition terms,
//!
//! ```text
//! LL(theta) = sum_t [ log pi0(u_t|x_t) + beta (G_t(x_t,u_t) - F_t(x_t))
//!                     + log p(x_{t+1} | x_t, u_t) ]
//! ```
//!
//! where G and F come from re-solving the planner under `theta`, and the
//! transition density factors into a Gaussian on the risky residuals plus a
//! hard consistency check on the deterministic bond component. The fit
//! minimizes the summed negative log-likelihood by gradient descent with
//! central finite differences in unconstrained coordinates
//! `(log lambda, log eta, logit rho, log omega)`, halving the step whenever
//! a proposed update would increase the loss.
//!
//! `include_prior_term` controls the exact-vs-literal likelihood split: the
//! exact decomposition keeps `log pi0`; the literal variant (replication
//! mode) drops it and scores only `beta (G - F)` plus the transition term.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glearner::{
    solve_portfolio, DynamicsModel, PolicySolution, PriorFactor, PriorPolicy, SolverConfig,
    Trajectory,
};
use crate::linalg::{cholesky, gaussian_logdensity, logdet};
use crate::reward::{BenchmarkSpec, RewardParams};

/// Relative tolerance on the bond consistency check of the transition
/// density. Trajectories produced by [`crate::glearner::rollout`] satisfy
/// the bond recursion bit-exactly.
pub const DEFAULT_BOND_TOL: f64 = 1e-9;

/// Optimizer settings for the inverse fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GirlConfig {
    /// Step size in the unconstrained coordinates.
    pub learning_rate: f64,
    /// Central finite-difference step per coordinate.
    pub grad_eps: f64,
    /// Outer iteration cap.
    pub max_iter: usize,
    /// Convergence tolerance on loss change and gradient norm.
    pub tol: f64,
    /// Starting point of the descent.
    pub theta0: RewardParams,
}

impl GirlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.grad_eps > 0.0) {
            return Err(Error::Config(format!("grad_eps must be > 0, got {}", self.grad_eps)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be > 0, got {}", self.tol)));
        }
        self.theta0.validate()?;
        if !(self.theta0.rho > 0.0 && self.theta0.rho < 1.0) {
            return Err(Error::Config(
                "girl requires 0 < rho < 1 so the logit reparameterization is finite".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub theta_star: RewardParams,
    /// Accepted loss values, starting with the loss at `theta0`;
    /// non-increasing by construction of the step-halving.
    pub loss_history: Vec<f64>,
    pub grad_norm_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Everything the likelihood needs besides `theta` and the trajectories.
#[derive(Debug, Clone)]
pub struct GirlInputs<'a> {
    pub dynamics: &'a DynamicsModel,
    pub benchmark: &'a BenchmarkSpec,
    pub prior: &'a PriorPolicy,
    pub solver: &'a SolverConfig,
    /// Relative tolerance for the bond consistency check.
    pub bond_tol: f64,
    /// Keep the `log pi0` term of the exact decomposition (true), or drop
    /// it for the literal variant (false).
    pub include_prior_term: bool,
}

impl<'a> GirlInputs<'a> {
    pub fn new(
        dynamics: &'a DynamicsModel,
        benchmark: &'a BenchmarkSpec,
        prior: &'a PriorPolicy,
        solver: &'a SolverConfig,
    ) -> Self {
        GirlInputs {
            dynamics,
            benchmark,
            prior,
            solver,
            bond_tol: DEFAULT_BOND_TOL,
            include_prior_term: true,
        }
    }
}

/// Cached factorizations reused across timesteps and trajectories.
struct EvalContext {
    sigma_r_chol: Cholesky<f64, Dyn>,
    /// `-(N-1)/2 log(2 pi) - 1/2 log|Sigma_r|`
    norm_const: f64,
    prior_factor: PriorFactor,
}

impl EvalContext {
    fn build(inputs: &GirlInputs) -> Result<EvalContext> {
        let sigma_r_chol = cholesky(&inputs.dynamics.sigma_r, "risky return covariance")?;
        let n_risky = inputs.dynamics.sigma_r.nrows() as f64;
        let norm_const =
            -0.5 * (n_risky * (2.0 * std::f64::consts::PI).ln() + logdet(&sigma_r_chol));
        let prior_factor = inputs.prior.factorize()?;
        Ok(EvalContext {
            sigma_r_chol,
            norm_const,
            prior_factor,
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn transition_logdensity_inner(
    x_next: &DVector<f64>,
    x: &DVector<f64>,
    u: &DVector<f64>,
    rbar_t: &DVector<f64>,
    sigma_r_chol: &Cholesky<f64, Dyn>,
    norm_const: f64,
    r_f_step: f64,
    bond_tol: f64,
) -> Result<f64> {
    let n = x.len();
    let bond_held = x[0] + u[0];
    let bond_expected = (1.0 + r_f_step) * bond_held;
    let bond_gap = (x_next[0] - bond_expected).abs();
    if bond_gap > bond_tol * bond_expected.abs().max(1.0) {
        return Err(Error::InconsistentTrajectory(format!(
            "bond component moved to {} but (1 + r_f_step)(x_0 + u_0) = {bond_expected}",
            x_next[0]
        )));
    }
    let mut delta = DVector::zeros(n - 1);
    for i in 1..n {
        let held = x[i] + u[i];
        if held == 0.0 {
            return Err(Error::DegeneratePosition(format!(
                "risky asset {i} has zero post-trade position; transition density undefined"
            )));
        }
        delta[i - 1] = x_next[i] / held - (1.0 + rbar_t[i]);
    }
    let white = sigma_r_chol.solve(&delta);
    Ok(norm_const - 0.5 * delta.dot(&white))
}

/// Log-density of the one-step transition `x -> x_next` after action `u`.
///
/// The risky components contribute a Gaussian on the residual
/// `Delta = x_next_r / (x_r + u_r) - (1 + rbar_r)`; the bond component is a
/// hard consistency check contributing zero when satisfied.
pub fn transition_logdensity(
    x_next: &DVector<f64>,
    x: &DVector<f64>,
    u: &DVector<f64>,
    rbar_t: &DVector<f64>,
    sigma_r: &DMatrix<f64>,
    r_f_step: f64,
    bond_tol: f64,
) -> Result<f64> {
    let n = x.len();
    if x_next.len() != n || u.len() != n || rbar_t.len() != n {
        return Err(Error::Shape("transition vectors must share one length".into()));
    }
    if sigma_r.nrows() != n - 1 || sigma_r.ncols() != n - 1 {
        return Err(Error::Shape(format!(
            "sigma_r is {}x{}, expected {}x{}",
            sigma_r.nrows(),
            sigma_r.ncols(),
            n - 1,
            n - 1
        )));
    }
    let chol = cholesky(sigma_r, "risky return covariance")?;
    let n_risky = (n - 1) as f64;
    let norm_const = -0.5 * (n_risky * (2.0 * std::f64::consts::PI).ln() + logdet(&chol));
    transition_logdensity_inner(x_next, x, u, rbar_t, &chol, norm_const, r_f_step, bond_tol)
}

fn loglik_with_solution(
    solution: &PolicySolution,
    traj: &Trajectory,
    inputs: &GirlInputs,
    ctx: &EvalContext,
) -> Result<f64> {
    let horizon = traj.horizon();
    if horizon != solution.horizon() {
        return Err(Error::Shape(format!(
            "trajectory has {horizon} steps, policy has {}",
            solution.horizon()
        )));
    }
    if traj.num_assets() != solution.num_assets() {
        return Err(Error::Shape("trajectory asset count mismatch".into()));
    }
    let beta = inputs.solver.beta;
    let mut total = 0.0;
    for t in 0..horizon {
        let x = &traj.states[t];
        let u = &traj.actions[t];
        total += beta * (solution.g_value(t, x, u) - solution.f_value(t, x));
        if inputs.include_prior_term {
            total += gaussian_logdensity(u, &inputs.prior.mean(t, x), &ctx.prior_factor.chol);
        }
        total += transition_logdensity_inner(
            &traj.states[t + 1],
            x,
            u,
            &inputs.dynamics.expected[t],
            &ctx.sigma_r_chol,
            ctx.norm_const,
            inputs.dynamics.r_f_step,
            inputs.bond_tol,
        )?;
    }
    Ok(total)
}

fn solve_for(theta: &RewardParams, inputs: &GirlInputs) -> Result<PolicySolution> {
    solve_portfolio(
        theta,
        inputs.benchmark,
        inputs.dynamics,
        inputs.prior,
        inputs.solver,
    )
}

/// Log-likelihood that one trajectory was generated under `theta`.
pub fn trajectory_loglik(
    theta: &RewardParams,
    traj: &Trajectory,
    inputs: &GirlInputs,
) -> Result<f64> {
    let solution = solve_for(theta, inputs)?;
    let ctx = EvalContext::build(inputs)?;
    loglik_with_solution(&solution, traj, inputs, &ctx)
}

/// Summed negative log-likelihood over a trajectory set. The planner is
/// solved once per `theta` and shared across trajectories.
pub fn loss(theta: &RewardParams, trajectories: &[Trajectory], inputs: &GirlInputs) -> Result<f64> {
    if trajectories.is_empty() {
        return Err(Error::Usage("loss requires at least one trajectory".into()));
    }
    let solution = solve_for(theta, inputs)?;
    let ctx = EvalContext::build(inputs)?;
    let terms: Result<Vec<f64>> = trajectories
        .par_iter()
        .map(|traj| loglik_with_solution(&solution, traj, inputs, &ctx))
        .collect();
    // Summation in trajectory order keeps results independent of scheduling.
    Ok(-terms?.iter().sum::<f64>())
}

const COORD_NAMES: [&str; 4] = ["lambda", "eta", "rho", "omega"];

fn to_unconstrained(theta: &RewardParams) -> [f64; 4] {
    [
        theta.lambda.ln(),
        theta.eta.ln(),
        (theta.rho / (1.0 - theta.rho)).ln(),
        theta.omega.ln(),
    ]
}

fn from_unconstrained(y: &[f64; 4]) -> RewardParams {
    RewardParams {
        lambda: y[0].exp(),
        eta: y[1].exp(),
        rho: 1.0 / (1.0 + (-y[2]).exp()),
        omega: y[3].exp(),
    }
}

/// Central-difference gradient of an arbitrary objective over the four
/// unconstrained coordinates. Exposed so the harness can be self-tested on
/// objectives with known gradients.
pub fn central_diff_gradient<F>(objective: F, y: &[f64; 4], eps: f64) -> Result<[f64; 4]>
where
    F: Fn(&[f64; 4]) -> Result<f64> + Sync,
{
    let probes: Vec<(usize, f64)> = (0..4).flat_map(|i| [(i, eps), (i, -eps)]).collect();
    let values: Result<Vec<f64>> = probes
        .par_iter()
        .map(|&(i, step)| {
            let mut point = *y;
            point[i] += step;
            let value = objective(&point)?;
            if !value.is_finite() {
                return Err(Error::Numeric(format!(
                    "objective is not finite at the {} probe of coordinate {}",
                    if step > 0.0 { "forward" } else { "backward" },
                    COORD_NAMES[i]
                )));
            }
            Ok(value)
        })
        .collect();
    let values = values?;
    let mut grad = [0.0; 4];
    for i in 0..4 {
        grad[i] = (values[2 * i] - values[2 * i + 1]) / (2.0 * eps);
    }
    Ok(grad)
}

/// Central finite-difference gradient of the loss in the unconstrained
/// coordinates `(log lambda, log eta, logit rho, log omega)`.
pub fn grad_loss(
    theta: &RewardParams,
    trajectories: &[Trajectory],
    inputs: &GirlInputs,
    grad_eps: f64,
) -> Result<[f64; 4]> {
    theta.validate()?;
    if !(theta.rho > 0.0 && theta.rho < 1.0) {
        return Err(Error::Config(
            "grad_loss requires 0 < rho < 1 strictly inside the feasible region".into(),
        ));
    }
    let y = to_unconstrained(theta);
    central_diff_gradient(
        |point| loss(&from_unconstrained(point), trajectories, inputs),
        &y,
        grad_eps,
    )
}

fn norm4(v: &[f64; 4]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Maximum number of step halvings before the descent gives up on an
/// iteration.
pub const MAX_STEP_HALVINGS: usize = 20;

/// Gradient descent on the summed negative log-likelihood.
///
/// Each iteration computes the finite-difference gradient, then tries the
/// full `learning_rate` step and halves it (up to [`MAX_STEP_HALVINGS`]
/// times) while the proposed update would increase the loss. The recorded
/// loss history is therefore non-increasing. Stops on `max_iter`, on
/// gradient norm below `tol`, on loss change below `tol`, or when no
/// decreasing step exists at the smallest step size.
pub fn girl_fit(
    trajectories: &[Trajectory],
    config: &GirlConfig,
    inputs: &GirlInputs,
) -> Result<FitReport> {
    config.validate()?;
    if trajectories.is_empty() {
        return Err(Error::Usage("girl_fit requires at least one trajectory".into()));
    }
    let mut y = to_unconstrained(&config.theta0);
    let mut current_loss = loss(&config.theta0, trajectories, inputs)?;
    if !current_loss.is_finite() {
        return Err(Error::Fit(format!(
            "loss is not finite at theta0 ({current_loss})"
        )));
    }
    let mut loss_history = vec![current_loss];
    let mut grad_norm_history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..config.max_iter {
        iterations += 1;
        let grad = central_diff_gradient(
            |point| loss(&from_unconstrained(point), trajectories, inputs),
            &y,
            config.grad_eps,
        )?;
        let gnorm = norm4(&grad);
        grad_norm_history.push(gnorm);
        if gnorm < config.tol {
            converged = true;
            break;
        }

        let mut step = config.learning_rate;
        let mut accepted = None;
        for _ in 0..=MAX_STEP_HALVINGS {
            let mut trial = y;
            for i in 0..4 {
                trial[i] -= step * grad[i];
            }
            // An oversized step can leave the representable region entirely
            // (exp underflow to lambda = 0 and the like); such trials are
            // rejected like any loss increase.
            match loss(&from_unconstrained(&trial), trajectories, inputs) {
                Ok(trial_loss) if trial_loss.is_finite() && trial_loss <= current_loss => {
                    accepted = Some((trial, trial_loss));
                    break;
                }
                _ => step *= 0.5,
            }
        }
        match accepted {
            Some((next_y, next_loss)) => {
                let improvement = current_loss - next_loss;
                y = next_y;
                current_loss = next_loss;
                loss_history.push(next_loss);
                if improvement < config.tol {
                    converged = true;
                    break;
                }
            }
            None => {
                // No descent at the smallest step: stationary at this
                // resolution.
                converged = true;
                break;
            }
        }
    }

    Ok(FitReport {
        theta_star: from_unconstrained(&y),
        loss_history,
        grad_norm_history,
        iterations,
        converged,
    })
}

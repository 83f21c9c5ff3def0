//! Acceptance suite: every release-gating check, one test per criterion,
//! each printing a single pass/fail line with the measured quantities.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines
//! for passing criteria too.

use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use gport_cli::config::RunConfig;
use gport_cli::pipeline::{
    generate_trajectories, replicate_once, run_eval, run_girl, simulate_world_artifacts,
    solve_world,
};
use gport_core::error::Result;
use gport_core::girl::{central_diff_gradient, loss, GirlInputs};
use gport_core::glearner::{
    backward_solve, continuation_coeffs, DynamicsModel, GCoeffs, PolicySolution,
    PriorPolicy, SolverConfig,
};
use gport_core::linalg::{cholesky, gaussian_logdensity, quad_form, symmetrized};
use gport_core::market::{build_covariance, simulate_market, MarketConfig};
use gport_core::reward::{
    build_rewards, reward_coeffs, reward_direct, reward_quad, BenchmarkSpec, RewardParams,
};
use gport_core::rng::{derive_seed, rng_from_seed, standard_normal_vector};

fn verdict(criterion: usize, name: &str, pass: bool, details: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[criterion {criterion:02}] {tag} {name}: {details}");
    assert!(pass, "criterion {criterion} ({name}): {details}");
}

/// A small well-conditioned problem for the value-function oracles.
struct SmallWorld {
    rewards: Vec<gport_core::reward::QuadReward>,
    dynamics: DynamicsModel,
    prior: PriorPolicy,
    solver: SolverConfig,
    solution: PolicySolution,
}

fn small_world(seed: u64, n: usize, horizon: usize, beta: f64) -> SmallWorld {
    let mut rng = rng_from_seed(seed);
    let params = RewardParams {
        lambda: rng.random_range(0.01..0.06),
        eta: rng.random_range(1.0..1.4),
        rho: rng.random_range(0.3..0.7),
        omega: rng.random_range(0.6..1.4),
    };
    let bench = BenchmarkSpec::new(rng.random_range(20.0..60.0), 0.05).unwrap();
    let expected: Vec<DVector<f64>> = (0..horizon)
        .map(|_| {
            DVector::from_fn(n, |i, _| {
                if i == 0 {
                    0.005
                } else {
                    rng.random_range(0.0..0.08)
                }
            })
        })
        .collect();
    let b = DMatrix::from_fn(n - 1, n - 1, |_, _| rng.random_range(-0.04..0.04));
    let sigma_r = &b * b.transpose() + DMatrix::identity(n - 1, n - 1) * 2e-4;
    let rewards = build_rewards(&params, &expected, &sigma_r, &bench).unwrap();
    let dynamics = DynamicsModel {
        expected,
        sigma_r,
        r_f_step: 0.005,
    };
    let prior = PriorPolicy::isotropic(horizon, n, 1.0, 2.0).unwrap();
    let solver = SolverConfig {
        beta,
        gamma: 0.9,
        max_iter: 2,
        eps: 1e-10,
    };
    let solution = backward_solve(&rewards, &dynamics, &prior, &solver).unwrap();
    SmallWorld {
        rewards,
        dynamics,
        prior,
        solver,
        solution,
    }
}

// ---------------------------------------------------------------------------
// 1. reward form equivalence
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_reward_form_equivalence() {
    let started = Instant::now();
    let mut rng = rng_from_seed(101);
    let mut instances = 0usize;
    let mut worst: f64 = 0.0;
    for &n in &[2usize, 5, 100] {
        let config = MarketConfig {
            num_risky: n - 1,
            ..MarketConfig::default()
        };
        for _ in 0..334 {
            let params = RewardParams {
                lambda: rng.random_range(1e-4..0.05),
                eta: rng.random_range(0.9..1.6),
                rho: rng.random_range(0.05..0.95),
                omega: rng.random_range(0.2..2.0),
            };
            let beta0 = DVector::from_fn(n - 1, |_, _| rng.random_range(0.05..0.85));
            let sigma_r = build_covariance(&beta0, 0.05, &config).unwrap();
            let rbar = DVector::from_fn(n, |i, _| {
                if i == 0 {
                    config.r_f_step()
                } else {
                    rng.random_range(-0.05..0.15)
                }
            });
            let b_t = rng.random_range(50.0..2000.0);
            let coeffs = reward_coeffs(&params, &rbar, &sigma_r, b_t).unwrap();
            for _ in 0..2 {
                let x = standard_normal_vector(&mut rng, n) * 100.0;
                let u = standard_normal_vector(&mut rng, n) * 30.0;
                let direct = reward_direct(&x, &u, &params, &rbar, &sigma_r, b_t);
                let quad = reward_quad(&x, &u, &coeffs);
                let rel = (quad - direct).abs() / (1.0 + direct.abs());
                worst = worst.max(rel);
            }
            instances += 1;
        }
    }
    let elapsed = started.elapsed();
    verdict(
        1,
        "reward form equivalence",
        worst <= 1e-10 && elapsed < Duration::from_secs(10),
        &format!("{instances} instances, worst relative error {worst:.2e}, {elapsed:.2?}"),
    );
}

// ---------------------------------------------------------------------------
// 2. free-energy identity
// ---------------------------------------------------------------------------

/// Independent evaluation of (1/beta) log E_{u~pi0(.|x)}[exp(beta G(x,u))]
/// by completing the square with eigendecompositions.
fn log_partition_eigen(
    g: &GCoeffs,
    u_bar: &DVector<f64>,
    v_bar: &DMatrix<f64>,
    sigma_p: &DMatrix<f64>,
    beta: f64,
    x: &DVector<f64>,
) -> f64 {
    let eig_p = sigma_p.clone().symmetric_eigen();
    let p_inv = &eig_p.eigenvectors
        * DMatrix::from_diagonal(&eig_p.eigenvalues.map(|e| 1.0 / e))
        * eig_p.eigenvectors.transpose();
    let logdet_sigma_p: f64 = eig_p.eigenvalues.iter().map(|e| e.ln()).sum();

    let u_hat = u_bar + v_bar * x;
    let k = &p_inv - symmetrized(&g.q_uu) * (2.0 * beta);
    let m = &p_inv * &u_hat + (&g.q_ux * x + &g.q_u) * beta;
    let c0 = -0.5 * u_hat.dot(&(&p_inv * &u_hat))
        + beta * (quad_form(x, &g.q_xx, x) + x.dot(&g.q_x) + g.q_0);

    let eig_k = k.symmetric_eigen();
    let k_inv = &eig_k.eigenvectors
        * DMatrix::from_diagonal(&eig_k.eigenvalues.map(|e| 1.0 / e))
        * eig_k.eigenvectors.transpose();
    let logdet_k: f64 = eig_k.eigenvalues.iter().map(|e| e.ln()).sum();

    (-0.5 * logdet_sigma_p - 0.5 * logdet_k + 0.5 * m.dot(&(&k_inv * &m)) + c0) / beta
}

#[test]
fn criterion_02_free_energy_identity() {
    let started = Instant::now();
    let world = small_world(202, 2, 4, 0.2);
    let mut rng = rng_from_seed(2020);

    let mut worst_rel: f64 = 0.0;
    for trial in 0..100 {
        let t = trial % 4;
        let x = standard_normal_vector(&mut rng, 2) * 10.0;
        let direct = log_partition_eigen(
            &world.solution.g[t],
            &world.prior.u_bar[t],
            &world.prior.v_bar[t],
            &world.prior.sigma_p,
            world.solver.beta,
            &x,
        );
        let via_f = world.solution.f_value(t, &x);
        worst_rel = worst_rel.max((direct - via_f).abs() / (1.0 + via_f.abs()));
    }

    // Monte-Carlo side: exp(beta F) against the sample mean of exp(beta G).
    let factor = world.prior.factorize().unwrap();
    let l = factor.chol.l();
    let mut worst_sigmas: f64 = 0.0;
    for trial in 0..3 {
        let t = trial % 4;
        let x = standard_normal_vector(&mut rng, 2) * 8.0;
        let u_hat = world.prior.mean(t, &x);
        let n_samples = 1_000_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n_samples {
            let u = &u_hat + &l * standard_normal_vector(&mut rng, 2);
            let v = (world.solver.beta * world.solution.g_value(t, &x, &u)).exp();
            sum += v;
            sum_sq += v * v;
        }
        let mc = sum / n_samples as f64;
        let var = (sum_sq / n_samples as f64 - mc * mc).max(0.0);
        let se = (var / n_samples as f64).sqrt();
        let analytic = (world.solver.beta * world.solution.f_value(t, &x)).exp();
        worst_sigmas = worst_sigmas.max((mc - analytic).abs() / se);
    }

    let elapsed = started.elapsed();
    verdict(
        2,
        "free-energy identity",
        worst_rel <= 1e-8 && worst_sigmas < 3.0 && elapsed < Duration::from_secs(60),
        &format!(
            "closed form worst rel {worst_rel:.2e}, MC worst deviation {worst_sigmas:.2} se, {elapsed:.2?}"
        ),
    );
}

// ---------------------------------------------------------------------------
// 3. pointwise policy identity
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_policy_identity_pointwise() {
    let world = small_world(303, 3, 5, 0.2);
    let mut rng = rng_from_seed(3030);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let t = rng.random_range(0..5);
        let x = standard_normal_vector(&mut rng, 3) * 20.0;
        let u = standard_normal_vector(&mut rng, 3) * 5.0;
        let lhs = world.solution.policy_logdensity(t, &x, &u).unwrap()
            - world.prior.logdensity(t, &x, &u).unwrap();
        let rhs =
            world.solver.beta * (world.solution.g_value(t, &x, &u) - world.solution.f_value(t, &x));
        worst = worst.max((lhs - rhs).abs());
    }
    verdict(
        3,
        "log pi - log pi0 = beta (G - F)",
        worst <= 1e-8,
        &format!("1000 random (t, x, u), worst absolute gap {worst:.2e}"),
    );
}

// ---------------------------------------------------------------------------
// 4. policy optimum against grid search
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_policy_grid_search() {
    let started = Instant::now();
    let world = small_world(404, 2, 3, 0.2);
    let factor = world.prior.factorize().unwrap();
    let mut rng = rng_from_seed(4040);
    let mut worst_offset: f64 = 0.0;
    let mut grid_h: f64 = 0.0;
    for t in 0..3 {
        for _ in 0..2 {
            let x = standard_normal_vector(&mut rng, 2) * 15.0;
            let mean = world.solution.policy_mean(t, &x);
            let prior_mean = world.prior.mean(t, &x);
            let spread = 4.0 * world.prior.sigma_p[(0, 0)].sqrt();
            let steps = 320usize;
            let h = 2.0 * spread / steps as f64;
            grid_h = h;
            let mut best = (f64::NEG_INFINITY, DVector::zeros(2));
            for i in 0..=steps {
                for j in 0..=steps {
                    let u = DVector::from_vec(vec![
                        mean[0] - spread + i as f64 * h,
                        mean[1] - spread + j as f64 * h,
                    ]);
                    let value = world.solver.beta * world.solution.g_value(t, &x, &u)
                        + gaussian_logdensity(&u, &prior_mean, &factor.chol);
                    if value > best.0 {
                        best = (value, u);
                    }
                }
            }
            worst_offset = worst_offset
                .max((best.1[0] - mean[0]).abs())
                .max((best.1[1] - mean[1]).abs());
        }
    }
    let elapsed = started.elapsed();
    verdict(
        4,
        "policy mean maximizes beta G + log pi0",
        worst_offset <= grid_h && elapsed < Duration::from_secs(60),
        &format!("worst offset {worst_offset:.4} vs grid step {grid_h:.4}, {elapsed:.2?}"),
    );
}

// ---------------------------------------------------------------------------
// 5. backward-sweep idempotence
// ---------------------------------------------------------------------------

fn solution_max_diff(a: &PolicySolution, b: &PolicySolution) -> f64 {
    let mut d: f64 = 0.0;
    for t in 0..a.horizon() {
        d = d
            .max((&a.g[t].q_xx - &b.g[t].q_xx).amax())
            .max((&a.g[t].q_ux - &b.g[t].q_ux).amax())
            .max((&a.g[t].q_uu - &b.g[t].q_uu).amax())
            .max((&a.g[t].q_x - &b.g[t].q_x).amax())
            .max((&a.g[t].q_u - &b.g[t].q_u).amax())
            .max((a.g[t].q_0 - b.g[t].q_0).abs())
            .max((&a.sigma_tilde[t] - &b.sigma_tilde[t]).amax())
            .max((&a.u_tilde[t] - &b.u_tilde[t]).amax())
            .max((&a.v_tilde[t] - &b.v_tilde[t]).amax());
    }
    for t in 0..a.f.len() {
        d = d
            .max((&a.f[t].f_xx - &b.f[t].f_xx).amax())
            .max((&a.f[t].f_x - &b.f[t].f_x).amax())
            .max((a.f[t].f_0 - b.f[t].f_0).abs());
    }
    d
}

#[test]
fn criterion_05_backward_solve_idempotence() {
    let cfg = RunConfig::default();
    let world = simulate_world_artifacts(&cfg, cfg.base_seed).unwrap();
    let dynamics = DynamicsModel::from_market(&world.universe, &world.panel, &cfg.market);
    let prior = PriorPolicy::isotropic(
        cfg.market.num_steps,
        cfg.market.num_assets(),
        cfg.prior_c0,
        cfg.prior_sigma_p,
    )
    .unwrap();
    let rewards = build_rewards(
        &cfg.reward,
        &dynamics.expected,
        &dynamics.sigma_r,
        &cfg.benchmark,
    )
    .unwrap();

    let started = Instant::now();
    let one_sweep = backward_solve(
        &rewards,
        &dynamics,
        &prior,
        &SolverConfig {
            max_iter: 1,
            ..cfg.solver
        },
    )
    .unwrap();
    let solve_time = started.elapsed();
    let two_sweeps = backward_solve(
        &rewards,
        &dynamics,
        &prior,
        &SolverConfig {
            max_iter: 2,
            ..cfg.solver
        },
    )
    .unwrap();
    let delta = solution_max_diff(&one_sweep, &two_sweeps);
    verdict(
        5,
        "second backward sweep is a no-op",
        delta <= 1e-12 && solve_time < Duration::from_secs(10),
        &format!("max coefficient change {delta:.2e}, N=100 T=25 solve in {solve_time:.2?}"),
    );
}

// ---------------------------------------------------------------------------
// 6. continuation expectation against Monte Carlo
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_continuation_monte_carlo() {
    let mut worst_sigmas: f64 = 0.0;
    for instance in 0..10 {
        let mut rng = rng_from_seed(606 + instance);
        let n = 3;
        let raw = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
        let f_next = gport_core::glearner::FCoeffs {
            f_xx: symmetrized(&raw),
            f_x: DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
            f_0: rng.random_range(-1.0..1.0),
        };
        let rbar = DVector::from_fn(n, |i, _| {
            if i == 0 {
                0.005
            } else {
                rng.random_range(0.0..0.08)
            }
        });
        let b = DMatrix::from_fn(n - 1, n - 1, |_, _| rng.random_range(-0.1..0.1));
        let sigma_r = &b * b.transpose() + DMatrix::identity(n - 1, n - 1) * 1e-3;
        let gamma = 0.95;
        let cont = continuation_coeffs(&f_next, &rbar, &sigma_r, gamma);

        let z = standard_normal_vector(&mut rng, n) * 2.0;
        let gross = rbar.add_scalar(1.0);
        let chol = cholesky(&sigma_r, "mc").unwrap();
        let l = chol.l();
        let n_samples = 1_000_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n_samples {
            let eps = &l * standard_normal_vector(&mut rng, n - 1);
            let x_next = DVector::from_fn(n, |i, _| {
                let noise = if i == 0 { 0.0 } else { eps[i - 1] };
                gross[i] * z[i] + z[i] * noise
            });
            let v = gamma * f_next.value(&x_next);
            sum += v;
            sum_sq += v * v;
        }
        let mc = sum / n_samples as f64;
        let var = (sum_sq / n_samples as f64 - mc * mc).max(0.0);
        let se = (var / n_samples as f64).sqrt().max(1e-12);
        worst_sigmas = worst_sigmas.max((mc - cont.value(&z)).abs() / se);
    }
    verdict(
        6,
        "analytic continuation matches Monte Carlo",
        worst_sigmas < 3.0,
        &format!("10 instances x 1e6 draws, worst deviation {worst_sigmas:.2} se"),
    );
}

// ---------------------------------------------------------------------------
// 7. GIRL gradient check
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_girl_gradient_check() {
    // Harness self-test on a known quadratic.
    let a = [2.0, -1.5, 0.7, 3.0];
    let c = [0.3, -0.2, 0.5, 1.0];
    let objective = |y: &[f64; 4]| -> Result<f64> {
        Ok((0..4).map(|i| a[i] * (y[i] - c[i]) * (y[i] - c[i])).sum())
    };
    let y0 = [1.0, 0.5, -0.4, 2.0];
    let grad = central_diff_gradient(objective, &y0, 1e-4).unwrap();
    let mut harness_err: f64 = 0.0;
    for i in 0..4 {
        harness_err = harness_err.max((grad[i] - 2.0 * a[i] * (y0[i] - c[i])).abs());
    }

    // Reference-parameter instance: central difference at h against the
    // one-sided difference at h/2. Their gap is (h/4) f'' to leading order,
    // so the curvature estimated from the same probes bounds it.
    let world = small_world(707, 6, 8, 0.5);
    let params = RewardParams::reference();
    let bench = BenchmarkSpec::new(60.0, 0.05).unwrap();
    let rewards = build_rewards(
        &params,
        &world.dynamics.expected,
        &world.dynamics.sigma_r,
        &bench,
    )
    .unwrap();
    let solution = backward_solve(&rewards, &world.dynamics, &world.prior, &world.solver).unwrap();
    let mut panel_expected = DMatrix::zeros(8, 6);
    for t in 0..8 {
        panel_expected.set_row(t, &world.dynamics.expected[t].transpose());
    }
    let _ = &world.rewards;
    let panel = gport_core::market::ReturnsPanel {
        expected: panel_expected.clone(),
        realized: panel_expected,
    };
    let x0 = DVector::from_element(6, 25.0);
    let trajectories: Vec<_> = (0..20)
        .map(|k| gport_core::glearner::rollout(&solution, &panel, &x0, 7070 + k).unwrap())
        .collect();
    let inputs = GirlInputs::new(&world.dynamics, &bench, &world.prior, &world.solver);

    let h = 1e-3;
    let y = [
        params.lambda.ln(),
        params.eta.ln(),
        (params.rho / (1.0 - params.rho)).ln(),
        params.omega.ln(),
    ];
    let objective =
        |point: &[f64; 4]| -> Result<f64> {
            loss(
                &RewardParams {
                    lambda: point[0].exp(),
                    eta: point[1].exp(),
                    rho: 1.0 / (1.0 + (-point[2]).exp()),
                    omega: point[3].exp(),
                },
                &trajectories,
                &inputs,
            )
        };
    let f0 = objective(&y).unwrap();
    let mut worst_ratio: f64 = 0.0;
    for i in 0..4 {
        let mut yp = y;
        yp[i] += h;
        let mut ym = y;
        ym[i] -= h;
        let mut yhalf = y;
        yhalf[i] += 0.5 * h;
        let fp = objective(&yp).unwrap();
        let fm = objective(&ym).unwrap();
        let fhalf = objective(&yhalf).unwrap();
        let g_central = (fp - fm) / (2.0 * h);
        let g_oneside = (fhalf - f0) / (0.5 * h);
        let curvature = (fp - 2.0 * f0 + fm).abs() / (h * h);
        let envelope = 0.5 * curvature * h + 1e-6 * (1.0 + g_central.abs());
        worst_ratio = worst_ratio.max((g_central - g_oneside).abs() / envelope);
    }

    verdict(
        7,
        "finite-difference gradients",
        harness_err <= 1e-6 && worst_ratio <= 1.0,
        &format!(
            "harness error {harness_err:.2e}, worst gap/envelope ratio {worst_ratio:.3}"
        ),
    );
}

// ---------------------------------------------------------------------------
// 8. GIRL recovery at reference scale
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_girl_recovery() {
    let started = Instant::now();
    let cfg = RunConfig::default();
    let world = simulate_world_artifacts(&cfg, cfg.base_seed).unwrap();
    let generating = solve_world(&cfg, &world).unwrap();
    let trajectories =
        generate_trajectories(&cfg, &world, &generating, cfg.num_trajectories, cfg.base_seed)
            .unwrap();
    assert_eq!(trajectories.len(), 100);

    let report = run_girl(&cfg, &world, &trajectories, false).unwrap();
    let theta = report.theta_star;
    let in_band = (0.0005..=0.005).contains(&theta.lambda)
        && (0.5..=2.0).contains(&theta.omega)
        && (1.0..=2.0).contains(&theta.eta)
        && (0.2..=0.8).contains(&theta.rho);

    // Sharpe of the re-solved policy vs the generating policy, on matched
    // evaluation rollouts.
    let refit_cfg = RunConfig {
        reward: theta,
        ..cfg.clone()
    };
    let refit = solve_world(&refit_cfg, &world).unwrap();
    let eval_seed = derive_seed(cfg.base_seed, "recovery-eval", 0);
    let gen_perf = gport_cli::pipeline::rollout_performance(
        &cfg,
        &generate_trajectories(&cfg, &world, &generating, 50, eval_seed).unwrap(),
        false,
    )
    .unwrap();
    let fit_perf = gport_cli::pipeline::rollout_performance(
        &cfg,
        &generate_trajectories(&cfg, &world, &refit, 50, eval_seed).unwrap(),
        false,
    )
    .unwrap();
    let sharpe_gap = (gen_perf.sharpe_mean - fit_perf.sharpe_mean).abs();

    let elapsed = started.elapsed();
    verdict(
        8,
        "GIRL recovers theta within the qualitative bands",
        in_band && sharpe_gap <= 0.05 && elapsed < Duration::from_secs(900),
        &format!(
            "theta=({:.5}, {:.3}, {:.3}, {:.3}) from start ({:.5}, {:.3}, {:.3}, {:.3}); \
             Sharpe gap {sharpe_gap:.4}; {} iterations in {elapsed:.1?}",
            theta.lambda,
            theta.eta,
            theta.rho,
            theta.omega,
            cfg.girl.theta0.lambda,
            cfg.girl.theta0.eta,
            cfg.girl.theta0.rho,
            cfg.girl.theta0.omega,
            report.iterations
        ),
    );
}

// ---------------------------------------------------------------------------
// 9. Sharpe band of the reference pipeline
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_sharpe_band() {
    let started = Instant::now();
    let cfg = RunConfig::default();
    let (report, _) = run_eval(&cfg, false).unwrap();
    let (naive_report, _) = run_eval(&cfg, true).unwrap();
    let elapsed = started.elapsed();
    let in_band = (0.38..=0.58).contains(&report.sharpe_mean);
    verdict(
        9,
        "mean Sharpe over 50 evaluation seeds in [0.38, 0.58]",
        in_band && elapsed < Duration::from_secs(300),
        &format!(
            "measured {:.3} +/- {:.3} (contribution-adjusted; naive variant {:.3}), {elapsed:.1?}",
            report.sharpe_mean, report.sharpe_std, naive_report.sharpe_mean
        ),
    );
}

// ---------------------------------------------------------------------------
// 10. bond determinism and budget identity on the evaluation trajectories
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_bond_and_budget_identities() {
    let cfg = RunConfig::default();
    let r_f_step = cfg.market.r_f_step();
    let mut worst_budget: f64 = 0.0;
    let mut worst_bond: f64 = 0.0;
    for k in 0..cfg.num_eval_seeds {
        let eval_base = derive_seed(cfg.base_seed, "eval", k as u64);
        let (_, traj) = replicate_once(&cfg, eval_base, false).unwrap();
        for t in 0..traj.horizon() {
            let budget_gap = (traj.contributions[t] - traj.actions[t].sum()).abs()
                / traj.contributions[t].abs().max(1.0);
            worst_budget = worst_budget.max(budget_gap);
            let held = traj.states[t][0] + traj.actions[t][0];
            let bond_gap = (traj.states[t + 1][0] - (1.0 + r_f_step) * held).abs()
                / traj.states[t + 1][0].abs().max(1.0);
            worst_bond = worst_bond.max(bond_gap);
        }
    }
    verdict(
        10,
        "bond determinism and budget identity",
        worst_budget <= 1e-12 && worst_bond <= 1e-12,
        &format!(
            "50 evaluation trajectories: worst relative budget gap {worst_budget:.2e}, bond gap {worst_bond:.2e}"
        ),
    );
}

// ---------------------------------------------------------------------------
// 11. GBM moments
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_gbm_moments() {
    let config = MarketConfig {
        num_steps: 100_000,
        ..MarketConfig::default()
    };
    let path = simulate_market(&config, 1111).unwrap();
    let logs: Vec<f64> = path.values.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let target_mean = (config.mu_m - 0.5 * config.sigma_m * config.sigma_m) * config.dt;
    let target_var = config.sigma_m * config.sigma_m * config.dt;
    let mean_dev = (mean - target_mean).abs() / (target_var / n).sqrt();
    let var_dev = (var - target_var).abs() / (target_var * (2.0 / (n - 1.0)).sqrt());
    verdict(
        11,
        "GBM log-step-return moments",
        mean_dev < 3.0 && var_dev < 3.0,
        &format!("1e5 steps: mean deviation {mean_dev:.2} se, variance deviation {var_dev:.2} se"),
    );
}

// ---------------------------------------------------------------------------
// 12. end-to-end determinism
// ---------------------------------------------------------------------------

/// Reads a file with volatile lines removed: the config echo's output
/// directory and the fit document's wall time differ between runs by
/// construction.
fn comparable_content(path: &Path) -> Vec<u8> {
    let raw = std::fs::read(path).unwrap();
    let name = path.file_name().unwrap().to_string_lossy();
    if name.ends_with(".cfg") || name.ends_with(".json") {
        let text = String::from_utf8(raw).unwrap();
        text.lines()
            .filter(|l| !l.contains("output.dir") && !l.contains("wall_time_secs"))
            .collect::<Vec<_>>()
            .join("\n")
            .into_bytes()
    } else {
        raw
    }
}

#[test]
fn criterion_12_end_to_end_determinism() {
    let bin = env!("CARGO_BIN_EXE_gport");
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.cfg");
    std::fs::write(
        &config_path,
        "market.num_steps = 6\nmarket.num_risky = 4\nseeds.num_trajectories = 3\n\
         seeds.num_eval_seeds = 3\ngirl.max_iter = 2\nbenchmark.growth = 0.02\n",
    )
    .unwrap();

    let run = |out: &Path| {
        for sub in ["simulate", "solve", "rollout", "girl", "report"] {
            let status = std::process::Command::new(bin)
                .args([
                    sub,
                    "--config",
                    config_path.to_str().unwrap(),
                    "--seed",
                    "7",
                    "--out",
                    out.to_str().unwrap(),
                ])
                .status()
                .unwrap();
            assert!(status.success(), "{sub} failed");
        }
    };
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    run(&out_a);
    run(&out_b);

    let mut mismatches = Vec::new();
    let mut names: Vec<String> = std::fs::read_dir(&out_a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert!(names.len() >= 10, "expected a full artifact set, got {names:?}");
    for name in &names {
        let a = comparable_content(&out_a.join(name));
        let b = comparable_content(&out_b.join(name));
        if a != b {
            mismatches.push(name.clone());
        }
    }
    verdict(
        12,
        "byte-identical artifacts across reruns",
        mismatches.is_empty(),
        &format!("{} artifacts compared, mismatches: {mismatches:?}", names.len()),
    );
}

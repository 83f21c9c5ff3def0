//! Goal-based dynamic portfolio optimization with G-learning and GIRL.
//!
//! The library covers the full desk-scale experiment loop:
//!
//! - [`market`] — synthetic market factor (GBM), a one-factor risky-asset
//!   universe, and expected/realized per-step return panels.
//! - [`reward`] — the target-tracking quadratic reward, both in direct form
//!   and as per-timestep quadratic coefficient blocks.
//! - [`glearner`] — finite-horizon backward solve of the KL-regularized
//!   Bellman recursion, yielding per-timestep Gaussian policies, plus forward
//!   rollouts under realized returns.
//! - [`girl`] — inverse reinforcement learning: recovers the reward
//!   parameters from observed trajectories by maximizing their
//!   log-likelihood with finite-difference gradient descent.
//! - [`analytics`] — Sharpe ratio and benchmark-tracking performance
//!   reports.
//! - [`io`] — CSV/JSON import and export for every artifact.
//!
//! All stochastic operations take explicit seeds and are bit-reproducible;
//! see [`rng`] for the seed-derivation rule.

pub mod analytics;
pub mod error;
pub mod girl;
pub mod glearner;
pub mod io;
pub mod linalg;
pub mod market;
pub mod reward;
pub mod rng;

pub use error::{Error, Result};

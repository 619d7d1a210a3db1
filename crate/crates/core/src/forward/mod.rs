//! The forward step: PPO with a Lagrangian cost penalty, and an exact
//! maximum-entropy solver for small tabular problems.

mod gae;
mod policy;
mod ppo;
mod rollout;
mod solve;
mod tabular;

pub use gae::{gae, returns};
pub use policy::{PolicyBundle, PolicyHead};
pub use ppo::{lagrangian_step, ppo_update, PpoConfig, PpoStats, PpoTrainer};
pub use rollout::{collect_rollouts, GaeParams, RolloutBatch, StepRecord};
pub use solve::{solve_forward, ForwardConfig, ForwardProblem, ForwardReport};
pub(crate) use tabular::log_sum_exp;
pub use tabular::{enumerate_trajectories, exact_kl, soft_solve, SoftSolution, TabTrajectory, TabularMDP};

use std::fmt;

use crate::envs::{Action, Environment};

/// A per-pair feasibility score `zeta(s, a)` in `[0, 1]`. The forward step
/// charges `1 - zeta` as cost.
pub trait PairScore: Send + Sync + fmt::Debug {
    fn score(&self, env: &dyn Environment, state: &[f64], action: &Action) -> f64;

    /// True when the score is identically 1, so the cost stream can be
    /// skipped altogether.
    fn is_unconstrained(&self) -> bool {
        false
    }
}

/// `zeta = 1` everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unconstrained;

impl PairScore for Unconstrained {
    fn score(&self, _env: &dyn Environment, _state: &[f64], _action: &Action) -> f64 {
        1.0
    }

    fn is_unconstrained(&self) -> bool {
        true
    }
}

/// The environment's true constraint as a 0/1 score. Only expert
/// generation uses this.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrueIndicator;

impl PairScore for TrueIndicator {
    fn score(&self, env: &dyn Environment, state: &[f64], action: &Action) -> f64 {
        if env.true_violation(state, action) {
            0.0
        } else {
            1.0
        }
    }
}

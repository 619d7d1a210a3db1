//! Inverse constrained reinforcement learning.
//!
//! Given demonstrations from an agent that respects some unknown set of
//! hard constraints, and a nominal simulator that knows only the reward,
//! this crate learns a neural constraint function `zeta(s, a)` in `(0, 1)`
//! by maximum likelihood under a maximum-entropy trajectory model. Learning
//! alternates two steps:
//!
//! - a *forward* step ([`forward`]) that trains a policy with PPO on the
//!   Lagrangian of the constrained objective, using `1 - zeta` as the cost;
//! - a *backward* step ([`backward`]) that updates `zeta` with the
//!   sample-based likelihood gradient, corrected by importance weights and
//!   stopped early when the implied policy divergence grows too large.
//!
//! The [`driver`] module wires these into full runs, generates experts,
//! evaluates policies and transfers learned constraints between agents.
//! [`baselines`] holds the binary-classifier and GAIL-style comparisons.

pub mod backward;
pub mod baselines;
pub mod driver;
pub mod envs;
mod error;
pub mod forward;
pub mod nn;

pub use error::{Error, Result};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{run_episode, Environment, Mode, Trajectory};
use crate::forward::PolicyBundle;
use crate::Result;

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub iteration: usize,
    /// Environment steps used for training so far.
    pub timesteps: usize,
    /// Mean return in the constrained environment.
    pub true_reward: f64,
    /// Mean return in the nominal environment.
    pub nominal_reward: f64,
    /// True violations per step in the nominal environment.
    pub violation_rate: f64,
    pub lambda: f64,
    pub forward_bound: f64,
    pub reverse_bound: f64,
    pub backward_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub true_reward: f64,
    pub nominal_reward: f64,
    pub violation_rate: f64,
}

/// Rolls the policy out `episodes` times in each mode, taking the mode of
/// the action distribution unless `stochastic`.
pub fn evaluate<R: Rng + ?Sized>(
    bundle: &PolicyBundle,
    env: &dyn Environment,
    episodes: usize,
    stochastic: bool,
    rng: &mut R,
) -> Result<Evaluation> {
    let mut roll = |mode| -> Result<Vec<Trajectory>> {
        (0..episodes)
            .map(|k| {
                run_episode(env, mode, k as u64, |s| {
                    let obs = env.observe(s);
                    if stochastic {
                        Ok(bundle.sample(&obs, rng)?.0)
                    } else {
                        bundle.greedy(&obs)
                    }
                })
            })
            .collect()
    };
    let constrained = roll(Mode::Constrained)?;
    let nominal = roll(Mode::Nominal)?;
    let mean = |ts: &[Trajectory]| ts.iter().map(|t| t.total_reward()).sum::<f64>() / ts.len().max(1) as f64;
    let steps: usize = nominal.iter().map(|t| t.len()).sum();
    let violations: usize = nominal.iter().map(|t| t.count_violations(env)).sum();
    Ok(Evaluation {
        true_reward: mean(&constrained),
        nominal_reward: mean(&nominal),
        violation_rate: violations as f64 / steps.max(1) as f64,
    })
}

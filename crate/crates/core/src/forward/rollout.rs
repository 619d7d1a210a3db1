use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{gae, returns, PairScore, PolicyBundle};
use crate::baselines::gc_reward;
use crate::envs::{Action, Environment, Episode, Mode, Trajectory};
use crate::Result;

/// Discount and GAE parameters for the reward and cost streams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaeParams {
    pub reward_gamma: f64,
    pub reward_lambda: f64,
    pub cost_gamma: f64,
    pub cost_lambda: f64,
}

impl Default for GaeParams {
    fn default() -> Self {
        Self {
            reward_gamma: 0.99,
            reward_lambda: 0.95,
            cost_gamma: 0.99,
            cost_lambda: 0.95,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepRecord {
    pub obs: Vec<f64>,
    pub action: Action,
    pub log_prob: f64,
    /// Reward the policy is trained on (environment reward plus any bonus).
    pub reward: f64,
    /// `1 - zeta(s, a)`.
    pub cost: f64,
    pub reward_value: f64,
    pub cost_value: f64,
    pub reward_adv: f64,
    pub cost_adv: f64,
    pub reward_ret: f64,
    pub cost_ret: f64,
}

/// Whole episodes collected in the nominal environment.
#[derive(Debug, Clone)]
pub struct RolloutBatch {
    pub steps: Vec<StepRecord>,
    pub trajectories: Vec<Trajectory>,
    /// Undiscounted environment return of each episode.
    pub episode_returns: Vec<f64>,
    /// Discounted cost `sum_t gamma^t (1 - zeta)` of each episode.
    pub episode_costs: Vec<f64>,
}

impl RolloutBatch {
    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn mean_return(&self) -> f64 {
        mean(&self.episode_returns)
    }

    /// Estimate of `J^c`, the expected discounted episode cost.
    pub fn mean_cost(&self) -> f64 {
        mean(&self.episode_costs)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Runs full episodes with sampled actions until at least `min_steps`
/// steps are collected. With `reward_bonus`, each step's training reward
/// becomes [`gc_reward`] of the environment reward and the bonus score.
pub fn collect_rollouts<R: Rng + ?Sized>(
    env: &dyn Environment,
    bundle: &PolicyBundle,
    cost: &dyn PairScore,
    reward_bonus: Option<&dyn PairScore>,
    min_steps: usize,
    params: &GaeParams,
    rng: &mut R,
) -> Result<RolloutBatch> {
    let unconstrained = cost.is_unconstrained();
    let mut batch = RolloutBatch {
        steps: Vec::with_capacity(min_steps + env.spec().horizon),
        trajectories: Vec::new(),
        episode_returns: Vec::new(),
        episode_costs: Vec::new(),
    };
    while batch.steps.len() < min_steps.max(1) {
        let mut episode = Episode::new(env, Mode::Nominal, rng.random());
        let mut transitions = Vec::new();
        let first = batch.steps.len();
        let (mut env_return, mut disc_cost, mut discount) = (0.0, 0.0, 1.0);
        while !episode.is_done() {
            let state = episode.state().to_vec();
            let obs = env.observe(&state);
            let (action, log_prob) = bundle.sample(&obs, rng)?;
            let tr = episode.step(&action)?;
            let c = if unconstrained {
                0.0
            } else {
                1.0 - cost.score(env, &state, &action)
            };
            let mut reward = tr.reward;
            if let Some(bonus) = reward_bonus {
                reward = gc_reward(reward, bonus.score(env, &state, &action));
            }
            env_return += tr.reward;
            disc_cost += discount * c;
            discount *= params.cost_gamma;
            batch.steps.push(StepRecord {
                reward_value: bundle.reward_value(&obs)?,
                cost_value: if unconstrained { 0.0 } else { bundle.cost_value(&obs)? },
                obs,
                action,
                log_prob,
                reward,
                cost: c,
                reward_adv: 0.0,
                cost_adv: 0.0,
                reward_ret: 0.0,
                cost_ret: 0.0,
            });
            transitions.push(tr);
        }
        let steps = &mut batch.steps[first..];
        // Finished or truncated, the episode bootstraps from 0.
        let (rewards, mut r_values): (Vec<f64>, Vec<f64>) = steps.iter().map(|s| (s.reward, s.reward_value)).unzip();
        r_values.push(0.0);
        let r_adv = gae(&rewards, &r_values, params.reward_gamma, params.reward_lambda)?;
        let r_ret = returns(&r_adv, &r_values);
        let (costs, mut c_values): (Vec<f64>, Vec<f64>) = steps.iter().map(|s| (s.cost, s.cost_value)).unzip();
        c_values.push(0.0);
        let c_adv = gae(&costs, &c_values, params.cost_gamma, params.cost_lambda)?;
        let c_ret = returns(&c_adv, &c_values);
        for (i, s) in steps.iter_mut().enumerate() {
            s.reward_adv = r_adv[i];
            s.reward_ret = r_ret[i];
            s.cost_adv = c_adv[i];
            s.cost_ret = c_ret[i];
        }
        batch.trajectories.push(Trajectory::new(transitions)?);
        batch.episode_returns.push(env_return);
        batch.episode_costs.push(disc_cost);
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::make_env;
    use crate::forward::{TrueIndicator, Unconstrained};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn batches_hold_whole_chained_episodes() {
        let env = make_env("lap-gridworld").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = PolicyBundle::new(env.spec(), &[8], -0.5, 1.0, 0.0, 0.0, &mut rng).unwrap();
        let batch = collect_rollouts(
            env.as_ref(),
            &b,
            &TrueIndicator,
            None,
            250,
            &GaeParams::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(batch.trajectories.len(), 2);
        assert_eq!(batch.num_steps(), 400);
        assert!(batch.steps.iter().all(|s| s.cost == 0.0 || s.cost == 1.0));
        // a uniform policy moves counter-clockwise about half the time
        assert!(batch.mean_cost() > 1.0);
        let free = collect_rollouts(
            env.as_ref(),
            &b,
            &Unconstrained,
            None,
            1,
            &GaeParams::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(free.mean_cost(), 0.0);
    }
}

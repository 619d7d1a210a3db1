use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    collect_rollouts, lagrangian_step, ppo_update, GaeParams, PairScore, PolicyBundle, PpoConfig, PpoTrainer,
    RolloutBatch,
};
use crate::envs::Environment;
use crate::Result;

/// Settings of the PPO-Lagrangian forward solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForwardConfig {
    pub hidden: Vec<usize>,
    pub policy_lr: f64,
    pub value_lr: f64,
    pub ppo: PpoConfig,
    pub gae: GaeParams,
    pub entropy_coeff: f64,
    pub log_std_init: f64,
    pub lambda_init: f64,
    pub lambda_lr: f64,
    pub budget: f64,
    /// Environment steps collected per PPO iteration.
    pub rollout_steps: usize,
    /// PPO iterations per forward solve.
    pub iterations: usize,
    /// Converged when the last batch's discounted cost is at most
    /// `budget + cost_tolerance`.
    pub cost_tolerance: f64,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            policy_lr: 3e-4,
            value_lr: 3e-4,
            ppo: PpoConfig::default(),
            gae: GaeParams::default(),
            entropy_coeff: 0.0,
            log_std_init: -0.5,
            lambda_init: 1.0,
            lambda_lr: 0.1,
            budget: 0.0,
            rollout_steps: 2048,
            iterations: 20,
            cost_tolerance: 0.1,
        }
    }
}

impl ForwardConfig {
    pub fn new_trainer<R: Rng + ?Sized>(&self, env: &dyn Environment, rng: &mut R) -> Result<PpoTrainer> {
        let bundle = PolicyBundle::new(
            env.spec(),
            &self.hidden,
            self.log_std_init,
            self.lambda_init,
            self.entropy_coeff,
            self.budget,
            rng,
        )?;
        PpoTrainer::new(bundle, self.policy_lr, self.value_lr)
    }
}

/// What the forward step optimizes: the environment reward (plus an
/// optional log-score bonus) subject to the cost `1 - cost.score`.
#[derive(Debug, Clone, Copy)]
pub struct ForwardProblem<'a> {
    pub env: &'a dyn Environment,
    pub cost: &'a dyn PairScore,
    pub reward_bonus: Option<&'a dyn PairScore>,
}

#[derive(Debug, Clone)]
pub struct ForwardReport {
    pub converged: bool,
    pub iterations: usize,
    pub timesteps: usize,
    /// Discounted cost and return of the last batch collected.
    pub final_cost: f64,
    pub final_return: f64,
    pub last_batch: Option<RolloutBatch>,
}

/// Runs `cfg.iterations` rounds of collect / dual step / PPO update,
/// continuing from the trainer's current state. Without a cost (an
/// unconstrained score) lambda is pinned at 0 and the run always counts as
/// converged.
pub fn solve_forward<R: Rng + ?Sized>(
    problem: ForwardProblem<'_>,
    trainer: &mut PpoTrainer,
    cfg: &ForwardConfig,
    rng: &mut R,
) -> Result<ForwardReport> {
    let with_cost = !problem.cost.is_unconstrained();
    if !with_cost {
        trainer.bundle.lambda = 0.0;
    }
    let mut report = ForwardReport {
        converged: !with_cost,
        iterations: 0,
        timesteps: 0,
        final_cost: 0.0,
        final_return: 0.0,
        last_batch: None,
    };
    for _ in 0..cfg.iterations {
        let batch = collect_rollouts(
            problem.env,
            &trainer.bundle,
            problem.cost,
            problem.reward_bonus,
            cfg.rollout_steps,
            &cfg.gae,
            rng,
        )?;
        let j_c = batch.mean_cost();
        if with_cost {
            let b = &mut trainer.bundle;
            b.lambda = lagrangian_step(b.lambda, j_c, b.budget, cfg.lambda_lr);
        }
        ppo_update(trainer, &batch, &cfg.ppo, with_cost, rng)?;
        report.iterations += 1;
        report.timesteps += batch.num_steps();
        report.final_cost = j_c;
        report.final_return = batch.mean_return();
        report.converged = !with_cost || j_c <= trainer.bundle.budget + cfg.cost_tolerance;
        report.last_batch = Some(batch);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::make_env;
    use crate::forward::{TrueIndicator, Unconstrained};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> ForwardConfig {
        ForwardConfig {
            hidden: vec![16],
            policy_lr: 1e-2,
            value_lr: 1e-2,
            rollout_steps: 64,
            iterations: 30,
            ..ForwardConfig::default()
        }
    }

    #[test]
    fn unconstrained_bandit_finds_best_arm() {
        let env = make_env("bandit").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = small_cfg();
        let mut trainer = cfg.new_trainer(env.as_ref(), &mut rng).unwrap();
        let problem = ForwardProblem {
            env: env.as_ref(),
            cost: &Unconstrained,
            reward_bonus: None,
        };
        let report = solve_forward(problem, &mut trainer, &cfg, &mut rng).unwrap();
        assert!(report.converged);
        assert_eq!(trainer.bundle.lambda, 0.0);
        let obs = env.observe(&env.reset(0));
        assert!(trainer.bundle.action_probs(&obs).unwrap()[0] > 0.9);
    }

    #[test]
    fn two_path_avoids_costly_lane() {
        let env = make_env("two-path").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = ForwardConfig {
            iterations: 60,
            ..small_cfg()
        };
        let mut trainer = cfg.new_trainer(env.as_ref(), &mut rng).unwrap();
        let problem = ForwardProblem {
            env: env.as_ref(),
            cost: &TrueIndicator,
            reward_bonus: None,
        };
        let report = solve_forward(problem, &mut trainer, &cfg, &mut rng).unwrap();
        let p_lower = trainer.bundle.action_probs(&env.observe(&env.reset(0))).unwrap()[1];
        assert!(p_lower < 0.01, "lower lane probability {p_lower}");
        assert!(report.converged);
    }

    #[test]
    fn zero_iterations_flag_non_convergence_under_cost() {
        let env = make_env("two-path").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = ForwardConfig {
            iterations: 0,
            ..small_cfg()
        };
        let mut trainer = cfg.new_trainer(env.as_ref(), &mut rng).unwrap();
        let problem = ForwardProblem {
            env: env.as_ref(),
            cost: &TrueIndicator,
            reward_bonus: None,
        };
        assert!(!solve_forward(problem, &mut trainer, &cfg, &mut rng).unwrap().converged);
    }
}

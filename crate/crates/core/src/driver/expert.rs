use rand::Rng;

use super::ExpertConfig;
use crate::envs::{run_episode, Environment, Mode, Trajectory};
use crate::forward::{solve_forward, ForwardProblem, PolicyBundle, TrueIndicator};
use crate::{Error, Result};

/// Trains a policy against the true constraint and records
/// `cfg.rollouts` sampled constrained-mode episodes. Episodes that touch
/// the constraint are discarded; an attempt fails if the solver did not
/// converge, too many episodes were discarded or the mean return is below
/// `cfg.min_return`. Each attempt starts from a fresh policy.
pub fn generate_expert<R: Rng + ?Sized>(
    env: &dyn Environment,
    cfg: &ExpertConfig,
    rng: &mut R,
) -> Result<(PolicyBundle, Vec<Trajectory>)> {
    let mut failures = Vec::new();
    for attempt in 0..cfg.max_attempts {
        let mut trainer = cfg.forward.new_trainer(env, rng)?;
        let problem = ForwardProblem {
            env,
            cost: &TrueIndicator,
            reward_bonus: None,
        };
        let report = solve_forward(problem, &mut trainer, &cfg.forward, rng)?;
        if !report.converged {
            failures.push(format!(
                "attempt {attempt}: discounted cost {:.3} above tolerance",
                report.final_cost
            ));
            continue;
        }
        let bundle = trainer.bundle;
        let mut kept = Vec::with_capacity(cfg.rollouts);
        for k in 0..cfg.rollouts * 10 {
            if kept.len() == cfg.rollouts {
                break;
            }
            let traj = run_episode(env, Mode::Constrained, k as u64, |s| {
                Ok(bundle.sample(&env.observe(s), rng)?.0)
            })?;
            if traj.count_violations(env) == 0 {
                kept.push(traj);
            }
        }
        if kept.len() < cfg.rollouts {
            failures.push(format!(
                "attempt {attempt}: only {} of {} episodes avoided the constraint",
                kept.len(),
                cfg.rollouts
            ));
            continue;
        }
        let mean = kept.iter().map(|t| t.total_reward()).sum::<f64>() / kept.len() as f64;
        if let Some(min) = cfg.min_return {
            if mean < min {
                failures.push(format!("attempt {attempt}: mean return {mean:.2} below {min}"));
                continue;
            }
        }
        return Ok((bundle, kept));
    }
    Err(Error::NotConverged(format!(
        "no usable expert for {}: {}",
        env.spec().name,
        failures.join("; ")
    )))
}

/// Checks that a dataset could have come from `env` under the true
/// constraint: each trajectory starts at the reset state, every step is
/// reproduced by the simulator, only the last step is terminal, the
/// horizon is respected and no step violates the constraint.
pub fn lint_dataset(env: &dyn Environment, trajectories: &[Trajectory]) -> Result<()> {
    let bad = |i: usize, msg: String| Err(Error::MalformedTrajectory(format!("trajectory {i}: {msg}")));
    for (i, traj) in trajectories.iter().enumerate() {
        let steps = traj.transitions();
        if steps[0].state != env.reset(i as u64) {
            return bad(i, "does not start at the reset state".into());
        }
        if steps.len() > env.spec().horizon {
            return bad(i, format!("{} steps exceed the horizon", steps.len()));
        }
        for (t, tr) in steps.iter().enumerate() {
            if env.true_violation(&tr.state, &tr.action) {
                return bad(i, format!("step {t} violates the true constraint"));
            }
            let out = env.step(&tr.state, &tr.action)?;
            if out.next_state != tr.next_state || out.reward != tr.reward {
                return bad(i, format!("step {t} is not reproduced by the simulator"));
            }
            let last = t + 1 == steps.len();
            let should_end = out.terminal || t + 1 == env.spec().horizon;
            if tr.done != last || (last && !should_end) {
                return bad(i, format!("step {t} has an inconsistent end flag"));
            }
        }
    }
    Ok(())
}

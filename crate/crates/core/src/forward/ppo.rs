use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::policy::PolicyGrad;
use super::{PolicyBundle, RolloutBatch, StepRecord};
use crate::nn::Adam;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub clip: f64,
    pub target_kl: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            target_kl: 0.01,
            epochs: 10,
            minibatch_size: 64,
        }
    }
}

/// A [`PolicyBundle`] together with its optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoTrainer {
    pub bundle: PolicyBundle,
    policy_opt: Adam,
    log_std_opt: Adam,
    reward_value_opt: Adam,
    cost_value_opt: Adam,
}

impl PpoTrainer {
    pub fn new(bundle: PolicyBundle, policy_lr: f64, value_lr: f64) -> Result<Self> {
        Ok(Self {
            policy_opt: Adam::new(bundle.policy_net.num_params(), policy_lr)?,
            log_std_opt: Adam::new(bundle.log_std().len(), policy_lr)?,
            reward_value_opt: Adam::new(bundle.reward_value_net.num_params(), value_lr)?,
            cost_value_opt: Adam::new(bundle.cost_value_net.num_params(), value_lr)?,
            bundle,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PpoStats {
    pub epochs_run: usize,
    pub minibatches: usize,
    /// Approximate KL of the last checked minibatch.
    pub approx_kl: f64,
    pub stopped_early: bool,
}

/// Projected dual ascent: `max(0, lambda + lr * (j_c - alpha))`.
pub fn lagrangian_step(lambda: f64, j_c: f64, alpha: f64, lr: f64) -> f64 {
    (lambda + lr * (j_c - alpha)).max(0.0)
}

/// Smallest spread the cost advantages are divided by. Per-step costs lie
/// in `[0, 1]`, so an absolute floor is meaningful; measured spreads are
/// about 1e-4 for a feasible policy and 1e-2 or more while the constraint
/// still binds.
const COST_STD_FLOOR: f64 = 1e-2;

/// Centers and divides by `max(std, floor) + 1e-8`.
fn normalized(v: Vec<f64>, floor: f64) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    v.iter().map(|x| (x - mean) / (std.max(floor) + 1e-8)).collect()
}

/// Combined per-sample advantages of one minibatch: each stream is
/// normalized within the minibatch, then `(A_r - lambda * A_c) / (1 + lambda)`.
/// The cost spread is floored: once the policy stops violating, the cost
/// stream is nearly constant and full rescaling would turn its noise into a
/// unit-size signal.
pub(crate) fn combined_advantages(steps: &[&StepRecord], lambda: f64, with_cost: bool) -> Vec<f64> {
    let a_r = normalized(steps.iter().map(|s| s.reward_adv).collect(), 0.0);
    if !with_cost {
        return a_r;
    }
    let a_c = normalized(steps.iter().map(|s| s.cost_adv).collect(), COST_STD_FLOOR);
    a_r.iter()
        .zip(&a_c)
        .map(|(r, c)| (r - lambda * c) / (1.0 + lambda))
        .collect()
}

/// Gradient of the clipped surrogate plus entropy bonus on one minibatch,
/// and the approximate KL `mean((r - 1) - ln r)` before any update.
pub(crate) fn surrogate_gradient(
    bundle: &PolicyBundle,
    steps: &[&StepRecord],
    advantages: &[f64],
    clip: f64,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let n = steps.len() as f64;
    let mut g_net = vec![0.0; bundle.policy_net.num_params()];
    let mut g_std = vec![0.0; bundle.log_std().len()];
    let mut kl = 0.0;
    for (s, &adv) in steps.iter().zip(advantages) {
        let mut ratio = 0.0;
        bundle.accumulate_grad(
            &s.obs,
            &s.action,
            |lp| {
                ratio = (lp - s.log_prob).exp();
                let active = if adv >= 0.0 {
                    ratio < 1.0 + clip
                } else {
                    ratio > 1.0 - clip
                };
                if active {
                    ratio * adv / n
                } else {
                    0.0
                }
            },
            bundle.entropy_coeff / n,
            PolicyGrad {
                net: &mut g_net,
                log_std: &mut g_std,
            },
        )?;
        kl += (ratio - 1.0) - ratio.ln();
    }
    Ok((g_net, g_std, kl / n))
}

fn value_step(
    net: &mut crate::nn::Mlp,
    opt: &mut Adam,
    steps: &[&StepRecord],
    target: impl Fn(&StepRecord) -> f64,
) -> Result<()> {
    let n = steps.len() as f64;
    let mut grad = vec![0.0; net.num_params()];
    for s in steps {
        let cache = net.forward_cached(&s.obs)?;
        let err = cache.output()[0] - target(s);
        net.backward_cached(&cache, &[2.0 * err / n], &mut grad)?;
    }
    opt.step(net.params_mut(), &grad)
}

/// Clipped-ratio PPO epochs over `batch`, regressing both value networks to
/// their returns. Stops early once the approximate KL of a minibatch
/// exceeds the target. The trainer is left untouched on error or if any
/// parameter becomes non-finite.
pub fn ppo_update<R: Rng + ?Sized>(
    trainer: &mut PpoTrainer,
    batch: &RolloutBatch,
    cfg: &PpoConfig,
    with_cost: bool,
    rng: &mut R,
) -> Result<PpoStats> {
    if cfg.minibatch_size == 0 {
        return Err(Error::Config("ppo minibatch size must be positive".into()));
    }
    let mut next = trainer.clone();
    let mut stats = PpoStats::default();
    let mut order: Vec<usize> = (0..batch.steps.len()).collect();
    'epochs: for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            let steps: Vec<&StepRecord> = chunk.iter().map(|&i| &batch.steps[i]).collect();
            let adv = combined_advantages(&steps, next.bundle.lambda, with_cost);
            let (g_net, g_std, kl) = surrogate_gradient(&next.bundle, &steps, &adv, cfg.clip)?;
            stats.approx_kl = kl;
            if kl > cfg.target_kl {
                stats.stopped_early = true;
                break 'epochs;
            }
            next.policy_opt.ascend(next.bundle.policy_net.params_mut(), &g_net)?;
            next.log_std_opt.ascend(next.bundle.log_std_mut(), &g_std)?;
            value_step(
                &mut next.bundle.reward_value_net,
                &mut next.reward_value_opt,
                &steps,
                |s| s.reward_ret,
            )?;
            if with_cost {
                value_step(&mut next.bundle.cost_value_net, &mut next.cost_value_opt, &steps, |s| {
                    s.cost_ret
                })?;
            }
            stats.minibatches += 1;
        }
        stats.epochs_run += 1;
    }
    if !next.bundle.is_finite() {
        return Err(Error::NonFinite("ppo update"));
    }
    *trainer = next;
    Ok(stats)
}

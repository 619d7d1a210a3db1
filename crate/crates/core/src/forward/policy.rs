//! Stochastic policies plus the two value networks PPO-Lagrangian needs.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::envs::{Action, ActionSpace, EnvSpec};
use crate::nn::{Activation, Mlp};
use crate::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Reach of the squashed Gaussian mean relative to the action box. The box
/// edge sits at `tanh(z) = 1 / MEAN_RANGE`, so a policy pushed to the edge
/// keeps a usable gradient; samples beyond the box are clipped by the env.
pub const MEAN_RANGE: f64 = 1.5;

/// Output head of the policy network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PolicyHead {
    /// The network emits logits of a categorical distribution.
    Categorical { n: usize },
    /// The network emits `z`; the action mean is `center + half * tanh(z)`
    /// and the standard deviation is `exp(log_std)`, shared across states.
    /// `half` is `MEAN_RANGE` times the box half-width.
    Gaussian {
        center: Vec<f64>,
        half: Vec<f64>,
        log_std: Vec<f64>,
    },
}

/// Policy, reward-value and cost-value networks with the Lagrange
/// multiplier and the objective's fixed coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyBundle {
    pub policy_net: Mlp,
    pub head: PolicyHead,
    pub reward_value_net: Mlp,
    pub cost_value_net: Mlp,
    pub lambda: f64,
    pub entropy_coeff: f64,
    pub budget: f64,
}

/// Distribution parameters for one observation.
#[derive(Debug, Clone)]
pub(crate) enum Dist {
    Categorical { log_probs: Vec<f64> },
    Gaussian { mean: Vec<f64>, log_std: Vec<f64> },
}

impl Dist {
    pub(crate) fn log_prob(&self, action: &Action) -> Result<f64> {
        match (self, action) {
            (Dist::Categorical { log_probs }, Action::Discrete(a)) => log_probs
                .get(*a)
                .copied()
                .ok_or_else(|| Error::InvalidAction(format!("action {a} out of range"))),
            (Dist::Gaussian { mean, log_std }, Action::Continuous(x)) if x.len() == mean.len() => {
                Ok(gaussian_log_prob(x, mean, log_std))
            }
            _ => Err(Error::InvalidAction(format!(
                "action {action:?} does not match the policy head"
            ))),
        }
    }

    pub(crate) fn entropy(&self) -> f64 {
        match self {
            Dist::Categorical { log_probs } => -log_probs
                .iter()
                .map(|lp| if lp.is_finite() { lp.exp() * lp } else { 0.0 })
                .sum::<f64>(),
            Dist::Gaussian { log_std, .. } => log_std.iter().map(|s| s + 0.5 * (LN_2PI + 1.0)).sum(),
        }
    }
}

fn gaussian_log_prob(x: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    x.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((x, m), s)| {
            let z = (x - m) / s.exp();
            -0.5 * z * z - s - 0.5 * LN_2PI
        })
        .sum()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

/// Gradients of one sample's objective w.r.t. the policy parameters.
pub(crate) struct PolicyGrad<'a> {
    pub net: &'a mut [f64],
    pub log_std: &'a mut [f64],
}

impl PolicyBundle {
    /// Fresh bundle for `spec` with tanh hidden layers of the given widths.
    pub fn new<R: Rng + ?Sized>(
        spec: &EnvSpec,
        hidden: &[usize],
        log_std_init: f64,
        lambda: f64,
        entropy_coeff: f64,
        budget: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if lambda < 0.0 {
            return Err(Error::Config(format!("initial lambda must be >= 0, got {lambda}")));
        }
        let (out_dim, head) = match &spec.action_space {
            ActionSpace::Discrete { n } => (*n, PolicyHead::Categorical { n: *n }),
            ActionSpace::Box { low, high } => (
                low.len(),
                PolicyHead::Gaussian {
                    center: low.iter().zip(high).map(|(l, h)| 0.5 * (l + h)).collect(),
                    half: low.iter().zip(high).map(|(l, h)| MEAN_RANGE * 0.5 * (h - l)).collect(),
                    log_std: vec![log_std_init; low.len()],
                },
            ),
        };
        let dims = |out: usize| {
            let mut d = vec![spec.state_dim];
            d.extend_from_slice(hidden);
            d.push(out);
            d
        };
        Ok(Self {
            policy_net: Mlp::new(&dims(out_dim), Activation::Tanh, Activation::Identity, 0.01, rng)?,
            head,
            reward_value_net: Mlp::new(&dims(1), Activation::Tanh, Activation::Identity, 1.0, rng)?,
            cost_value_net: Mlp::new(&dims(1), Activation::Tanh, Activation::Identity, 1.0, rng)?,
            lambda,
            entropy_coeff,
            budget,
        })
    }

    pub fn log_std(&self) -> &[f64] {
        match &self.head {
            PolicyHead::Gaussian { log_std, .. } => log_std,
            PolicyHead::Categorical { .. } => &[],
        }
    }

    pub(crate) fn log_std_mut(&mut self) -> &mut [f64] {
        match &mut self.head {
            PolicyHead::Gaussian { log_std, .. } => log_std,
            PolicyHead::Categorical { .. } => &mut [],
        }
    }

    pub(crate) fn dist(&self, obs: &[f64]) -> Result<Dist> {
        let out = self.policy_net.forward(obs)?;
        Ok(self.dist_from_output(&out))
    }

    fn dist_from_output(&self, out: &[f64]) -> Dist {
        match &self.head {
            PolicyHead::Categorical { .. } => Dist::Categorical {
                log_probs: log_softmax(out),
            },
            PolicyHead::Gaussian { center, half, log_std } => Dist::Gaussian {
                mean: out
                    .iter()
                    .zip(center.iter().zip(half))
                    .map(|(z, (c, h))| c + h * z.tanh())
                    .collect(),
                log_std: log_std.clone(),
            },
        }
    }

    /// Samples an action and returns it with its log-probability.
    /// Continuous samples are not clipped here; environments clip them.
    pub fn sample<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<(Action, f64)> {
        let dist = self.dist(obs)?;
        let action = match &dist {
            Dist::Categorical { log_probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = log_probs.len() - 1;
                for (i, lp) in log_probs.iter().enumerate() {
                    acc += lp.exp();
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                Action::Discrete(pick)
            }
            Dist::Gaussian { mean, log_std } => Action::Continuous(
                mean.iter()
                    .zip(log_std)
                    .map(|(m, s)| {
                        let eps: f64 = StandardNormal.sample(rng);
                        m + s.exp() * eps
                    })
                    .collect(),
            ),
        };
        let lp = dist.log_prob(&action)?;
        Ok((action, lp))
    }

    /// Most likely action: the argmax for categorical heads, the mean for
    /// Gaussian ones.
    pub fn greedy(&self, obs: &[f64]) -> Result<Action> {
        Ok(match self.dist(obs)? {
            Dist::Categorical { log_probs } => {
                let mut best = 0;
                for (i, lp) in log_probs.iter().enumerate() {
                    if *lp > log_probs[best] {
                        best = i;
                    }
                }
                Action::Discrete(best)
            }
            Dist::Gaussian { mean, .. } => Action::Continuous(mean),
        })
    }

    pub fn log_prob(&self, obs: &[f64], action: &Action) -> Result<f64> {
        self.dist(obs)?.log_prob(action)
    }

    /// Action probabilities of a categorical head.
    pub fn action_probs(&self, obs: &[f64]) -> Result<Vec<f64>> {
        match self.dist(obs)? {
            Dist::Categorical { log_probs } => Ok(log_probs.iter().map(|l| l.exp()).collect()),
            Dist::Gaussian { .. } => Err(Error::InvalidAction("policy head is continuous".into())),
        }
    }

    pub fn reward_value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.reward_value_net.forward(obs)?[0])
    }

    pub fn cost_value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.cost_value_net.forward(obs)?[0])
    }

    /// Accumulates `d/dparams [w * log pi(a|obs) + w_ent * H(pi(.|obs))]`
    /// where `w = w_logp(log pi(a|obs))` is treated as a constant, and
    /// returns `log pi(a|obs)`.
    pub(crate) fn accumulate_grad(
        &self,
        obs: &[f64],
        action: &Action,
        w_logp: impl FnOnce(f64) -> f64,
        w_ent: f64,
        grad: PolicyGrad<'_>,
    ) -> Result<f64> {
        let cache = self.policy_net.forward_cached(obs)?;
        let out = cache.output();
        let dist = self.dist_from_output(out);
        let lp = dist.log_prob(action)?;
        let w_logp = w_logp(lp);
        let mut g_out = vec![0.0; out.len()];
        match (&dist, action) {
            (Dist::Categorical { log_probs }, Action::Discrete(a)) => {
                let entropy = dist.entropy();
                for (i, lp_i) in log_probs.iter().enumerate() {
                    let p = lp_i.exp();
                    let one = if i == *a { 1.0 } else { 0.0 };
                    // dH/dlogit_i = -p_i (log p_i + H)
                    g_out[i] = w_logp * (one - p) - w_ent * p * (lp_i + entropy);
                }
            }
            (Dist::Gaussian { mean, log_std }, Action::Continuous(x)) => {
                let PolicyHead::Gaussian { half, .. } = &self.head else {
                    unreachable!()
                };
                for k in 0..mean.len() {
                    let var = (2.0 * log_std[k]).exp();
                    let diff = x[k] - mean[k];
                    let t = out[k].tanh();
                    g_out[k] = w_logp * diff / var * half[k] * (1.0 - t * t);
                    grad.log_std[k] += w_logp * (diff * diff / var - 1.0) + w_ent;
                }
            }
            _ => unreachable!("log_prob already matched the action"),
        }
        self.policy_net.backward_cached(&cache, &g_out, grad.net)?;
        Ok(lp)
    }

    pub fn is_finite(&self) -> bool {
        self.policy_net.params().iter().all(|p| p.is_finite())
            && self.reward_value_net.params().iter().all(|p| p.is_finite())
            && self.cost_value_net.params().iter().all(|p| p.is_finite())
            && self.log_std().iter().all(|p| p.is_finite())
            && self.lambda.is_finite()
    }
}

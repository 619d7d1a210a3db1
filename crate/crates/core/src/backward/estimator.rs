//! Trajectory scores, importance weights, divergence bounds and the
//! likelihood gradient of the constraint net.

use serde::{Deserialize, Serialize};

use super::ConstraintNet;
use crate::envs::{pair_features, Environment, Trajectory};
use crate::forward::log_sum_exp;
use crate::{Error, Result};

/// Per-step weights are clipped into this range before entering the
/// gradient.
pub const WEIGHT_CLIP: (f64, f64) = (1e-3, 1e3);

/// Network inputs of every step of a trajectory.
pub fn prepare(net: &ConstraintNet, env: &dyn Environment, traj: &Trajectory) -> Result<Vec<Vec<f64>>> {
    traj.transitions()
        .iter()
        .map(|t| net.input(&pair_features(env, &t.state, &t.action)))
        .collect()
}

/// `ln zeta(tau) = sum_t ln zeta(s_t, a_t)`.
pub fn log_traj_score(net: &ConstraintNet, inputs: &[Vec<f64>]) -> Result<f64> {
    inputs.iter().map(|x| Ok(net.score_input(x)?.ln())).sum()
}

/// `zeta(tau)`, the product of per-step scores.
pub fn traj_score(net: &ConstraintNet, inputs: &[Vec<f64>]) -> Result<f64> {
    Ok(log_traj_score(net, inputs)?.exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceWeights {
    /// `zeta_theta(s, a) / zeta_ref(s, a)` per step, unclipped.
    pub per_step: Vec<f64>,
    /// `ln omega(tau)`, the sum of per-step log ratios.
    pub log_traj: f64,
}

impl ImportanceWeights {
    pub fn traj(&self) -> f64 {
        self.log_traj.exp()
    }
}

/// Weights of `net` relative to the sampling-time net `reference`.
pub fn importance_weights(
    net: &ConstraintNet,
    reference: &ConstraintNet,
    inputs: &[Vec<f64>],
) -> Result<ImportanceWeights> {
    if net.features != reference.features {
        return Err(Error::Config(
            "importance weights need nets over the same features".into(),
        ));
    }
    let mut per_step = Vec::with_capacity(inputs.len());
    let mut log_traj = 0.0;
    for x in inputs {
        let (a, b) = (net.score_input(x)?, reference.score_input(x)?);
        per_step.push(a / b);
        log_traj += a.ln() - b.ln();
    }
    Ok(ImportanceWeights { per_step, log_traj })
}

/// Divergence bounds `(2 ln w_bar, mean[(w - w_bar) ln w] / w_bar)` from
/// trajectory weights sampled under the reference policy.
pub fn kl_bounds(weights: &[f64]) -> Result<(f64, f64)> {
    if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(Error::Degenerate(
            "trajectory weights must be positive and finite".into(),
        ));
    }
    let logs: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    kl_bounds_log(&logs)
}

/// [`kl_bounds`] from `ln w`, evaluated without leaving log space for the
/// mean.
pub fn kl_bounds_log(log_weights: &[f64]) -> Result<(f64, f64)> {
    if log_weights.is_empty() {
        return Err(Error::Degenerate("kl bounds need at least one trajectory".into()));
    }
    if log_weights.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(Error::NonFinite("log trajectory weights"));
    }
    let n = log_weights.len() as f64;
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Degenerate("mean trajectory weight is not positive".into()));
    }
    // Dividing the shifted sum by n (rather than summing 1/n terms) keeps
    // equal weights exact.
    let log_mean = max + (log_weights.iter().map(|l| (l - max).exp()).sum::<f64>() / n).ln();
    let reverse = log_weights
        .iter()
        .map(|l| ((l - log_mean).exp() - 1.0) * l)
        .sum::<f64>()
        / n;
    Ok((2.0 * log_mean, reverse))
}

/// Bounds with the expectations taken exactly under the reference
/// distribution `probs` over an enumerated support.
pub fn kl_bounds_exact(probs: &[f64], log_weights: &[f64]) -> Result<(f64, f64)> {
    if probs.len() != log_weights.len() {
        return Err(Error::DimensionMismatch {
            context: "kl bound probabilities",
            expected: log_weights.len(),
            actual: probs.len(),
        });
    }
    if log_weights.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(Error::NonFinite("log trajectory weights"));
    }
    let terms: Vec<f64> = probs
        .iter()
        .zip(log_weights)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, l)| p.ln() + l)
        .collect();
    let log_mean = log_sum_exp(&terms);
    if !log_mean.is_finite() {
        return Err(Error::Degenerate("mean trajectory weight is not positive".into()));
    }
    let reverse = probs
        .iter()
        .zip(log_weights)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, l)| p * ((l - log_mean).exp() - 1.0) * l)
        .sum();
    Ok((2.0 * log_mean, reverse))
}

/// Granularity of the sparsity regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    /// `-delta * sum_t (1 - zeta(s_t, a_t))` per trajectory.
    #[default]
    PerStep,
    /// `-delta * (1 - zeta(tau))` per trajectory.
    Trajectory,
}

/// One pair's share of the gradient:
/// `(log_coef + reg_coef * zeta) * d ln zeta`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PairTerm<'a> {
    pub input: &'a [f64],
    pub log_coef: f64,
    pub reg_coef: f64,
}

/// Data for one gradient evaluation. Trajectories are lists of prepared
/// inputs; `nominal_weights` mirrors `nominal` step by step.
#[derive(Debug, Clone, Copy)]
pub struct GradBatch<'a> {
    pub expert: &'a [Vec<Vec<f64>>],
    pub nominal: &'a [Vec<Vec<f64>>],
    pub nominal_weights: &'a [Vec<f64>],
    /// Multiplies each nominal trajectory's contribution; `None` means 1.
    /// Passing `M * p(tau)` over an enumerated support turns the sample
    /// average into an exact expectation.
    pub nominal_scale: Option<&'a [f64]>,
}

pub(crate) fn build_terms<'a>(
    net: &ConstraintNet,
    batch: &GradBatch<'a>,
    delta: f64,
    reg: Regularizer,
) -> Result<(Vec<PairTerm<'a>>, Vec<PairTerm<'a>>)> {
    if batch.expert.is_empty() || batch.nominal.is_empty() {
        return Err(Error::Degenerate(
            "gradient needs expert and nominal trajectories".into(),
        ));
    }
    if batch.nominal_weights.len() != batch.nominal.len()
        || batch
            .nominal_weights
            .iter()
            .zip(batch.nominal)
            .any(|(w, t)| w.len() != t.len())
    {
        return Err(Error::DimensionMismatch {
            context: "per-step weights",
            expected: batch.nominal.len(),
            actual: batch.nominal_weights.len(),
        });
    }
    if batch
        .nominal_weights
        .iter()
        .flatten()
        .any(|w| !w.is_finite() || *w < 0.0)
    {
        return Err(Error::NonFinite("per-step importance weights"));
    }
    let n = batch.expert.len() as f64;
    let m = batch.nominal.len() as f64;
    let traj_reg = |inputs: &[Vec<f64>]| -> Result<f64> {
        Ok(match reg {
            Regularizer::PerStep => 0.0,
            Regularizer::Trajectory => delta * traj_score(net, inputs)?,
        })
    };
    let step_reg = match reg {
        Regularizer::PerStep => delta,
        Regularizer::Trajectory => 0.0,
    };
    let mut expert = Vec::new();
    for traj in batch.expert {
        let extra = traj_reg(traj)?;
        expert.extend(traj.iter().map(|x| PairTerm {
            input: x,
            log_coef: (1.0 + extra) / n,
            reg_coef: step_reg / n,
        }));
    }
    let mut nominal = Vec::new();
    for (j, (traj, w)) in batch.nominal.iter().zip(batch.nominal_weights).enumerate() {
        let c = batch.nominal_scale.map_or(1.0, |s| s[j]);
        let extra = traj_reg(traj)?;
        nominal.extend(traj.iter().zip(w).map(|(x, w)| PairTerm {
            input: x,
            log_coef: c * (extra - w) / m,
            reg_coef: c * step_reg / m,
        }));
    }
    Ok((expert, nominal))
}

pub(crate) fn accumulate_terms(
    net: &ConstraintNet,
    terms: &[PairTerm<'_>],
    scale: f64,
    grad: &mut [f64],
) -> Result<()> {
    for t in terms {
        net.accumulate_log_grad(t.input, |z| scale * (t.log_coef + t.reg_coef * z), grad)?;
    }
    Ok(())
}

/// Ascent direction on the regularized log-likelihood:
///
/// ```text
/// 1/N sum_i sum_t grad ln zeta(e_it)
///   - 1/M sum_j c_j sum_t w_jt grad ln zeta(n_jt)
///   + grad R
/// ```
pub fn grad_direction(net: &ConstraintNet, batch: &GradBatch<'_>, delta: f64, reg: Regularizer) -> Result<Vec<f64>> {
    let (expert, nominal) = build_terms(net, batch, delta, reg)?;
    let mut grad = vec![0.0; net.net.num_params()];
    accumulate_terms(net, &expert, 1.0, &mut grad)?;
    accumulate_terms(net, &nominal, 1.0, &mut grad)?;
    Ok(grad)
}

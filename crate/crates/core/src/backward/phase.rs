use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::estimator::{accumulate_terms, build_terms, importance_weights, kl_bounds_log};
use super::{ConstraintNet, GradBatch, Regularizer, WEIGHT_CLIP};
use crate::nn::Adam;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackwardConfig {
    /// Gradient iterations per phase (`B`).
    pub iterations: usize,
    /// Regularizer weight `delta`, in `[0, 1)`.
    pub delta: f64,
    pub max_forward_kl: f64,
    pub max_reverse_kl: f64,
    pub learning_rate: f64,
    /// Pairs per minibatch; `None` takes one full-batch step per iteration.
    pub minibatch_size: Option<usize>,
    pub hidden: Vec<usize>,
    pub regularizer: Regularizer,
    pub use_importance_sampling: bool,
    pub use_early_stopping: bool,
}

impl Default for BackwardConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            delta: 0.5,
            max_forward_kl: 10.0,
            max_reverse_kl: 2.5,
            learning_rate: 0.01,
            minibatch_size: Some(64),
            hidden: vec![20],
            regularizer: Regularizer::PerStep,
            use_importance_sampling: true,
            use_early_stopping: true,
        }
    }
}

impl BackwardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::Config(format!("delta must lie in [0, 1), got {}", self.delta)));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("backward learning rate must be positive".into()));
        }
        if self.minibatch_size == Some(0) {
            return Err(Error::Config("backward minibatch size must be positive".into()));
        }
        Ok(())
    }
}

/// A constraint net and its optimizer, kept across phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintLearner {
    pub net: ConstraintNet,
    opt: Adam,
}

impl ConstraintLearner {
    pub fn new(net: ConstraintNet, learning_rate: f64) -> Result<Self> {
        Ok(Self {
            opt: Adam::new(net.net.num_params(), learning_rate)?,
            net,
        })
    }

    /// One optimizer step along an ascent direction.
    pub fn ascend(&mut self, grad: &[f64]) -> Result<()> {
        self.opt.ascend(self.net.net.params_mut(), grad)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseReport {
    pub iterations: usize,
    pub stopped_early: bool,
    /// Bounds after the last iteration (0 if none ran).
    pub forward_bound: f64,
    pub reverse_bound: f64,
    /// Bounds after each iteration.
    pub bound_history: Vec<(f64, f64)>,
}

/// Up to `cfg.iterations` ascent steps on the constraint net using expert
/// and nominal trajectories (prepared inputs), the nominal ones sampled
/// under the net as it is on entry. After each iteration the divergence
/// bounds are estimated from the nominal sample and the phase stops once
/// either reaches its threshold.
pub fn backward_phase<R: Rng + ?Sized>(
    learner: &mut ConstraintLearner,
    expert: &[Vec<Vec<f64>>],
    nominal: &[Vec<Vec<f64>>],
    cfg: &BackwardConfig,
    rng: &mut R,
) -> Result<PhaseReport> {
    cfg.validate()?;
    let reference = learner.net.clone();
    let mut report = PhaseReport::default();
    for _ in 0..cfg.iterations {
        let weights: Vec<Vec<f64>> = if cfg.use_importance_sampling {
            nominal
                .iter()
                .map(|t| {
                    Ok(importance_weights(&learner.net, &reference, t)?
                        .per_step
                        .into_iter()
                        .map(|w| w.clamp(WEIGHT_CLIP.0, WEIGHT_CLIP.1))
                        .collect())
                })
                .collect::<Result<_>>()?
        } else {
            nominal.iter().map(|t| vec![1.0; t.len()]).collect()
        };
        let batch = GradBatch {
            expert,
            nominal,
            nominal_weights: &weights,
            nominal_scale: None,
        };
        let (mut e_terms, mut n_terms) = build_terms(&learner.net, &batch, cfg.delta, cfg.regularizer)?;
        let n_params = learner.net.net.num_params();
        match cfg.minibatch_size {
            None => {
                let mut grad = vec![0.0; n_params];
                accumulate_terms(&learner.net, &e_terms, 1.0, &mut grad)?;
                accumulate_terms(&learner.net, &n_terms, 1.0, &mut grad)?;
                learner.ascend(&grad)?;
            }
            Some(size) => {
                // Both pools are cut into the same number of chunks and each
                // chunk is rescaled, so every step is unbiased for the full
                // direction.
                e_terms.shuffle(rng);
                n_terms.shuffle(rng);
                let k = e_terms.len().max(n_terms.len()).div_ceil(size).max(1);
                for i in 0..k {
                    let mut grad = vec![0.0; n_params];
                    accumulate_terms(&learner.net, chunk(&e_terms, k, i), k as f64, &mut grad)?;
                    accumulate_terms(&learner.net, chunk(&n_terms, k, i), k as f64, &mut grad)?;
                    learner.ascend(&grad)?;
                }
            }
        }
        report.iterations += 1;
        let log_w: Vec<f64> = nominal
            .iter()
            .map(|t| Ok(importance_weights(&learner.net, &reference, t)?.log_traj))
            .collect::<Result<_>>()?;
        let (f, r) = kl_bounds_log(&log_w)?;
        report.forward_bound = f;
        report.reverse_bound = r;
        report.bound_history.push((f, r));
        if cfg.use_early_stopping && (f >= cfg.max_forward_kl || r >= cfg.max_reverse_kl) {
            report.stopped_early = true;
            break;
        }
    }
    Ok(report)
}

/// The `i`-th of `k` near-equal contiguous chunks.
fn chunk<T>(v: &[T], k: usize, i: usize) -> &[T] {
    let (lo, hi) = (v.len() * i / k, v.len() * (i + 1) / k);
    &v[lo..hi]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backward::FeatureMap;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn learner(seed: u64) -> ConstraintLearner {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = ConstraintNet::new(FeatureMap::all(2), 2, &[4], None, &mut rng).unwrap();
        ConstraintLearner::new(net, 0.01).unwrap()
    }

    type Trajs = Vec<Vec<Vec<f64>>>;

    fn data() -> (Trajs, Trajs) {
        let expert = vec![vec![vec![1.0, 0.0], vec![0.5, 0.5]]];
        let nominal = vec![
            vec![vec![-1.0, 0.0], vec![-0.5, 0.5], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0]],
        ];
        (expert, nominal)
    }

    #[test]
    fn zero_iterations_change_nothing() {
        let mut l = learner(0);
        let before = l.clone();
        let (e, n) = data();
        let cfg = BackwardConfig {
            iterations: 0,
            ..BackwardConfig::default()
        };
        let r = backward_phase(&mut l, &e, &n, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(l, before);
    }

    #[test]
    fn zero_thresholds_stop_after_one_step() {
        let mut l = learner(1);
        let (e, n) = data();
        let cfg = BackwardConfig {
            max_forward_kl: 0.0,
            max_reverse_kl: 0.0,
            ..BackwardConfig::default()
        };
        let r = backward_phase(&mut l, &e, &n, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.stopped_early);
        assert!(r.reverse_bound >= 0.0);
    }

    #[test]
    fn generous_thresholds_run_all_iterations() {
        let mut l = learner(2);
        let (e, n) = data();
        let cfg = BackwardConfig::default();
        let r = backward_phase(&mut l, &e, &n, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(r.iterations, 10);
        assert!(!r.stopped_early);
        for (f, rev) in &r.bound_history {
            assert!(*f < cfg.max_forward_kl && *rev < cfg.max_reverse_kl);
        }
    }

    #[test]
    fn delta_outside_range_is_rejected() {
        let mut l = learner(3);
        let (e, n) = data();
        let cfg = BackwardConfig {
            delta: 1.0,
            ..BackwardConfig::default()
        };
        assert!(backward_phase(&mut l, &e, &n, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}

//! Comparison methods: a binary classifier between expert and nominal
//! pairs used directly as `zeta`, and a GAIL-style discriminator whose log
//! score is added to the known reward.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backward::{prepare, ConstraintNet};
use crate::envs::Environment;
use crate::forward::{solve_forward, ForwardConfig, ForwardProblem, PpoTrainer, Unconstrained};
use crate::nn::{Adam, SIGMOID_CEIL, SIGMOID_FLOOR};
use crate::{Error, Result};

/// Same shape and feature selection as a constraint net.
pub type DiscriminatorNet = ConstraintNet;

/// `r + ln zeta`, with `zeta` clamped to the sigmoid output range.
pub fn gc_reward(reward: f64, score: f64) -> f64 {
    reward + score.clamp(SIGMOID_FLOOR, SIGMOID_CEIL).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Pairs per class per step; `None` takes one full-batch step per epoch.
    pub minibatch_size: Option<usize>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 0.01,
            minibatch_size: Some(256),
        }
    }
}

/// A discriminator and its optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub net: DiscriminatorNet,
    opt: Adam,
}

impl Classifier {
    pub fn new(net: DiscriminatorNet, learning_rate: f64) -> Result<Self> {
        Ok(Self {
            opt: Adam::new(net.net.num_params(), learning_rate)?,
            net,
        })
    }
}

/// Class-balanced cross-entropy: expert pairs labelled 1, nominal 0, each
/// class averaged separately.
pub fn bce_loss(net: &DiscriminatorNet, expert: &[Vec<f64>], nominal: &[Vec<f64>]) -> Result<f64> {
    check_classes(expert, nominal)?;
    let mut e = 0.0;
    for x in expert {
        e -= net.score_input(x)?.ln();
    }
    let mut n = 0.0;
    for x in nominal {
        n -= (1.0 - net.score_input(x)?).ln();
    }
    Ok(e / expert.len() as f64 + n / nominal.len() as f64)
}

fn check_classes(expert: &[Vec<f64>], nominal: &[Vec<f64>]) -> Result<()> {
    if expert.is_empty() || nominal.is_empty() {
        return Err(Error::Degenerate(format!(
            "classifier needs both classes (expert {}, nominal {})",
            expert.len(),
            nominal.len()
        )));
    }
    Ok(())
}

fn add_loss_grad(net: &DiscriminatorNet, pairs: &[&Vec<f64>], label: bool, grad: &mut [f64]) -> Result<()> {
    let scale = 1.0 / pairs.len() as f64;
    for x in pairs {
        let cache = net.net.forward_cached(x)?;
        let z = cache.output()[0];
        let dz = if label { -scale / z } else { scale / (1.0 - z) };
        net.net.backward_cached(&cache, &[dz], grad)?;
    }
    Ok(())
}

/// One pass over both classes. Both are cut into the same number of chunks
/// so every step sees the two classes in proportion.
fn classifier_epoch<R: Rng + ?Sized>(
    clf: &mut Classifier,
    expert: &[Vec<f64>],
    nominal: &[Vec<f64>],
    minibatch_size: Option<usize>,
    rng: &mut R,
) -> Result<()> {
    let mut e: Vec<&Vec<f64>> = expert.iter().collect();
    let mut n: Vec<&Vec<f64>> = nominal.iter().collect();
    let k = match minibatch_size {
        None => 1,
        Some(size) => {
            e.shuffle(rng);
            n.shuffle(rng);
            e.len().max(n.len()).div_ceil(size.max(1))
        }
    };
    let n_params = clf.net.net.num_params();
    for i in 0..k {
        let ec = &e[e.len() * i / k..e.len() * (i + 1) / k];
        let nc = &n[n.len() * i / k..n.len() * (i + 1) / k];
        if ec.is_empty() || nc.is_empty() {
            continue;
        }
        let mut grad = vec![0.0; n_params];
        add_loss_grad(&clf.net, ec, true, &mut grad)?;
        add_loss_grad(&clf.net, nc, false, &mut grad)?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("classifier gradient"));
        }
        clf.opt.step(clf.net.net.params_mut(), &grad)?;
    }
    Ok(())
}

/// Fits the classifier on prepared pair inputs. Returns the loss after
/// each epoch.
pub fn bc_train<R: Rng + ?Sized>(
    clf: &mut Classifier,
    expert: &[Vec<f64>],
    nominal: &[Vec<f64>],
    cfg: &ClassifierConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_classes(expert, nominal)?;
    let mut losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        classifier_epoch(clf, expert, nominal, cfg.minibatch_size, rng)?;
        losses.push(bce_loss(&clf.net, expert, nominal)?);
    }
    Ok(losses)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GcConfig {
    pub discriminator_lr: f64,
    pub minibatch_size: Option<usize>,
}

impl Default for GcConfig {
    fn default() -> Self {
        Self {
            discriminator_lr: 3e-3,
            minibatch_size: Some(256),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GcReport {
    pub rounds: usize,
    pub timesteps: usize,
    /// Discriminator loss after each round, on that round's pairs.
    pub losses: Vec<f64>,
}

/// `rounds` rounds of: one PPO iteration on `r + ln D` (no cost), then one
/// discriminator epoch on expert pairs against the pairs just collected.
#[allow(clippy::too_many_arguments)]
pub fn gc_train<R: Rng + ?Sized>(
    env: &dyn Environment,
    expert: &[Vec<f64>],
    clf: &mut Classifier,
    trainer: &mut PpoTrainer,
    forward: &ForwardConfig,
    cfg: &GcConfig,
    rounds: usize,
    rng: &mut R,
) -> Result<GcReport> {
    clf.net.check_env(env)?;
    let one = ForwardConfig {
        iterations: 1,
        ..forward.clone()
    };
    let mut report = GcReport::default();
    for _ in 0..rounds {
        let fwd = solve_forward(
            ForwardProblem {
                env,
                cost: &Unconstrained,
                reward_bonus: Some(&clf.net),
            },
            trainer,
            &one,
            rng,
        )?;
        report.timesteps += fwd.timesteps;
        let mut policy_pairs = Vec::new();
        for traj in fwd.last_batch.iter().flat_map(|b| &b.trajectories) {
            policy_pairs.extend(prepare(&clf.net, env, traj)?);
        }
        classifier_epoch(clf, expert, &policy_pairs, cfg.minibatch_size, rng)?;
        report.losses.push(bce_loss(&clf.net, expert, &policy_pairs)?);
        report.rounds += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backward::FeatureMap;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn classifier(seed: u64, dim: usize) -> Classifier {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = ConstraintNet::new(FeatureMap::all(dim), dim, &[8], None, &mut rng).unwrap();
        Classifier::new(net, 0.05).unwrap()
    }

    #[test]
    fn gc_reward_values() {
        assert!((gc_reward(3.0, 0.5) - 2.306_852_819_440_054_7).abs() < 1e-12);
        assert!((gc_reward(0.0, 0.0) - 1e-6f64.ln()).abs() < 1e-12);
        assert!((gc_reward(2.0, 1.0) - 2.0).abs() < 1e-5);
    }

    #[test]
    fn separable_classes() {
        let mut clf = classifier(0, 1);
        let e = vec![vec![1.0]; 20];
        let n = vec![vec![-1.0]; 30];
        let cfg = ClassifierConfig {
            epochs: 300,
            ..ClassifierConfig::default()
        };
        let losses = bc_train(&mut clf, &e, &n, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(losses.last().unwrap() < &losses[0]);
        assert!(clf.net.score_input(&[1.0]).unwrap() > 0.9);
        assert!(clf.net.score_input(&[-1.0]).unwrap() < 0.1);
    }

    #[test]
    fn identical_classes_give_half() {
        let mut clf = classifier(1, 2);
        let data: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0, 1.0 - i as f64 / 5.0]).collect();
        let cfg = ClassifierConfig {
            epochs: 400,
            minibatch_size: None,
            ..ClassifierConfig::default()
        };
        bc_train(&mut clf, &data, &data, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for x in &data {
            assert!((clf.net.score_input(x).unwrap() - 0.5).abs() < 0.02);
        }
    }

    #[test]
    fn zero_epochs_and_single_class() {
        let mut clf = classifier(2, 1);
        let before = clf.clone();
        let cfg = ClassifierConfig {
            epochs: 0,
            ..ClassifierConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        bc_train(&mut clf, &[vec![1.0]], &[vec![0.0]], &cfg, &mut rng).unwrap();
        assert_eq!(clf, before);
        assert!(matches!(
            bc_train(&mut clf, &[vec![1.0]], &[], &cfg, &mut rng),
            Err(Error::Degenerate(_))
        ));
    }
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{pair_features, Action, Environment};
use crate::forward::PairScore;
use crate::nn::{Activation, Mlp};
use crate::{Error, Result};

/// Which part of `observation ++ encoded action` a constraint net sees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureMap {
    /// The listed pair-feature dimensions, in order.
    Select { indices: Vec<usize> },
    /// A one-hot code of the pair index `s * n_actions + a`, for envs whose
    /// observation is a one-hot state. Gives a tabular parameterization.
    PairOneHot { n_states: usize, n_actions: usize },
}

impl FeatureMap {
    pub fn all(pair_dim: usize) -> Self {
        FeatureMap::Select {
            indices: (0..pair_dim).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            FeatureMap::Select { indices } => indices.len(),
            FeatureMap::PairOneHot { n_states, n_actions } => n_states * n_actions,
        }
    }

    /// Pair-feature dimensions this map reads.
    fn required(&self) -> Vec<usize> {
        match self {
            FeatureMap::Select { indices } => indices.clone(),
            FeatureMap::PairOneHot { n_states, n_actions } => (0..n_states + n_actions).collect(),
        }
    }

    pub fn apply(&self, raw: &[f64]) -> Result<Vec<f64>> {
        let missing: Vec<usize> = self.required().into_iter().filter(|&i| i >= raw.len()).collect();
        if !missing.is_empty() {
            return Err(Error::FeatureMismatch {
                missing,
                available: raw.len(),
            });
        }
        Ok(match self {
            FeatureMap::Select { indices } => indices.iter().map(|&i| raw[i]).collect(),
            FeatureMap::PairOneHot { n_states, n_actions } => {
                let s = argmax(&raw[..*n_states]);
                let a = argmax(&raw[*n_states..n_states + n_actions]);
                let mut v = vec![0.0; n_states * n_actions];
                v[s * n_actions + a] = 1.0;
                v
            }
        })
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// The learned feasibility score `zeta(s, a)`: a sigmoid-output network over
/// a fixed subset of pair features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintNet {
    pub net: Mlp,
    pub features: FeatureMap,
    /// Length of the raw pair-feature vector of the env it was built for.
    pub pair_dim: usize,
}

impl ConstraintNet {
    /// Random network with tanh hidden layers. `init_score`, if given, sets
    /// the output bias so an all-zero input scores that value.
    pub fn new<R: Rng + ?Sized>(
        features: FeatureMap,
        pair_dim: usize,
        hidden: &[usize],
        init_score: Option<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        let mut dims = vec![features.input_dim()];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let mut net = Mlp::new(&dims, Activation::Tanh, Activation::Sigmoid, 1.0, rng)?;
        if let Some(p) = init_score {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!("initial score must lie in (0, 1), got {p}")));
            }
            let at = net.output_bias_offset();
            net.params_mut()[at] = (p / (1.0 - p)).ln();
        }
        let cn = Self {
            net,
            features,
            pair_dim,
        };
        cn.features.apply(&vec![0.0; pair_dim])?;
        Ok(cn)
    }

    /// Wraps an existing sigmoid-output network.
    pub fn from_net(net: Mlp, features: FeatureMap, pair_dim: usize) -> Result<Self> {
        if net.output_activation() != Activation::Sigmoid || net.output_dim() != 1 {
            return Err(Error::Config("constraint nets need one sigmoid output".into()));
        }
        if net.input_dim() != features.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "constraint net input",
                expected: features.input_dim(),
                actual: net.input_dim(),
            });
        }
        Ok(Self {
            net,
            features,
            pair_dim,
        })
    }

    /// Checks that `env` supplies every feature this net reads.
    pub fn check_env(&self, env: &dyn Environment) -> Result<()> {
        let available = env.spec().pair_dim();
        let missing: Vec<usize> = self
            .features
            .required()
            .into_iter()
            .filter(|&i| i >= available)
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::FeatureMismatch { missing, available })
        }
    }

    /// Network input for a raw pair-feature vector.
    pub fn input(&self, raw: &[f64]) -> Result<Vec<f64>> {
        self.features.apply(raw)
    }

    /// `zeta` of a prepared network input, clamped into `(0, 1)`.
    pub fn score_input(&self, input: &[f64]) -> Result<f64> {
        Ok(self.net.forward(input)?[0])
    }

    pub fn score_pair(&self, env: &dyn Environment, state: &[f64], action: &Action) -> Result<f64> {
        self.score_input(&self.input(&pair_features(env, state, action))?)
    }

    /// Adds `weight(zeta) * d ln zeta / d theta` at `input` into `grad`;
    /// returns `zeta`.
    pub fn accumulate_log_grad(&self, input: &[f64], weight: impl FnOnce(f64) -> f64, grad: &mut [f64]) -> Result<f64> {
        let cache = self.net.forward_cached(input)?;
        let z = cache.output()[0];
        self.net.backward_cached(&cache, &[weight(z) / z], grad)?;
        Ok(z)
    }
}

impl PairScore for ConstraintNet {
    /// NaN if the pair does not fit the net, which the forward step then
    /// rejects as non-finite.
    fn score(&self, env: &dyn Environment, state: &[f64], action: &Action) -> f64 {
        self.score_pair(env, state, action).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::make_env;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pair_one_hot_indexes_pairs() {
        let map = FeatureMap::PairOneHot {
            n_states: 3,
            n_actions: 2,
        };
        let v = map.apply(&[0.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(v, vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn select_reports_missing_dimensions() {
        let map = FeatureMap::Select { indices: vec![0, 5, 7] };
        match map.apply(&[1.0; 6]) {
            Err(Error::FeatureMismatch { missing, available }) => {
                assert_eq!((missing, available), (vec![7], 6));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn init_score_sets_output() {
        let env = make_env("point-mass").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cn = ConstraintNet::new(FeatureMap::Select { indices: vec![0, 1] }, 4, &[], Some(0.9), &mut rng).unwrap();
        let z = cn
            .score_pair(env.as_ref(), &[0.0, 0.0], &Action::Continuous(vec![0.0, 0.0]))
            .unwrap();
        assert!((z - 0.9).abs() < 1e-12);
        assert!(cn.check_env(make_env("point-mass-broken").unwrap().as_ref()).is_ok());
        let wide = ConstraintNet::new(FeatureMap::Select { indices: vec![6] }, 8, &[], None, &mut rng).unwrap();
        assert!(matches!(
            wide.check_env(env.as_ref()),
            Err(Error::FeatureMismatch { .. })
        ));
    }
}

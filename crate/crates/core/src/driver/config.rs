use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backward::{BackwardConfig, FeatureMap};
use crate::baselines::{ClassifierConfig, GcConfig};
use crate::envs::make_env;
use crate::forward::ForwardConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Icrl,
    Bc,
    Gc,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "icrl" => Ok(Method::Icrl),
            "bc" => Ok(Method::Bc),
            "gc" => Ok(Method::Gc),
            other => Err(Error::Config(format!(
                "unknown method `{other}` (expected icrl, bc or gc)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Icrl => "icrl",
            Method::Bc => "bc",
            Method::Gc => "gc",
        })
    }
}

/// How the learned constraint (or discriminator) net is built.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstraintSettings {
    /// Pair features the net reads; `None` reads all of them.
    pub features: Option<FeatureMap>,
    /// Score of an all-zero input at initialization.
    pub init_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpertConfig {
    pub rollouts: usize,
    pub forward: ForwardConfig,
    /// Fresh policies trained before giving up.
    pub max_attempts: usize,
    /// Mean constrained-mode return the recorded rollouts must reach.
    pub min_return: Option<f64>,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            rollouts: 10,
            forward: ForwardConfig {
                iterations: 30,
                ..ForwardConfig::default()
            },
            max_attempts: 3,
            min_return: None,
        }
    }
}

/// Where a transfer run takes its frozen constraint from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub source: PathBuf,
}

/// Everything that determines a run. A copy is stored in every run
/// directory, and re-running from it reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub env: String,
    pub method: Method,
    pub seed: u64,
    /// Outer iterations `N`. For the baselines, the number of evaluation
    /// rounds of `forward.iterations` PPO iterations each.
    pub iterations: usize,
    /// Forward solve of each outer iteration, warm-started.
    pub forward: ForwardConfig,
    pub backward: BackwardConfig,
    pub constraint: ConstraintSettings,
    pub expert: ExpertConfig,
    /// Nominal trajectories sampled per outer iteration (`M`), and the size
    /// of the frozen nominal dataset of the classifier baseline.
    pub nominal_episodes: usize,
    pub eval_episodes: usize,
    /// Sample actions during evaluation instead of taking the mode.
    pub eval_stochastic: bool,
    pub classifier: ClassifierConfig,
    pub gc: GcConfig,
    pub transfer: Option<TransferConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: "lap-gridworld".into(),
            method: Method::Icrl,
            seed: 0,
            iterations: 10,
            forward: ForwardConfig {
                iterations: 5,
                ..ForwardConfig::default()
            },
            backward: BackwardConfig::default(),
            constraint: ConstraintSettings::default(),
            expert: ExpertConfig::default(),
            nominal_episodes: 10,
            eval_episodes: 1,
            eval_stochastic: false,
            classifier: ClassifierConfig::default(),
            gc: GcConfig::default(),
            transfer: None,
        }
    }
}

impl RunConfig {
    /// Defaults tuned for one environment.
    pub fn for_env(env: &str) -> Result<Self> {
        make_env(env)?;
        let mut cfg = RunConfig {
            env: env.into(),
            ..RunConfig::default()
        };
        match env {
            "lap-gridworld" => {
                cfg.iterations = 12;
                cfg.expert.rollouts = 1;
                cfg.expert.min_return = Some(120.0);
            }
            "bridges-gridworld" => {
                for f in [&mut cfg.forward, &mut cfg.expert.forward] {
                    f.policy_lr = 1e-3;
                    f.value_lr = 1e-3;
                    f.entropy_coeff = 0.05;
                }
                cfg.expert.forward.iterations = 40;
                cfg.expert.max_attempts = 5;
                cfg.expert.min_return = Some(-20.0);
                cfg.iterations = 10;
                cfg.nominal_episodes = 20;
                cfg.constraint.features = Some(FeatureMap::PairOneHot {
                    n_states: crate::envs::BRIDGES_SIZE * crate::envs::BRIDGES_SIZE,
                    n_actions: 4,
                });
            }
            "point-mass" | "point-mass-broken" | "point-circle" | "point-circle-literal" => {
                for f in [&mut cfg.forward, &mut cfg.expert.forward] {
                    f.policy_lr = 1e-3;
                    f.value_lr = 1e-3;
                }
                cfg.forward.entropy_coeff = 0.01;
                cfg.expert.forward.iterations = 40;
                cfg.backward.minibatch_size = None;
                cfg.constraint.features = Some(FeatureMap::Select { indices: vec![0, 1] });
                cfg.nominal_episodes = 40;
                if env.starts_with("point-circle") {
                    cfg.nominal_episodes = 14;
                }
            }
            _ => {
                for f in [&mut cfg.forward, &mut cfg.expert.forward] {
                    f.hidden = vec![16];
                    f.policy_lr = 1e-2;
                    f.value_lr = 1e-2;
                    f.rollout_steps = 64;
                }
                cfg.nominal_episodes = 20;
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        make_env(&self.env).map_err(|_| Error::Config(format!("unknown environment `{}`", self.env)))?;
        self.backward.validate()?;
        if self.forward.rollout_steps == 0 || self.expert.forward.rollout_steps == 0 {
            return Err(Error::Config("rollout_steps must be positive".into()));
        }
        if self.nominal_episodes == 0 {
            return Err(Error::Config("nominal_episodes must be positive".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be positive".into()));
        }
        if self.expert.rollouts == 0 || self.expert.max_attempts == 0 {
            return Err(Error::Config("expert rollouts and attempts must be positive".into()));
        }
        if let Some(p) = self.constraint.init_score {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!("init_score must lie in (0, 1), got {p}")));
            }
        }
        Ok(())
    }

    /// Applies a partial JSON config on top of the defaults of the env it
    /// names (`env_hint` if it names none).
    pub fn from_overlay(overlay: serde_json::Value, env_hint: &str) -> Result<Self> {
        let env = overlay
            .get("env")
            .and_then(|v| v.as_str())
            .unwrap_or(env_hint)
            .to_string();
        let mut base = serde_json::to_value(Self::for_env(&env)?)?;
        merge_json(&mut base, overlay);
        serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json_file(path: &Path, env_hint: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_overlay(value, env_hint)
    }

    /// First 16 hex digits of the SHA-256 of the JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }

    /// Directory-name tag of the ablation switches, e.g. `is-off_es-on_b10`.
    pub fn ablation_tag(&self) -> String {
        let onoff = |b: bool| if b { "on" } else { "off" };
        format!(
            "is-{}_es-{}_b{}",
            onoff(self.backward.use_importance_sampling),
            onoff(self.backward.use_early_stopping),
            self.backward.iterations
        )
    }
}

/// Recursively overwrites `base` with the fields present in `patch`.
fn merge_json(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                merge_json(b.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

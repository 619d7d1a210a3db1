//! Environments with a nominal mode (the simulator, reward only) and a
//! constrained mode (the "real world", where a true constraint violation
//! ends the episode).
//!
//! All environments here are deterministic. An [`Environment`] is a pure
//! transition function over explicit state vectors; [`Episode`] adds the
//! horizon and the mode-dependent termination rule.

mod bridges;
mod dataset;
mod lap;
mod point;
mod toy;

pub use bridges::{BridgesGridWorld, SIZE as BRIDGES_SIZE};
pub use dataset::{read_dataset, write_dataset, DatasetHeader, DATASET_VERSION};
pub use lap::LapGridWorld;
pub use point::{point_circle_reward, CirculationForm, PointCircle, PointMass};
pub use toy::{Bandit, TwoPathWorld};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::forward::TabularMDP;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Action {
    pub fn as_discrete(&self) -> Option<usize> {
        match self {
            Action::Discrete(a) => Some(*a),
            Action::Continuous(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ActionSpace {
    Discrete { n: usize },
    Box { low: Vec<f64>, high: Vec<f64> },
}

impl ActionSpace {
    /// Length of the vector produced by [`ActionSpace::encode`].
    pub fn encoded_dim(&self) -> usize {
        match self {
            ActionSpace::Discrete { n } => *n,
            ActionSpace::Box { low, .. } => low.len(),
        }
    }

    pub fn validate(&self, action: &Action) -> Result<()> {
        match (self, action) {
            (ActionSpace::Discrete { n }, Action::Discrete(a)) if a < n => Ok(()),
            (ActionSpace::Discrete { n }, Action::Discrete(a)) => {
                Err(Error::InvalidAction(format!("index {a} out of range for {n} actions")))
            }
            (ActionSpace::Box { low, .. }, Action::Continuous(v)) => {
                if v.len() != low.len() {
                    Err(Error::InvalidAction(format!(
                        "expected {} action components, got {}",
                        low.len(),
                        v.len()
                    )))
                } else if v.iter().any(|x| !x.is_finite()) {
                    Err(Error::InvalidAction("non-finite action component".into()))
                } else {
                    Ok(())
                }
            }
            _ => Err(Error::InvalidAction(format!(
                "action {action:?} does not belong to {self:?}"
            ))),
        }
    }

    /// Clips a continuous action into the box; discrete actions pass through.
    pub fn clip(&self, action: &Action) -> Action {
        match (self, action) {
            (ActionSpace::Box { low, high }, Action::Continuous(v)) => Action::Continuous(
                v.iter()
                    .zip(low.iter().zip(high))
                    .map(|(x, (lo, hi))| x.clamp(*lo, *hi))
                    .collect(),
            ),
            _ => action.clone(),
        }
    }

    /// Network encoding: one-hot for discrete actions, the clipped vector
    /// for continuous ones.
    pub fn encode(&self, action: &Action) -> Vec<f64> {
        match (self, action) {
            (ActionSpace::Discrete { n }, Action::Discrete(a)) => {
                let mut v = vec![0.0; *n];
                if *a < *n {
                    v[*a] = 1.0;
                }
                v
            }
            (ActionSpace::Box { .. }, Action::Continuous(_)) => match self.clip(action) {
                Action::Continuous(v) => v,
                Action::Discrete(_) => unreachable!(),
            },
            _ => vec![0.0; self.encoded_dim()],
        }
    }
}

/// Static description of an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    /// Length of the observation vector fed to networks.
    pub state_dim: usize,
    pub action_space: ActionSpace,
    pub horizon: usize,
    pub gamma: f64,
}

impl EnvSpec {
    /// Length of `observation ++ encoded action`.
    pub fn pair_dim(&self) -> usize {
        self.state_dim + self.action_space.encoded_dim()
    }
}

/// Result of the raw transition function, before horizon and mode rules.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
}

pub trait Environment: Send + Sync + fmt::Debug {
    fn spec(&self) -> &EnvSpec;

    /// Initial state. Every environment here has a fixed start; the seed is
    /// accepted so stochastic starts remain possible.
    fn reset(&self, seed: u64) -> Vec<f64>;

    fn step(&self, state: &[f64], action: &Action) -> Result<StepOutcome>;

    /// Ground-truth constraint. Only evaluation and expert generation may
    /// call this.
    fn true_violation(&self, state: &[f64], action: &Action) -> bool;

    /// Observation vector for networks.
    fn observe(&self, state: &[f64]) -> Vec<f64> {
        state.to_vec()
    }

    fn to_tabular(&self) -> Result<TabularMDP> {
        Err(Error::NotTabular(self.spec().name.clone()))
    }
}

/// `observe(state) ++ encode(action)`: the input space of constraint nets.
pub fn pair_features(env: &dyn Environment, state: &[f64], action: &Action) -> Vec<f64> {
    let mut v = env.observe(state);
    v.extend(env.spec().action_space.encode(action));
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// The simulator: no constraint knowledge, episodes run to the horizon.
    Nominal,
    /// True constraints enforced: the first violating step ends the episode
    /// and earns no reward.
    Constrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Action,
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    transitions: Vec<Transition>,
}

impl Trajectory {
    /// Validates non-emptiness, finiteness and state chaining.
    pub fn new(transitions: Vec<Transition>) -> Result<Self> {
        if transitions.is_empty() {
            return Err(Error::MalformedTrajectory("empty trajectory".into()));
        }
        for (t, tr) in transitions.iter().enumerate() {
            if !tr.reward.is_finite() {
                return Err(Error::MalformedTrajectory(format!("non-finite reward at step {t}")));
            }
        }
        for (t, w) in transitions.windows(2).enumerate() {
            if w[0].next_state != w[1].state {
                return Err(Error::MalformedTrajectory(format!(
                    "next_state of step {t} does not match state of step {}",
                    t + 1
                )));
            }
            if w[0].done {
                return Err(Error::MalformedTrajectory(format!(
                    "step {t} is marked done but the trajectory continues"
                )));
            }
        }
        Ok(Self { transitions })
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }

    pub fn discounted_reward(&self, gamma: f64) -> f64 {
        self.transitions.iter().rev().fold(0.0, |acc, t| t.reward + gamma * acc)
    }

    pub fn count_violations(&self, env: &dyn Environment) -> usize {
        self.transitions
            .iter()
            .filter(|t| env.true_violation(&t.state, &t.action))
            .count()
    }

    /// Reorders steps; used only to check per-step quantities that must not
    /// depend on the rest of the trajectory. The result need not chain.
    pub fn permuted_unchecked(&self, order: &[usize]) -> Self {
        Self {
            transitions: order.iter().map(|&i| self.transitions[i].clone()).collect(),
        }
    }
}

/// A running episode: adds the horizon and the mode rules to an
/// [`Environment`].
#[derive(Debug)]
pub struct Episode<'a> {
    env: &'a dyn Environment,
    mode: Mode,
    state: Vec<f64>,
    t: usize,
    done: bool,
}

impl<'a> Episode<'a> {
    pub fn new(env: &'a dyn Environment, mode: Mode, seed: u64) -> Self {
        Self {
            env,
            mode,
            state: env.reset(seed),
            t: 0,
            done: false,
        }
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn step(&mut self, action: &Action) -> Result<Transition> {
        if self.done {
            return Err(Error::InvalidAction("episode already finished".into()));
        }
        let transition = step_in_mode(self.env, &self.state, action, self.mode, self.t)?;
        self.t += 1;
        self.done = transition.done;
        self.state = transition.next_state.clone();
        Ok(transition)
    }
}

/// One step with horizon and mode rules applied; `t` is the zero-based
/// index of this step within its episode.
pub fn step_in_mode(env: &dyn Environment, state: &[f64], action: &Action, mode: Mode, t: usize) -> Result<Transition> {
    env.spec().action_space.validate(action)?;
    let outcome = env.step(state, action)?;
    let violated = mode == Mode::Constrained && env.true_violation(state, action);
    let reward = if violated { 0.0 } else { outcome.reward };
    let done = violated || outcome.terminal || t + 1 >= env.spec().horizon;
    Ok(Transition {
        state: state.to_vec(),
        action: action.clone(),
        next_state: outcome.next_state,
        reward,
        done,
    })
}

/// Runs one episode with the supplied action rule.
pub fn run_episode<F>(env: &dyn Environment, mode: Mode, seed: u64, mut policy: F) -> Result<Trajectory>
where
    F: FnMut(&[f64]) -> Result<Action>,
{
    let mut episode = Episode::new(env, mode, seed);
    let mut transitions = Vec::with_capacity(env.spec().horizon);
    while !episode.is_done() {
        let action = policy(episode.state())?;
        transitions.push(episode.step(&action)?);
    }
    Trajectory::new(transitions)
}

pub const ENV_NAMES: &[&str] = &[
    "lap-gridworld",
    "bridges-gridworld",
    "point-mass",
    "point-mass-broken",
    "point-circle",
    "point-circle-literal",
    "two-path",
    "bandit",
];

/// Looks an environment up by its registry name.
pub fn make_env(name: &str) -> Result<Box<dyn Environment>> {
    Ok(match name {
        "lap-gridworld" => Box::new(LapGridWorld::new()),
        "bridges-gridworld" => Box::new(BridgesGridWorld::new()),
        "point-mass" => Box::new(PointMass::new()),
        "point-mass-broken" => Box::new(PointMass::broken()),
        "point-circle" => Box::new(PointCircle::new(CirculationForm::CrossProduct)),
        "point-circle-literal" => Box::new(PointCircle::new(CirculationForm::Literal)),
        "two-path" => Box::new(TwoPathWorld::new()),
        "bandit" => Box::new(Bandit::new()),
        other => return Err(Error::UnknownEnv(other.to_string())),
    })
}

pub(crate) fn one_hot(index: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[index] = 1.0;
    v
}

/// Reads a non-negative integer state component.
pub(crate) fn index_state(state: &[f64], i: usize, n: usize) -> Result<usize> {
    let v = *state
        .get(i)
        .ok_or_else(|| Error::InvalidAction(format!("state {state:?} too short")))?;
    if v < 0.0 || v.fract() != 0.0 || v as usize >= n {
        return Err(Error::InvalidAction(format!(
            "state component {v} is not a cell index below {n}"
        )));
    }
    Ok(v as usize)
}

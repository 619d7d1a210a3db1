//! Tiny environments used for exact checks.

use super::{index_state, one_hot, Action, ActionSpace, EnvSpec, Environment, StepOutcome};
use crate::forward::TabularMDP;
use crate::Result;

const LANE_LEN: usize = 3;
const START: usize = 0;
const GOAL: usize = 1 + 2 * LANE_LEN;
const N_STATES: usize = GOAL + 1;

/// Two equal-reward lanes from a start state to a goal.
///
/// State 0 is the start; action 0 enters the upper lane (states 1..=3),
/// action 1 the lower lane (states 4..=6). Inside a lane both actions
/// advance. Leaving the last lane cell reaches the goal (state 7), pays 1
/// and ends the episode. The lower lane is the true constraint.
#[derive(Debug, Clone)]
pub struct TwoPathWorld {
    spec: EnvSpec,
}

impl Default for TwoPathWorld {
    fn default() -> Self {
        Self::new()
    }
}

impl TwoPathWorld {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "two-path".into(),
                state_dim: N_STATES,
                action_space: ActionSpace::Discrete { n: 2 },
                horizon: LANE_LEN + 1,
                gamma: 1.0,
            },
        }
    }

    pub fn is_lower_lane(state: usize) -> bool {
        (1 + LANE_LEN..GOAL).contains(&state)
    }

    pub fn is_upper_lane(state: usize) -> bool {
        (1..=LANE_LEN).contains(&state)
    }

    fn transition(state: usize, action: usize) -> (usize, f64, bool) {
        match state {
            START => (1 + action * LANE_LEN, 0.0, false),
            GOAL => (GOAL, 0.0, true),
            s if s == LANE_LEN || s == 2 * LANE_LEN => (GOAL, 1.0, true),
            s => (s + 1, 0.0, false),
        }
    }
}

impl Environment for TwoPathWorld {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, _seed: u64) -> Vec<f64> {
        vec![START as f64]
    }

    fn step(&self, state: &[f64], action: &Action) -> Result<StepOutcome> {
        self.spec.action_space.validate(action)?;
        let s = index_state(state, 0, N_STATES)?;
        let (next, reward, terminal) = Self::transition(s, action.as_discrete().unwrap());
        Ok(StepOutcome {
            next_state: vec![next as f64],
            reward,
            terminal,
        })
    }

    fn true_violation(&self, state: &[f64], _action: &Action) -> bool {
        index_state(state, 0, N_STATES)
            .map(Self::is_lower_lane)
            .unwrap_or(false)
    }

    fn observe(&self, state: &[f64]) -> Vec<f64> {
        one_hot(index_state(state, 0, N_STATES).unwrap_or(0), N_STATES)
    }

    fn to_tabular(&self) -> Result<TabularMDP> {
        let mut next_state = Vec::new();
        let mut reward = Vec::new();
        let mut terminal = Vec::new();
        for s in 0..N_STATES {
            for a in 0..2 {
                let (n, r, t) = Self::transition(s, a);
                next_state.push(n);
                reward.push(r);
                terminal.push(t);
            }
        }
        TabularMDP::new(
            2,
            next_state,
            reward,
            terminal,
            START,
            self.spec.horizon,
            self.spec.gamma,
            (0..N_STATES).map(|s| vec![s as f64]).collect(),
        )
    }
}

/// A single-state, two-armed bandit: arm 0 pays 1, arm 1 pays 0.
#[derive(Debug, Clone)]
pub struct Bandit {
    spec: EnvSpec,
}

impl Default for Bandit {
    fn default() -> Self {
        Self::new()
    }
}

impl Bandit {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "bandit".into(),
                state_dim: 1,
                action_space: ActionSpace::Discrete { n: 2 },
                horizon: 1,
                gamma: 1.0,
            },
        }
    }
}

impl Environment for Bandit {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, _seed: u64) -> Vec<f64> {
        vec![0.0]
    }

    fn step(&self, _state: &[f64], action: &Action) -> Result<StepOutcome> {
        self.spec.action_space.validate(action)?;
        Ok(StepOutcome {
            next_state: vec![0.0],
            reward: if action.as_discrete() == Some(0) { 1.0 } else { 0.0 },
            terminal: true,
        })
    }

    fn true_violation(&self, _state: &[f64], _action: &Action) -> bool {
        false
    }

    fn observe(&self, _state: &[f64]) -> Vec<f64> {
        vec![1.0]
    }

    fn to_tabular(&self) -> Result<TabularMDP> {
        TabularMDP::new(
            2,
            vec![0, 0],
            vec![1.0, 0.0],
            vec![true, true],
            0,
            1,
            1.0,
            vec![vec![0.0]],
        )
    }
}

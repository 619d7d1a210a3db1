//! Continuous point-mass agents moving in the plane.
//!
//! The position is the whole state. An action is a displacement, clipped to
//! the agent's action box, and positions are clamped to `[-BOUND, BOUND]`.
//! The true constraint for every agent here is the half-plane `x <= -3`.

use serde::{Deserialize, Serialize};

use super::{Action, ActionSpace, EnvSpec, Environment, StepOutcome};
use crate::{Error, Result};

pub const BOUND: f64 = 60.0;
/// Positions are divided by this before being fed to networks.
pub const OBS_SCALE: f64 = 10.0;
pub const CONSTRAINT_X: f64 = -3.0;

fn decode(state: &[f64]) -> Result<(f64, f64)> {
    match state {
        [x, y] if x.is_finite() && y.is_finite() => Ok((*x, *y)),
        _ => Err(Error::InvalidAction(format!(
            "point state must be two finite coordinates, got {state:?}"
        ))),
    }
}

fn displace(state: &[f64], space: &ActionSpace, action: &Action) -> Result<(f64, f64, f64, f64)> {
    let (x, y) = decode(state)?;
    let Action::Continuous(d) = space.clip(action) else {
        unreachable!("validated before")
    };
    let nx = (x + d[0]).clamp(-BOUND, BOUND);
    let ny = (y + d[1]).clamp(-BOUND, BOUND);
    Ok((x, y, nx, ny))
}

fn violates(state: &[f64]) -> bool {
    decode(state).map(|(x, _)| x <= CONSTRAINT_X).unwrap_or(false)
}

fn observe_point(state: &[f64]) -> Vec<f64> {
    state.iter().map(|v| v / OBS_SCALE).collect()
}

/// A point mass rewarded for the distance it covers in any direction.
///
/// Moving backwards is easier than moving forwards: the x-displacement may
/// reach -1 but only +0.5, so an unconstrained agent runs into the
/// forbidden region `x <= -3`. The broken variant has its y actuator stuck
/// at zero.
#[derive(Debug, Clone)]
pub struct PointMass {
    spec: EnvSpec,
    broken: bool,
}

impl PointMass {
    pub fn new() -> Self {
        Self::build("point-mass", false)
    }

    pub fn broken() -> Self {
        Self::build("point-mass-broken", true)
    }

    fn build(name: &str, broken: bool) -> Self {
        Self {
            spec: EnvSpec {
                name: name.into(),
                state_dim: 2,
                action_space: ActionSpace::Box {
                    low: vec![-1.0, -0.5],
                    high: vec![0.5, 0.5],
                },
                horizon: 50,
                gamma: 0.99,
            },
            broken,
        }
    }

    pub fn is_broken(&self) -> bool {
        self.broken
    }
}

impl Default for PointMass {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for PointMass {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, _seed: u64) -> Vec<f64> {
        vec![0.0, 0.0]
    }

    fn step(&self, state: &[f64], action: &Action) -> Result<StepOutcome> {
        self.spec.action_space.validate(action)?;
        let action = match (self.broken, action) {
            (true, Action::Continuous(v)) => Action::Continuous(vec![v[0], 0.0]),
            _ => action.clone(),
        };
        let (x, y, nx, ny) = displace(state, &self.spec.action_space, &action)?;
        Ok(StepOutcome {
            next_state: vec![nx, ny],
            reward: (nx - x).hypot(ny - y),
            terminal: false,
        })
    }

    fn true_violation(&self, state: &[f64], _action: &Action) -> bool {
        violates(state)
    }

    fn observe(&self, state: &[f64]) -> Vec<f64> {
        observe_point(state)
    }
}

/// Which numerator the circle reward uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CirculationForm {
    /// `x*dy - y*dx`: positive for counter-clockwise motion.
    CrossProduct,
    /// `y*dx - x*dx`, as printed in the original environment description.
    Literal,
}

/// Reward for circling the origin at radius 10.
pub fn point_circle_reward(x: f64, y: f64, dx: f64, dy: f64, form: CirculationForm) -> f64 {
    let numerator = match form {
        CirculationForm::CrossProduct => x * dy - y * dx,
        CirculationForm::Literal => y * dx - x * dx,
    };
    numerator / (1.0 + (x.hypot(y) - 10.0).abs())
}

/// A point agent rewarded for moving counter-clockwise around a circle of
/// radius 10, with the same `x <= -3` constraint as [`PointMass`].
#[derive(Debug, Clone)]
pub struct PointCircle {
    spec: EnvSpec,
    form: CirculationForm,
}

impl PointCircle {
    pub fn new(form: CirculationForm) -> Self {
        let name = match form {
            CirculationForm::CrossProduct => "point-circle",
            CirculationForm::Literal => "point-circle-literal",
        };
        Self {
            spec: EnvSpec {
                name: name.into(),
                state_dim: 2,
                action_space: ActionSpace::Box {
                    low: vec![-1.0, -1.0],
                    high: vec![1.0, 1.0],
                },
                horizon: 150,
                gamma: 0.99,
            },
            form,
        }
    }
}

impl Environment for PointCircle {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, _seed: u64) -> Vec<f64> {
        vec![0.0, 0.0]
    }

    fn step(&self, state: &[f64], action: &Action) -> Result<StepOutcome> {
        self.spec.action_space.validate(action)?;
        let (x, y, nx, ny) = displace(state, &self.spec.action_space, action)?;
        Ok(StepOutcome {
            next_state: vec![nx, ny],
            reward: point_circle_reward(x, y, nx - x, ny - y, self.form),
            terminal: false,
        })
    }

    fn true_violation(&self, state: &[f64], _action: &Action) -> bool {
        violates(state)
    }

    fn observe(&self, state: &[f64]) -> Vec<f64> {
        observe_point(state)
    }
}

//! Exact maximum-entropy solutions on small deterministic MDPs.
//!
//! In a deterministic MDP a trajectory is fixed by its action sequence, and
//! the maximum-entropy model assigns
//!
//! ```text
//! p(tau) = exp(beta * r(tau)) * w(tau) / Z,   w(tau) = prod_t w(s_t, a_t)
//! ```
//!
//! where `w` is a per-pair feasibility weight (an indicator for hard
//! constraints, or soft scores in `[0, 1]`). [`soft_solve`] recovers this
//! distribution, its partition function and the time-indexed policy that
//! generates it with a backward soft-value recursion.

use rand::Rng;

use crate::envs::Action;
use crate::{Error, Result};

/// An explicit finite MDP with deterministic transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMDP {
    n_states: usize,
    n_actions: usize,
    next_state: Vec<usize>,
    reward: Vec<f64>,
    terminal: Vec<bool>,
    start: usize,
    horizon: usize,
    gamma: f64,
    raw_states: Vec<Vec<f64>>,
}

impl TabularMDP {
    /// Tables are indexed by `s * n_actions + a`. `terminal` marks pairs
    /// whose transition ends the episode. `raw_states[s]` is the
    /// environment's state vector for state `s`, which fixes `n_states`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_actions: usize,
        next_state: Vec<usize>,
        reward: Vec<f64>,
        terminal: Vec<bool>,
        start: usize,
        horizon: usize,
        gamma: f64,
        raw_states: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n_states = raw_states.len();
        let n_pairs = n_states * n_actions;
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Config("tabular mdp needs states and actions".into()));
        }
        for (name, len) in [
            ("next_state", next_state.len()),
            ("reward", reward.len()),
            ("terminal", terminal.len()),
        ] {
            if len != n_pairs {
                return Err(Error::Config(format!(
                    "tabular {name} has {len} entries, expected {n_pairs}"
                )));
            }
        }
        if let Some(bad) = next_state.iter().find(|&&s| s >= n_states) {
            return Err(Error::Config(format!("transition target {bad} is not a state")));
        }
        if start >= n_states {
            return Err(Error::Config(format!("start state {start} is not a state")));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("tabular reward"));
        }
        Ok(Self {
            n_states,
            n_actions,
            next_state,
            reward,
            terminal,
            start,
            horizon,
            gamma,
            raw_states,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn pair(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    pub fn next_state(&self, s: usize, a: usize) -> usize {
        self.next_state[self.pair(s, a)]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[self.pair(s, a)]
    }

    pub fn is_terminal(&self, s: usize, a: usize) -> bool {
        self.terminal[self.pair(s, a)]
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn raw_state(&self, s: usize) -> &[f64] {
        &self.raw_states[s]
    }

    pub fn action(&self, a: usize) -> Action {
        Action::Discrete(a)
    }

    /// Index of a raw environment state.
    pub fn state_index(&self, raw: &[f64]) -> Option<usize> {
        self.raw_states.iter().position(|s| s == raw)
    }

    /// Discounted return `sum_t gamma^t r(s_t, a_t)`.
    pub fn trajectory_return(&self, traj: &TabTrajectory) -> f64 {
        let mut discount = 1.0;
        let mut total = 0.0;
        for (&s, &a) in traj.states.iter().zip(&traj.actions) {
            total += discount * self.reward(s, a);
            discount *= self.gamma;
        }
        total
    }

    /// `sum_t ln w(s_t, a_t)`; `-inf` if any pair has zero weight.
    pub fn trajectory_log_weight(&self, traj: &TabTrajectory, weights: &[f64]) -> f64 {
        traj.states
            .iter()
            .zip(&traj.actions)
            .map(|(&s, &a)| weights[self.pair(s, a)].ln())
            .sum()
    }
}

/// A trajectory of a [`TabularMDP`] as visited states and chosen actions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TabTrajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

/// Every trajectory from the start state, in lexicographic action order.
/// A trajectory ends on a terminal transition or at the horizon. Fails if
/// there are more than `limit`.
pub fn enumerate_trajectories(mdp: &TabularMDP, limit: usize) -> Result<Vec<TabTrajectory>> {
    let mut out = Vec::new();
    let mut states = Vec::with_capacity(mdp.horizon);
    let mut actions = Vec::with_capacity(mdp.horizon);
    enumerate_from(mdp, mdp.start, &mut states, &mut actions, &mut out, limit)?;
    Ok(out)
}

fn enumerate_from(
    mdp: &TabularMDP,
    s: usize,
    states: &mut Vec<usize>,
    actions: &mut Vec<usize>,
    out: &mut Vec<TabTrajectory>,
    limit: usize,
) -> Result<()> {
    for a in 0..mdp.n_actions {
        states.push(s);
        actions.push(a);
        if mdp.is_terminal(s, a) || states.len() == mdp.horizon {
            if out.len() == limit {
                return Err(Error::Config(format!("more than {limit} trajectories to enumerate")));
            }
            out.push(TabTrajectory {
                states: states.clone(),
                actions: actions.clone(),
            });
        } else {
            enumerate_from(mdp, mdp.next_state(s, a), states, actions, out, limit)?;
        }
        states.pop();
        actions.pop();
    }
    Ok(())
}

/// Exact maximum-entropy solution.
#[derive(Debug, Clone)]
pub struct SoftSolution {
    /// `ln Z` for trajectories from the start state.
    pub log_z: f64,
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    /// `pi[t][s][a]`, flattened. Rows of states with no feasible
    /// continuation are all zero.
    policy: Vec<f64>,
}

impl SoftSolution {
    pub fn action_probs(&self, t: usize, s: usize) -> &[f64] {
        let base = (t * self.n_states + s) * self.n_actions;
        &self.policy[base..base + self.n_actions]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn trajectory_prob(&self, traj: &TabTrajectory) -> f64 {
        traj.states
            .iter()
            .zip(&traj.actions)
            .enumerate()
            .map(|(t, (&s, &a))| self.action_probs(t, s)[a])
            .product()
    }

    pub fn sample<R: Rng + ?Sized>(&self, mdp: &TabularMDP, rng: &mut R) -> TabTrajectory {
        let mut traj = TabTrajectory {
            states: Vec::new(),
            actions: Vec::new(),
        };
        let mut s = mdp.start;
        for t in 0..self.horizon {
            let probs = self.action_probs(t, s);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut a = probs.len() - 1;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    a = i;
                    break;
                }
            }
            traj.states.push(s);
            traj.actions.push(a);
            if mdp.is_terminal(s, a) {
                break;
            }
            s = mdp.next_state(s, a);
        }
        traj
    }
}

/// Backward soft-value recursion for the maximum-entropy distribution with
/// per-pair weights `feasibility[s * n_actions + a]` in `[0, 1]`.
pub fn soft_solve(mdp: &TabularMDP, beta: f64, feasibility: &[f64]) -> Result<SoftSolution> {
    if feasibility.len() != mdp.n_pairs() {
        return Err(Error::DimensionMismatch {
            context: "feasibility weights",
            expected: mdp.n_pairs(),
            actual: feasibility.len(),
        });
    }
    if feasibility.iter().any(|w| !(0.0..=1.0).contains(w)) {
        return Err(Error::Config("feasibility weights must lie in [0, 1]".into()));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Config(format!("beta must be finite and >= 0, got {beta}")));
    }
    let (ns, na, horizon) = (mdp.n_states, mdp.n_actions, mdp.horizon);
    let mut policy = vec![0.0; horizon * ns * na];
    let mut v_next = vec![0.0; ns];
    let mut v_cur = vec![f64::NEG_INFINITY; ns];
    let mut q = vec![0.0; na];
    for t in (0..horizon).rev() {
        let discount = mdp.gamma.powi(t as i32);
        for (s, v_s) in v_cur.iter_mut().enumerate() {
            for (a, qa) in q.iter_mut().enumerate() {
                let p = mdp.pair(s, a);
                let w = feasibility[p];
                *qa = if w == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    let cont = if mdp.terminal[p] || t + 1 == horizon {
                        0.0
                    } else {
                        v_next[mdp.next_state[p]]
                    };
                    beta * discount * mdp.reward[p] + w.ln() + cont
                };
            }
            let v = log_sum_exp(&q);
            *v_s = v;
            let base = (t * ns + s) * na;
            if v.is_finite() {
                for (a, qa) in q.iter().enumerate() {
                    policy[base + a] = (qa - v).exp();
                }
            }
        }
        std::mem::swap(&mut v_next, &mut v_cur);
    }
    let log_z = if horizon == 0 { 0.0 } else { v_next[mdp.start] };
    if !log_z.is_finite() {
        return Err(Error::EmptyFeasibleSet);
    }
    Ok(SoftSolution {
        log_z,
        n_states: ns,
        n_actions: na,
        horizon,
        policy,
    })
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Exact `(KL(p || q), KL(q || p))` between two distributions over the same
/// enumerated support. Absolute-continuity failures yield `f64::INFINITY`.
pub fn exact_kl(p: &[f64], q: &[f64]) -> Result<(f64, f64)> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            context: "kl distributions",
            expected: p.len(),
            actual: q.len(),
        });
    }
    Ok((kl(p, q), kl(q, p)))
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            total += pi * (pi / qi).ln();
        }
    }
    total
}

//! Small tabular problems and a tabular constraint parameterization shared
//! by the integration tests.
#![allow(dead_code)]

use icrl::backward::{ConstraintNet, FeatureMap};
use icrl::forward::{enumerate_trajectories, TabTrajectory, TabularMDP};
use icrl::nn::{Activation, Mlp};
use rand::Rng;

/// A `w x h` grid with actions up/down/left/right (moves off the grid stay
/// put), reward -0.1 per step and +1 for entering `goal`, which ends the
/// episode.
pub fn grid(w: usize, h: usize, horizon: usize, goal: (usize, usize)) -> TabularMDP {
    let n = w * h;
    let (mut next, mut reward, mut terminal) = (Vec::new(), Vec::new(), Vec::new());
    for s in 0..n {
        let (x, y) = (s % w, s / w);
        for a in 0..4 {
            let (nx, ny) = match a {
                0 => (x, y.saturating_sub(1)),
                1 => (x, (y + 1).min(h - 1)),
                2 => (x.saturating_sub(1), y),
                _ => ((x + 1).min(w - 1), y),
            };
            let hit = (nx, ny) == goal;
            next.push(ny * w + nx);
            reward.push(if hit { 1.0 } else { -0.1 });
            terminal.push(hit);
        }
    }
    let raw = (0..n).map(|s| vec![(s % w) as f64, (s / w) as f64]).collect();
    TabularMDP::new(4, next, reward, terminal, 0, horizon, 0.9, raw).unwrap()
}

/// Random deterministic MDP with random rewards and a few terminal pairs.
pub fn random_mdp<R: Rng>(rng: &mut R) -> TabularMDP {
    let ns = rng.random_range(2..=4);
    let na = rng.random_range(2..=3);
    let horizon = rng.random_range(2..=5);
    let np = ns * na;
    let next = (0..np).map(|_| rng.random_range(0..ns)).collect();
    let reward = (0..np).map(|_| rng.random_range(-1.0..1.0)).collect();
    let terminal = (0..np).map(|_| rng.random_bool(0.15)).collect();
    let raw = (0..ns).map(|s| vec![s as f64]).collect();
    TabularMDP::new(na, next, reward, terminal, 0, horizon, 0.95, raw).unwrap()
}

/// `zeta(s, a) = sigmoid(w_p + b)` for pair index `p`: a net over one-hot
/// pair vectors with no hidden layer.
pub fn tabular_net(n_pairs: usize, params: Vec<f64>) -> ConstraintNet {
    let net = Mlp::from_params(&[n_pairs, 1], Activation::Tanh, Activation::Sigmoid, params).unwrap();
    ConstraintNet::from_net(net, FeatureMap::all(n_pairs), n_pairs).unwrap()
}

pub fn random_tabular_net<R: Rng>(n_pairs: usize, scale: f64, rng: &mut R) -> ConstraintNet {
    tabular_net(
        n_pairs,
        (0..=n_pairs).map(|_| rng.random_range(-scale..scale)).collect(),
    )
}

pub fn one_hot(i: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// Net inputs (one-hot pair vectors) of every step.
pub fn inputs(mdp: &TabularMDP, traj: &TabTrajectory) -> Vec<Vec<f64>> {
    traj.states
        .iter()
        .zip(&traj.actions)
        .map(|(&s, &a)| one_hot(mdp.pair(s, a), mdp.n_pairs()))
        .collect()
}

/// Per-pair scores of a tabular net.
pub fn pair_scores(net: &ConstraintNet, n_pairs: usize) -> Vec<f64> {
    (0..n_pairs)
        .map(|p| net.score_input(&one_hot(p, n_pairs)).unwrap())
        .collect()
}

pub fn all_trajectories(mdp: &TabularMDP) -> Vec<TabTrajectory> {
    enumerate_trajectories(mdp, 100_000).unwrap()
}

/// Discounted return, recomputed here rather than taken from the crate.
pub fn discounted_return(mdp: &TabularMDP, t: &TabTrajectory) -> f64 {
    t.states
        .iter()
        .zip(&t.actions)
        .enumerate()
        .map(|(i, (&s, &a))| mdp.gamma().powi(i as i32) * mdp.reward(s, a))
        .sum()
}

/// Brute-force maximum-entropy probabilities `exp(beta R) prod w / Z`;
/// trajectories through a zero-weight pair get exactly 0.
pub fn brute_force(mdp: &TabularMDP, trajs: &[TabTrajectory], beta: f64, weights: &[f64]) -> Vec<f64> {
    let un: Vec<f64> = trajs
        .iter()
        .map(|t| {
            let w: f64 = t
                .states
                .iter()
                .zip(&t.actions)
                .map(|(&s, &a)| weights[mdp.pair(s, a)])
                .product();
            (beta * discounted_return(mdp, t)).exp() * w
        })
        .collect();
    let z: f64 = un.iter().sum();
    un.iter().map(|u| u / z).collect()
}

/// Shapes of every network the crate builds: policy and value nets of the
/// default and small configs, and constraint nets over the feature maps in
/// use. Softmax is included for completeness.
pub fn network_shapes() -> Vec<(Vec<usize>, Activation)> {
    vec![
        (vec![4, 64, 64, 4], Activation::Identity),
        (vec![4, 64, 64, 1], Activation::Identity),
        (vec![2, 16, 2], Activation::Identity),
        (vec![6, 20, 1], Activation::Sigmoid),
        (vec![2, 20, 1], Activation::Sigmoid),
        (vec![196, 20, 1], Activation::Sigmoid),
        (vec![3, 8, 5], Activation::Softmax),
    ]
}

/// `||analytic - numeric|| / max(||analytic||, ||numeric||)` for the
/// scalar `g . f(x)` with respect to all parameters.
pub fn relative_error(net: &Mlp, x: &[f64], g: &[f64]) -> f64 {
    let analytic = net.backward(x, g).unwrap();
    let loss = |n: &Mlp| -> f64 { n.forward(x).unwrap().iter().zip(g).map(|(y, g)| y * g).sum() };
    let h = 1e-6;
    let mut probe = net.clone();
    let mut num = vec![0.0; analytic.len()];
    for (i, slot) in num.iter_mut().enumerate() {
        let p = probe.params()[i];
        probe.params_mut()[i] = p + h;
        let up = loss(&probe);
        probe.params_mut()[i] = p - h;
        let down = loss(&probe);
        probe.params_mut()[i] = p;
        *slot = (up - down) / (2.0 * h);
    }
    let diff: f64 = analytic
        .iter()
        .zip(&num)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn = num.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / na.max(nn).max(1e-12)
}

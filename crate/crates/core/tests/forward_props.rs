mod common;

use common::{all_trajectories, brute_force, grid, random_mdp};
use icrl::envs::make_env;
use icrl::forward::{gae, lagrangian_step, soft_solve, TabTrajectory, TabularMDP};
use icrl::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 128,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn lambda_stays_non_negative(
        lambda in 0.0f64..100.0,
        j_c in -10.0f64..10.0,
        alpha in 0.0f64..1.0,
        lr in 0.0f64..10.0,
    ) {
        prop_assert!(lagrangian_step(lambda, j_c, alpha, lr) >= 0.0);
    }

    #[test]
    fn gae_without_lambda_is_td_residuals(
        rv in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..30),
        last in -10.0f64..10.0,
        gamma in 0.0f64..=1.0,
    ) {
        let rewards: Vec<f64> = rv.iter().map(|p| p.0).collect();
        let mut values: Vec<f64> = rv.iter().map(|p| p.1).collect();
        values.push(last);
        let adv = gae(&rewards, &values, gamma, 0.0).unwrap();
        for t in 0..rewards.len() {
            prop_assert_eq!(adv[t], rewards[t] + gamma * values[t + 1] - values[t]);
        }
    }

    #[test]
    fn soft_solve_is_a_distribution(seed in any::<u64>(), beta in 0.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = random_mdp(&mut rng);
        let feas: Vec<f64> = (0..mdp.n_pairs())
            .map(|_| if rng.random_bool(0.25) { 0.0 } else { 1.0 })
            .collect();
        let trajs = all_trajectories(&mdp);
        match soft_solve(&mdp, beta, &feas) {
            Ok(sol) => {
                let probs: Vec<f64> = trajs.iter().map(|t| sol.trajectory_prob(t)).collect();
                prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                for (t, p) in trajs.iter().zip(&probs) {
                    if mdp.trajectory_log_weight(t, &feas) == f64::NEG_INFINITY {
                        prop_assert_eq!(*p, 0.0);
                    }
                }
            }
            Err(Error::EmptyFeasibleSet) => {
                prop_assert!(trajs.iter().all(|t| mdp.trajectory_log_weight(t, &feas) == f64::NEG_INFINITY));
            }
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }
}

/// Draws `n` trajectories from the per-step policy and checks every
/// trajectory frequency against its exact probability. Returns the largest
/// deviation in standard errors.
fn frequency_check(mdp: &TabularMDP, feas: &[f64], n: usize, seed: u64) -> f64 {
    let sol = soft_solve(mdp, 1.0, feas).unwrap();
    let trajs = all_trajectories(mdp);
    assert!(trajs.len() <= 10_000);
    let exact = brute_force(mdp, &trajs, 1.0, feas);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: HashMap<TabTrajectory, usize> = HashMap::new();
    for _ in 0..n {
        *counts.entry(sol.sample(mdp, &mut rng)).or_default() += 1;
    }
    let mut worst: f64 = 0.0;
    for (t, p) in trajs.iter().zip(&exact) {
        let c = counts.remove(t).unwrap_or(0);
        if *p == 0.0 {
            assert_eq!(c, 0, "sampled an infeasible trajectory");
            continue;
        }
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let z = (c as f64 / n as f64 - p).abs() / se;
        worst = worst.max(z);
    }
    assert!(counts.is_empty(), "sampled a trajectory outside the enumeration");
    worst
}

#[test]
fn sampled_frequencies_match_exact_probabilities() {
    let two_path = make_env("two-path").unwrap().to_tabular().unwrap();
    let feas = vec![1.0; two_path.n_pairs()];
    let z = frequency_check(&two_path, &feas, 100_000, 1);
    assert!(z < 3.0, "two-path: {z:.2} standard errors");

    let g = grid(2, 2, 4, (1, 1));
    let mut feas = vec![1.0; g.n_pairs()];
    feas[g.pair(0, 3)] = 0.0;
    let z = frequency_check(&g, &feas, 100_000, 2);
    assert!(z < 3.0, "grid: {z:.2} standard errors");
}

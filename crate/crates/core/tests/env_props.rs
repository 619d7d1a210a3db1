use icrl::envs::{make_env, run_episode, Action, ActionSpace, Environment, Mode, Trajectory, ENV_NAMES};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

/// Maps raw draws in `[0, 1)` to actions of `space`; continuous actions
/// reach 50% past the box on each side so clipping is exercised.
fn action(space: &ActionSpace, u: &[f64]) -> Action {
    match space {
        ActionSpace::Discrete { n } => Action::Discrete(((u[0] * *n as f64) as usize).min(n - 1)),
        ActionSpace::Box { low, high } => Action::Continuous(
            low.iter()
                .zip(high)
                .zip(u)
                .map(|((lo, hi), u)| lo + (hi - lo) * (2.0 * u - 0.5))
                .collect(),
        ),
    }
}

fn scripted(env: &dyn Environment, mode: Mode, draws: &[Vec<f64>]) -> Trajectory {
    let space = env.spec().action_space.clone();
    let mut k = 0;
    run_episode(env, mode, 0, |_| {
        let a = action(&space, &draws[k % draws.len()]);
        k += 1;
        Ok(a)
    })
    .unwrap()
}

fn draws() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 1..40)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn same_actions_same_trajectory(env_i in 0..ENV_NAMES.len(), d in draws(), nominal in any::<bool>()) {
        let env = make_env(ENV_NAMES[env_i]).unwrap();
        let mode = if nominal { Mode::Nominal } else { Mode::Constrained };
        let a = scripted(env.as_ref(), mode, &d);
        let b = scripted(env.as_ref(), mode, &d);
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn constrained_mode_only_violates_on_the_last_step(env_i in 0..ENV_NAMES.len(), d in draws()) {
        let env = make_env(ENV_NAMES[env_i]).unwrap();
        let t = scripted(env.as_ref(), Mode::Constrained, &d);
        let steps = t.transitions();
        for tr in &steps[..steps.len() - 1] {
            prop_assert!(!env.true_violation(&tr.state, &tr.action));
        }
        let last = steps.last().unwrap();
        if env.true_violation(&last.state, &last.action) {
            prop_assert!(last.done);
            prop_assert_eq!(last.reward, 0.0);
        }
    }

    #[test]
    fn rollouts_chain_and_respect_the_horizon(env_i in 0..ENV_NAMES.len(), d in draws(), nominal in any::<bool>()) {
        let env = make_env(ENV_NAMES[env_i]).unwrap();
        let mode = if nominal { Mode::Nominal } else { Mode::Constrained };
        let t = scripted(env.as_ref(), mode, &d);
        prop_assert!(t.len() <= env.spec().horizon);
        prop_assert_eq!(&t.transitions()[0].state, &env.reset(0));
        for w in t.transitions().windows(2) {
            prop_assert_eq!(&w[0].next_state, &w[1].state);
        }
        // Re-validating the steps must succeed.
        prop_assert!(Trajectory::new(t.transitions().to_vec()).is_ok());
    }

    #[test]
    fn point_mass_kinematics(
        broken in any::<bool>(),
        x in -60.0f64..60.0,
        y in -60.0f64..60.0,
        dx in -5.0f64..5.0,
        dy in -5.0f64..5.0,
    ) {
        let env = make_env(if broken { "point-mass-broken" } else { "point-mass" }).unwrap();
        let ActionSpace::Box { low, high } = env.spec().action_space.clone() else { unreachable!() };
        let out = env.step(&[x, y], &Action::Continuous(vec![dx, dy])).unwrap();
        let cdx = dx.clamp(low[0], high[0]);
        let cdy = if broken { 0.0 } else { dy.clamp(low[1], high[1]) };
        prop_assert_eq!(out.next_state[0], (x + cdx).clamp(-60.0, 60.0));
        prop_assert_eq!(out.next_state[1], (y + cdy).clamp(-60.0, 60.0));
        prop_assert!(out.next_state.iter().all(|v| v.abs() <= 60.0));
    }
}

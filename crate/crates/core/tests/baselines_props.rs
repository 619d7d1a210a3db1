use icrl::backward::{ConstraintNet, FeatureMap};
use icrl::baselines::{bc_train, gc_reward, Classifier, ClassifierConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn gc_reward_is_monotone_in_the_score(r in -100.0f64..100.0, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(gc_reward(r, lo) <= gc_reward(r, hi));
        prop_assert!(gc_reward(r, lo).is_finite());
    }

    /// Full-batch fitting with a small step never raises the loss.
    #[test]
    fn full_batch_loss_does_not_increase(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = ConstraintNet::new(FeatureMap::all(2), 2, &[8], None, &mut rng).unwrap();
        let mut clf = Classifier::new(net, 1e-3).unwrap();
        let mut draw = |shift: f64, n: usize| -> Vec<Vec<f64>> {
            (0..n).map(|_| vec![rng.random_range(-1.0..1.0) + shift, rng.random_range(-1.0..1.0)]).collect()
        };
        let expert = draw(0.5, 12);
        let nominal = draw(-0.5, 20);
        let cfg = ClassifierConfig { epochs: 60, learning_rate: 1e-3, minibatch_size: None };
        let losses = bc_train(&mut clf, &expert, &nominal, &cfg, &mut rng).unwrap();
        for w in losses.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "loss rose from {} to {}", w[0], w[1]);
        }
    }
}

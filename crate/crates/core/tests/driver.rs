use std::path::Path;

use icrl::driver::{
    generate_expert, lint_dataset, load_constraint, run_dir, run_method, run_nominal, run_transfer, Method, RunConfig,
    TransferConfig, CONFIG_FILE, CONSTRAINT_FILE, METRICS_FILE, POLICY_FILE,
};
use icrl::envs::{make_env, read_dataset, write_dataset, Trajectory};
use icrl::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn quick(method: Method, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::for_env("two-path").unwrap();
    cfg.method = method;
    cfg.seed = seed;
    cfg.iterations = 2;
    cfg.forward.iterations = 2;
    cfg.expert.forward.iterations = 10;
    cfg.classifier.epochs = 20;
    cfg
}

fn expert(cfg: &RunConfig) -> Vec<Trajectory> {
    let env = make_env(&cfg.env).unwrap();
    generate_expert(env.as_ref(), &cfg.expert, &mut ChaCha8Rng::seed_from_u64(cfg.seed))
        .unwrap()
        .1
}

fn metrics(dir: &Path) -> Vec<u8> {
    std::fs::read(dir.join(METRICS_FILE)).unwrap()
}

#[test]
fn identical_configs_give_identical_metrics() {
    for method in [Method::Icrl, Method::Bc, Method::Gc] {
        let cfg = quick(method, 4);
        let data = expert(&cfg);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ra = run_method(&cfg, &data, a.path()).unwrap();
        let rb = run_method(&cfg, &data, b.path()).unwrap();
        assert_eq!(metrics(&ra.dir), metrics(&rb.dir), "{method}");
        assert_eq!(
            std::fs::read(ra.dir.join(POLICY_FILE)).unwrap(),
            std::fs::read(rb.dir.join(POLICY_FILE)).unwrap()
        );
    }
}

#[test]
fn stored_config_reproduces_the_run() {
    let cfg = quick(Method::Icrl, 7);
    let data = expert(&cfg);
    let a = tempfile::tempdir().unwrap();
    let first = run_method(&cfg, &data, a.path()).unwrap();
    let stored: RunConfig = serde_json::from_slice(&std::fs::read(first.dir.join(CONFIG_FILE)).unwrap()).unwrap();
    assert_eq!(stored, cfg);
    let ckpt: serde_json::Value = serde_json::from_slice(&std::fs::read(first.dir.join(POLICY_FILE)).unwrap()).unwrap();
    assert_eq!(ckpt["config_hash"], stored.hash().as_str());
    let b = tempfile::tempdir().unwrap();
    let second = run_method(&stored, &data, b.path()).unwrap();
    assert_eq!(metrics(&first.dir), metrics(&second.dir));
}

#[test]
fn zero_iterations_record_only_the_initial_policy() {
    let mut cfg = quick(Method::Icrl, 0);
    cfg.iterations = 0;
    let data = expert(&cfg);
    let dir = tempfile::tempdir().unwrap();
    let run = run_method(&cfg, &data, dir.path()).unwrap();
    assert_eq!(run.metrics.len(), 1);
    assert_eq!(run.metrics[0].timesteps, 0);
    assert_eq!(run.dir, run_dir(dir.path(), &cfg));
    for f in [CONFIG_FILE, METRICS_FILE, POLICY_FILE, CONSTRAINT_FILE] {
        assert!(run.dir.join(f).exists(), "{f}");
    }
}

#[test]
fn metrics_are_well_formed() {
    let cfg = quick(Method::Icrl, 1);
    let data = expert(&cfg);
    let dir = tempfile::tempdir().unwrap();
    let run = run_method(&cfg, &data, dir.path()).unwrap();
    for w in run.metrics.windows(2) {
        assert!(w[1].timesteps >= w[0].timesteps);
    }
    for m in &run.metrics {
        assert!((0.0..=1.0).contains(&m.violation_rate));
        assert!(m.lambda >= 0.0);
    }
}

#[test]
fn generated_experts_lint_clean_and_roundtrip() {
    for env_name in ["two-path", "bandit"] {
        let mut cfg = RunConfig::for_env(env_name).unwrap();
        cfg.expert.forward.iterations = 10;
        let env = make_env(env_name).unwrap();
        let data = expert(&cfg);
        assert_eq!(data.len(), cfg.expert.rollouts);
        lint_dataset(env.as_ref(), &data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        write_dataset(&path, env.spec(), &data).unwrap();
        let (header, back) = read_dataset(&path).unwrap();
        assert_eq!(header.env, env_name);
        assert_eq!(back, data);
    }
}

#[test]
fn baseline_checkpoints_are_drop_in() {
    for method in [Method::Bc, Method::Gc] {
        let cfg = quick(method, 2);
        let data = expert(&cfg);
        let dir = tempfile::tempdir().unwrap();
        let run = run_method(&cfg, &data, dir.path()).unwrap();
        let net = load_constraint(&run.dir.join(CONSTRAINT_FILE)).unwrap();
        assert_eq!(Some(&net), run.constraint.as_ref());
        let mut t = quick(method, 3);
        t.transfer = Some(TransferConfig {
            source: run.dir.join(CONSTRAINT_FILE),
        });
        let out = tempfile::tempdir().unwrap();
        let tr = run_transfer(&t, out.path()).unwrap();
        assert_eq!(tr.metrics.len(), t.iterations + 1);
    }
}

#[test]
fn transfer_names_missing_features() {
    let mut src = quick(Method::Icrl, 0);
    src.iterations = 0;
    let data = expert(&src);
    let dir = tempfile::tempdir().unwrap();
    let run = run_method(&src, &data, dir.path()).unwrap();
    let mut t = RunConfig::for_env("bandit").unwrap();
    t.transfer = Some(TransferConfig {
        source: run.dir.join(CONSTRAINT_FILE),
    });
    match run_transfer(&t, tempfile::tempdir().unwrap().path()).unwrap_err() {
        Error::FeatureMismatch { missing, available } => {
            assert!(!missing.is_empty());
            assert!(missing.iter().all(|&i| i >= available));
        }
        other => panic!("expected a feature mismatch, got {other}"),
    }
}

#[test]
fn nominal_run_has_no_constraint() {
    let cfg = quick(Method::Icrl, 0);
    let dir = tempfile::tempdir().unwrap();
    let run = run_nominal(&cfg, dir.path()).unwrap();
    assert!(run.constraint.is_none());
    assert!(!run.dir.join(CONSTRAINT_FILE).exists());
    assert_eq!(run.metrics.len(), cfg.iterations + 1);
}

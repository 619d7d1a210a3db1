use std::fs::{self, File};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{evaluate, Method, MetricsRecord, RunConfig};
use crate::backward::{backward_phase, prepare, ConstraintLearner, ConstraintNet, FeatureMap, PhaseReport};
use crate::baselines::{bc_train, gc_train, Classifier};
use crate::envs::{make_env, run_episode, Environment, Mode, Trajectory};
use crate::forward::{solve_forward, ForwardProblem, PairScore, PolicyBundle, PpoTrainer, Unconstrained};
use crate::nn::{load_checkpoint, save_checkpoint};
use crate::{Error, Result};

pub const CONFIG_FILE: &str = "config.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const POLICY_FILE: &str = "policy.json";
pub const CONSTRAINT_FILE: &str = "constraint.json";
pub const POLICY_KIND: &str = "policy";
pub const CONSTRAINT_KIND: &str = "constraint";

/// What a finished run leaves behind, besides its directory.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub metrics: Vec<MetricsRecord>,
    pub policy: PolicyBundle,
    /// The learned constraint or discriminator, if the method has one.
    pub constraint: Option<ConstraintNet>,
    /// Whether the last forward solve met its cost tolerance.
    pub converged: bool,
}

/// `out_dir/seed_{seed}`.
pub fn run_dir(out_dir: &Path, cfg: &RunConfig) -> PathBuf {
    out_dir.join(format!("seed_{}", cfg.seed))
}

struct Recorder<'a> {
    cfg: &'a RunConfig,
    env: &'a dyn Environment,
    dir: PathBuf,
    writer: csv::Writer<File>,
    metrics: Vec<MetricsRecord>,
    timesteps: usize,
    eval_rng: ChaCha8Rng,
}

impl<'a> Recorder<'a> {
    fn create(cfg: &'a RunConfig, env: &'a dyn Environment, out_dir: &Path) -> Result<Self> {
        let dir = run_dir(out_dir, cfg);
        fs::create_dir_all(&dir)?;
        fs::write(dir.join(CONFIG_FILE), serde_json::to_vec_pretty(cfg)?)?;
        Ok(Self {
            cfg,
            env,
            writer: csv::Writer::from_path(dir.join(METRICS_FILE))?,
            dir,
            metrics: Vec::new(),
            timesteps: 0,
            eval_rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_e7a1),
        })
    }

    /// Evaluates the policy and appends a row; checkpoints are rewritten
    /// so an aborted run keeps its latest artifacts.
    fn record(&mut self, policy: &PolicyBundle, constraint: Option<&ConstraintNet>, phase: &PhaseReport) -> Result<()> {
        let e = evaluate(
            policy,
            self.env,
            self.cfg.eval_episodes,
            self.cfg.eval_stochastic,
            &mut self.eval_rng,
        )?;
        let row = MetricsRecord {
            iteration: self.metrics.len(),
            timesteps: self.timesteps,
            true_reward: e.true_reward,
            nominal_reward: e.nominal_reward,
            violation_rate: e.violation_rate,
            lambda: policy.lambda,
            forward_bound: phase.forward_bound,
            reverse_bound: phase.reverse_bound,
            backward_iterations: phase.iterations,
        };
        self.writer.serialize(&row)?;
        self.writer.flush()?;
        self.metrics.push(row);
        let hash = self.cfg.hash();
        save_checkpoint(&self.dir.join(POLICY_FILE), POLICY_KIND, Some(&hash), policy)?;
        if let Some(net) = constraint {
            save_checkpoint(&self.dir.join(CONSTRAINT_FILE), CONSTRAINT_KIND, Some(&hash), net)?;
        }
        Ok(())
    }

    fn finish(self, policy: PolicyBundle, constraint: Option<ConstraintNet>, converged: bool) -> RunArtifacts {
        RunArtifacts {
            dir: self.dir,
            metrics: self.metrics,
            policy,
            constraint,
            converged,
        }
    }
}

fn new_constraint<R: Rng + ?Sized>(cfg: &RunConfig, env: &dyn Environment, rng: &mut R) -> Result<ConstraintNet> {
    let pair_dim = env.spec().pair_dim();
    let features = cfg.constraint.features.clone().unwrap_or(FeatureMap::all(pair_dim));
    ConstraintNet::new(features, pair_dim, &cfg.backward.hidden, cfg.constraint.init_score, rng)
}

/// `n` nominal-mode episodes with sampled actions.
pub fn sample_nominal<R: Rng + ?Sized>(
    env: &dyn Environment,
    policy: &PolicyBundle,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Trajectory>> {
    (0..n)
        .map(|k| {
            run_episode(env, Mode::Nominal, k as u64, |s| {
                Ok(policy.sample(&env.observe(s), rng)?.0)
            })
        })
        .collect()
}

fn prepare_all(net: &ConstraintNet, env: &dyn Environment, trajs: &[Trajectory]) -> Result<Vec<Vec<Vec<f64>>>> {
    trajs.iter().map(|t| prepare(net, env, t)).collect()
}

fn steps(trajs: &[Trajectory]) -> usize {
    trajs.iter().map(|t| t.len()).sum()
}

fn check_expert(cfg: &RunConfig, expert: &[Trajectory]) -> Result<()> {
    if expert.is_empty() {
        Err(Error::Degenerate(format!("no expert trajectories for {}", cfg.env)))
    } else {
        Ok(())
    }
}

/// The alternating scheme: `cfg.iterations` rounds of a warm-started
/// forward solve under the current `zeta`, fresh nominal samples and a
/// backward phase. Row 0 of the metrics is the initial policy.
pub fn run_icrl(cfg: &RunConfig, expert: &[Trajectory], out_dir: &Path) -> Result<RunArtifacts> {
    cfg.validate()?;
    check_expert(cfg, expert)?;
    let env = make_env(&cfg.env)?;
    let env = env.as_ref();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut learner = ConstraintLearner::new(new_constraint(cfg, env, &mut rng)?, cfg.backward.learning_rate)?;
    let mut trainer = cfg.forward.new_trainer(env, &mut rng)?;
    let expert_inputs = prepare_all(&learner.net, env, expert)?;
    let mut rec = Recorder::create(cfg, env, out_dir)?;
    rec.record(&trainer.bundle, Some(&learner.net), &PhaseReport::default())?;
    let mut converged = false;
    for _ in 0..cfg.iterations {
        let problem = ForwardProblem {
            env,
            cost: &learner.net,
            reward_bonus: None,
        };
        let fwd = solve_forward(problem, &mut trainer, &cfg.forward, &mut rng)?;
        converged = fwd.converged;
        let nominal = sample_nominal(env, &trainer.bundle, cfg.nominal_episodes, &mut rng)?;
        rec.timesteps += fwd.timesteps + steps(&nominal);
        let nominal_inputs = prepare_all(&learner.net, env, &nominal)?;
        let phase = backward_phase(&mut learner, &expert_inputs, &nominal_inputs, &cfg.backward, &mut rng)?;
        rec.record(&trainer.bundle, Some(&learner.net), &phase)?;
    }
    Ok(rec.finish(trainer.bundle, Some(learner.net), converged))
}

/// `cfg.iterations` evaluation rounds of a forward solve against a fixed
/// score. Returns the trainer and whether the last solve converged.
fn forward_rounds(
    cfg: &RunConfig,
    env: &dyn Environment,
    cost: &dyn PairScore,
    mut trainer: PpoTrainer,
    rec: &mut Recorder<'_>,
    constraint: Option<&ConstraintNet>,
    rng: &mut ChaCha8Rng,
) -> Result<(PpoTrainer, bool)> {
    rec.record(&trainer.bundle, constraint, &PhaseReport::default())?;
    let mut converged = cost.is_unconstrained();
    for _ in 0..cfg.iterations {
        let problem = ForwardProblem {
            env,
            cost,
            reward_bonus: None,
        };
        let fwd = solve_forward(problem, &mut trainer, &cfg.forward, rng)?;
        converged = fwd.converged;
        rec.timesteps += fwd.timesteps;
        rec.record(&trainer.bundle, constraint, &PhaseReport::default())?;
    }
    Ok((trainer, converged))
}

/// The nominal agent: the forward solver without any constraint.
pub fn run_nominal(cfg: &RunConfig, out_dir: &Path) -> Result<RunArtifacts> {
    cfg.validate()?;
    let env = make_env(&cfg.env)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let trainer = cfg.forward.new_trainer(env.as_ref(), &mut rng)?;
    let mut rec = Recorder::create(cfg, env.as_ref(), out_dir)?;
    let (trainer, converged) = forward_rounds(cfg, env.as_ref(), &Unconstrained, trainer, &mut rec, None, &mut rng)?;
    Ok(rec.finish(trainer.bundle, None, converged))
}

/// Binary-classifier baseline: a nominal policy is trained without
/// constraints, its samples form a frozen negative class, and the fitted
/// classifier is then used as `zeta` in one long forward solve.
pub fn run_bc(cfg: &RunConfig, expert: &[Trajectory], out_dir: &Path) -> Result<RunArtifacts> {
    cfg.validate()?;
    check_expert(cfg, expert)?;
    let env = make_env(&cfg.env)?;
    let env = env.as_ref();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut nominal_trainer = cfg.expert.forward.new_trainer(env, &mut rng)?;
    let problem = ForwardProblem {
        env,
        cost: &Unconstrained,
        reward_bonus: None,
    };
    let pre = solve_forward(problem, &mut nominal_trainer, &cfg.expert.forward, &mut rng)?;
    let nominal = sample_nominal(env, &nominal_trainer.bundle, cfg.nominal_episodes, &mut rng)?;
    let mut clf = Classifier::new(new_constraint(cfg, env, &mut rng)?, cfg.classifier.learning_rate)?;
    let flat = |trajs: &[Trajectory], net: &ConstraintNet| -> Result<Vec<Vec<f64>>> {
        Ok(prepare_all(net, env, trajs)?.into_iter().flatten().collect())
    };
    let e = flat(expert, &clf.net)?;
    let n = flat(&nominal, &clf.net)?;
    bc_train(&mut clf, &e, &n, &cfg.classifier, &mut rng)?;
    let trainer = cfg.forward.new_trainer(env, &mut rng)?;
    let mut rec = Recorder::create(cfg, env, out_dir)?;
    rec.timesteps = pre.timesteps + steps(&nominal);
    let (trainer, converged) = forward_rounds(cfg, env, &clf.net, trainer, &mut rec, Some(&clf.net), &mut rng)?;
    Ok(rec.finish(trainer.bundle, Some(clf.net), converged))
}

/// GAIL-style baseline: PPO on `r + ln D` alternated with discriminator
/// epochs, `cfg.forward.iterations` rounds between evaluations.
pub fn run_gc(cfg: &RunConfig, expert: &[Trajectory], out_dir: &Path) -> Result<RunArtifacts> {
    cfg.validate()?;
    check_expert(cfg, expert)?;
    let env = make_env(&cfg.env)?;
    let env = env.as_ref();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut clf = Classifier::new(new_constraint(cfg, env, &mut rng)?, cfg.gc.discriminator_lr)?;
    let mut trainer = cfg.forward.new_trainer(env, &mut rng)?;
    trainer.bundle.lambda = 0.0;
    let e: Vec<Vec<f64>> = prepare_all(&clf.net, env, expert)?.into_iter().flatten().collect();
    let mut rec = Recorder::create(cfg, env, out_dir)?;
    rec.record(&trainer.bundle, Some(&clf.net), &PhaseReport::default())?;
    for _ in 0..cfg.iterations {
        let rep = gc_train(
            env,
            &e,
            &mut clf,
            &mut trainer,
            &cfg.forward,
            &cfg.gc,
            cfg.forward.iterations,
            &mut rng,
        )?;
        rec.timesteps += rep.timesteps;
        rec.record(&trainer.bundle, Some(&clf.net), &PhaseReport::default())?;
    }
    Ok(rec.finish(trainer.bundle, Some(clf.net), true))
}

/// Dispatches on `cfg.method`.
pub fn run_method(cfg: &RunConfig, expert: &[Trajectory], out_dir: &Path) -> Result<RunArtifacts> {
    match cfg.method {
        Method::Icrl => run_icrl(cfg, expert, out_dir),
        Method::Bc => run_bc(cfg, expert, out_dir),
        Method::Gc => run_gc(cfg, expert, out_dir),
    }
}

/// Runs under `out_dir/<ablation tag>/`, so each flag combination gets its
/// own metrics files.
pub fn run_ablation(cfg: &RunConfig, expert: &[Trajectory], out_dir: &Path) -> Result<RunArtifacts> {
    run_icrl(cfg, expert, &out_dir.join(cfg.ablation_tag()))
}

pub fn load_constraint(path: &Path) -> Result<ConstraintNet> {
    load_checkpoint(path, CONSTRAINT_KIND)
}

pub fn load_policy(path: &Path) -> Result<PolicyBundle> {
    load_checkpoint(path, POLICY_KIND)
}

/// Trains a fresh policy on `cfg.env` against the frozen net named by
/// `cfg.transfer`: as a constraint for ICRL and the classifier, as the
/// `ln D` reward bonus for GC. No backward step runs.
pub fn run_transfer(cfg: &RunConfig, out_dir: &Path) -> Result<RunArtifacts> {
    cfg.validate()?;
    let source = cfg
        .transfer
        .as_ref()
        .ok_or_else(|| Error::Config("transfer needs a source constraint".into()))?;
    let net = load_constraint(&source.source)?;
    let env = make_env(&cfg.env)?;
    net.check_env(env.as_ref())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let trainer = cfg.forward.new_trainer(env.as_ref(), &mut rng)?;
    let mut rec = Recorder::create(cfg, env.as_ref(), out_dir)?;
    let (trainer, converged) = if cfg.method == Method::Gc {
        let mut trainer = trainer;
        trainer.bundle.lambda = 0.0;
        rec.record(&trainer.bundle, Some(&net), &PhaseReport::default())?;
        for _ in 0..cfg.iterations {
            let problem = ForwardProblem {
                env: env.as_ref(),
                cost: &Unconstrained,
                reward_bonus: Some(&net),
            };
            rec.timesteps += solve_forward(problem, &mut trainer, &cfg.forward, &mut rng)?.timesteps;
            rec.record(&trainer.bundle, Some(&net), &PhaseReport::default())?;
        }
        (trainer, true)
    } else {
        forward_rounds(cfg, env.as_ref(), &net, trainer, &mut rec, Some(&net), &mut rng)?
    };
    Ok(rec.finish(trainer.bundle, Some(net), converged))
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use icrl::driver::{
    evaluate, export_plot_data, generate_expert, lint_dataset, load_policy, run_ablation, run_dir, run_method,
    run_nominal, run_transfer, Method, RunArtifacts, RunConfig, TransferConfig,
};
use icrl::envs::{make_env, read_dataset, write_dataset, Trajectory};
use icrl::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EXPERT_FILE: &str = "expert.jsonl";

#[derive(Parser)]
#[command(name = "icrl", version, about = "Learn constraints from demonstrations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy on the true constraint and write its rollouts.
    Expert {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output dataset (JSON lines).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a method on an environment.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        /// Expert dataset; generated from the seed when absent.
        #[arg(long)]
        expert: Option<PathBuf>,
        /// Train without any constraint instead.
        #[arg(long)]
        nominal: bool,
    },
    /// Train a fresh policy on another env against a frozen constraint.
    Transfer {
        #[command(flatten)]
        run: RunArgs,
        /// Constraint checkpoint of the source run.
        #[arg(long)]
        source: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Roll out a saved policy and print its metrics as JSON.
    Evaluate {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        env: String,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        #[arg(long)]
        stochastic: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write long and aggregate plot CSVs for every run below a directory.
    Export { dir: PathBuf },
    /// Run the learner under all four importance-sampling / early-stopping
    /// combinations.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        expert: Option<PathBuf>,
    },
}

/// Flags that override fields of the run config. Precedence: env defaults,
/// then `--config`, then flags, then `--set`.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    method: Option<Method>,
    /// Outer iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Forward PPO iterations per outer iteration.
    #[arg(long)]
    forward_iterations: Option<usize>,
    /// Backward gradient steps per phase (B).
    #[arg(long)]
    backward_iterations: Option<usize>,
    #[arg(long)]
    no_importance_sampling: bool,
    #[arg(long)]
    no_early_stopping: bool,
    #[arg(long)]
    nominal_episodes: Option<usize>,
    #[arg(long)]
    eval_episodes: Option<usize>,
    #[arg(long)]
    expert_rollouts: Option<usize>,
    /// Any config field as `dotted.path=<json>`, e.g. `backward.delta=0.5`.
    #[arg(long = "set", value_name = "PATH=JSON")]
    set: Vec<String>,
}

impl RunArgs {
    fn build(&self, seed: u64) -> Result<RunConfig> {
        let hint = self.env.as_deref().unwrap_or("lap-gridworld");
        let mut overlay = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => serde_json::json!({}),
        };
        if let Some(env) = &self.env {
            overlay["env"] = env.clone().into();
        }
        let mut cfg = RunConfig::from_overlay(overlay, hint)?;
        if let Some(m) = self.method {
            cfg.method = m;
        }
        cfg.seed = seed;
        if let Some(n) = self.iterations {
            cfg.iterations = n;
        }
        if let Some(n) = self.forward_iterations {
            cfg.forward.iterations = n;
        }
        if let Some(n) = self.backward_iterations {
            cfg.backward.iterations = n;
        }
        cfg.backward.use_importance_sampling &= !self.no_importance_sampling;
        cfg.backward.use_early_stopping &= !self.no_early_stopping;
        if let Some(n) = self.nominal_episodes {
            cfg.nominal_episodes = n;
        }
        if let Some(n) = self.eval_episodes {
            cfg.eval_episodes = n;
        }
        if let Some(n) = self.expert_rollouts {
            cfg.expert.rollouts = n;
        }
        if !self.set.is_empty() {
            let mut value = serde_json::to_value(&cfg)?;
            for item in &self.set {
                apply_set(&mut value, item)?;
            }
            cfg = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn apply_set(value: &mut serde_json::Value, item: &str) -> Result<()> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set expects PATH=JSON, got `{item}`")))?;
    // Bare words are taken as strings.
    let new = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.into()));
    let mut slot = value;
    for key in path.split('.') {
        slot = slot
            .as_object_mut()
            .and_then(|o| o.get_mut(key))
            .ok_or_else(|| Error::Config(format!("no config field `{path}`")))?;
    }
    *slot = new;
    Ok(())
}

fn load_expert(cfg: &RunConfig, path: &Path) -> Result<Vec<Trajectory>> {
    let (header, trajs) = read_dataset(path)?;
    if header.env != cfg.env {
        return Err(Error::Config(format!(
            "{} holds `{}` trajectories, not `{}`",
            path.display(),
            header.env,
            cfg.env
        )));
    }
    lint_dataset(make_env(&cfg.env)?.as_ref(), &trajs)?;
    Ok(trajs)
}

fn make_expert(cfg: &RunConfig) -> Result<Vec<Trajectory>> {
    let env = make_env(&cfg.env)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (_, trajs) = generate_expert(env.as_ref(), &cfg.expert, &mut rng)?;
    lint_dataset(env.as_ref(), &trajs)?;
    Ok(trajs)
}

fn expert_for(cfg: &RunConfig, path: Option<&Path>, out_dir: &Path) -> Result<Vec<Trajectory>> {
    match path {
        Some(p) => load_expert(cfg, p),
        None => {
            let trajs = make_expert(cfg)?;
            let dir = run_dir(out_dir, cfg);
            std::fs::create_dir_all(&dir)?;
            write_dataset(&dir.join(EXPERT_FILE), make_env(&cfg.env)?.spec(), &trajs)?;
            Ok(trajs)
        }
    }
}

fn report(label: &str, a: &RunArtifacts) {
    println!("{label}: {}", a.dir.display());
    if let Some(last) = a.metrics.last() {
        println!(
            "  timesteps {}  true_reward {:.3}  nominal_reward {:.3}  violation_rate {:.4}",
            last.timesteps, last.true_reward, last.nominal_reward, last.violation_rate
        );
    }
    if !a.converged {
        eprintln!("  note: last forward solve stayed above its cost tolerance");
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Expert { run, seed, out } => {
            let cfg = run.build(seed)?;
            let trajs = make_expert(&cfg)?;
            if let Some(parent) = out.parent() {
                std::fs::create_dir_all(parent)?;
            }
            write_dataset(&out, make_env(&cfg.env)?.spec(), &trajs)?;
            let mean = trajs.iter().map(|t| t.total_reward()).sum::<f64>() / trajs.len() as f64;
            println!("{} trajectories, mean return {mean:.3}: {}", trajs.len(), out.display());
        }
        Command::Train {
            run,
            seed,
            out_dir,
            expert,
            nominal,
        } => {
            let cfg = run.build(seed)?;
            let a = if nominal {
                run_nominal(&cfg, &out_dir)?
            } else {
                let trajs = expert_for(&cfg, expert.as_deref(), &out_dir)?;
                run_method(&cfg, &trajs, &out_dir)?
            };
            report(&cfg.method.to_string(), &a);
        }
        Command::Transfer {
            run,
            source,
            seed,
            out_dir,
        } => {
            let mut cfg = run.build(seed)?;
            cfg.transfer = Some(TransferConfig { source });
            let a = run_transfer(&cfg, &out_dir)?;
            report("transfer", &a);
        }
        Command::Evaluate {
            policy,
            env,
            episodes,
            stochastic,
            seed,
        } => {
            if episodes == 0 {
                return Err(Error::Config("episodes must be positive".into()));
            }
            let bundle = load_policy(&policy)?;
            let env = make_env(&env)?;
            let e = evaluate(
                &bundle,
                env.as_ref(),
                episodes,
                stochastic,
                &mut ChaCha8Rng::seed_from_u64(seed),
            )?;
            println!("{}", serde_json::to_string(&e)?);
        }
        Command::Export { dir } => {
            let data = export_plot_data(&dir)?;
            if let Some(n) = data.truncated_to {
                eprintln!("warning: seeds differ in length, aggregate truncated to {n} rows");
            }
            println!(
                "{} long rows, {} aggregate rows in {}",
                data.long.len(),
                data.aggregate.len(),
                dir.display()
            );
        }
        Command::Ablate {
            run,
            seed,
            out_dir,
            expert,
        } => {
            let base = run.build(seed)?;
            let trajs = expert_for(&base, expert.as_deref(), &out_dir)?;
            for (is, es) in [(true, true), (false, true), (true, false), (false, false)] {
                let mut cfg = base.clone();
                cfg.method = Method::Icrl;
                cfg.backward.use_importance_sampling = is;
                cfg.backward.use_early_stopping = es;
                let a = run_ablation(&cfg, &trajs, &out_dir)?;
                report(&cfg.ablation_tag(), &a);
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::UnknownEnv(_) | Error::FeatureMismatch { .. } | Error::FormatVersion { .. } => 2,
        Error::NotConverged(_) => 3,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::EmptyRunDir(_) | Error::MalformedTrajectory(_) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

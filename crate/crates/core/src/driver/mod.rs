//! End-to-end runs: expert generation, the alternating learner and the
//! baselines, evaluation, transfer, ablations and plot data.
//!
//! A run writes `config.json`, `metrics.csv`, `policy.json` and (where the
//! method learns one) `constraint.json` into `out_dir/seed_{seed}/`.

mod config;
mod eval;
mod expert;
mod export;
mod run;

pub use config::{ConstraintSettings, ExpertConfig, Method, RunConfig, TransferConfig};
pub use eval::{evaluate, Evaluation, MetricsRecord};
pub use expert::{generate_expert, lint_dataset};
pub use export::{
    aggregate, export_plot_data, read_metrics, AggregateRow, LongRow, PlotData, AGGREGATE_FILE, LONG_FILE,
};
pub use run::{
    load_constraint, load_policy, run_ablation, run_bc, run_dir, run_gc, run_icrl, run_method, run_nominal,
    run_transfer, sample_nominal, RunArtifacts, CONFIG_FILE, CONSTRAINT_FILE, CONSTRAINT_KIND, METRICS_FILE,
    POLICY_FILE, POLICY_KIND,
};

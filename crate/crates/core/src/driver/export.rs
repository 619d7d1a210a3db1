use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{MetricsRecord, METRICS_FILE};
use crate::{Error, Result};

pub const LONG_FILE: &str = "plot_long.csv";
pub const AGGREGATE_FILE: &str = "plot_aggregate.csv";

const METRICS: [&str; 3] = ["true_reward", "violation_rate", "nominal_reward"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongRow {
    pub timestep: usize,
    pub seed: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    /// Empty on the warning row.
    pub timestep: Option<usize>,
    pub metric: String,
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub long: Vec<LongRow>,
    pub aggregate: Vec<AggregateRow>,
    /// Set when seeds had different lengths.
    pub truncated_to: Option<usize>,
}

fn metric(r: &MetricsRecord, name: &str) -> f64 {
    match name {
        "true_reward" => r.true_reward,
        "violation_rate" => r.violation_rate,
        _ => r.nominal_reward,
    }
}

/// Metrics files below `dir`, keyed by their directory's path relative to
/// `dir` (the seed label).
fn find_metrics(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut found = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == METRICS_FILE) {
                let parent = path.parent().unwrap();
                let label = parent.strip_prefix(dir).unwrap_or(parent).display().to_string();
                found.insert(if label.is_empty() { ".".into() } else { label }, path);
            }
        }
    }
    Ok(found)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Long-format rows per seed and a mean / standard-error aggregate per
/// row index. Seeds of different lengths are cut to the shortest; the
/// aggregate then ends with a warning row.
pub fn aggregate(runs: &BTreeMap<String, Vec<MetricsRecord>>) -> PlotData {
    let mut long = Vec::new();
    for (seed, rows) in runs {
        for r in rows {
            for m in METRICS {
                long.push(LongRow {
                    timestep: r.timesteps,
                    seed: seed.clone(),
                    metric: m.into(),
                    value: metric(r, m),
                });
            }
        }
    }
    let shortest = runs.values().map(Vec::len).min().unwrap_or(0);
    let longest = runs.values().map(Vec::len).max().unwrap_or(0);
    let mut agg = Vec::new();
    for i in 0..shortest {
        let timestep = runs.values().map(|r| r[i].timesteps).sum::<usize>() / runs.len();
        for m in METRICS {
            let xs: Vec<f64> = runs.values().map(|r| metric(&r[i], m)).collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let stderr = if xs.len() > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
            } else {
                0.0
            };
            agg.push(AggregateRow {
                timestep: Some(timestep),
                metric: m.into(),
                mean: Some(mean),
                stderr: Some(stderr),
            });
        }
    }
    let truncated_to = (shortest < longest).then_some(shortest);
    if let Some(n) = truncated_to {
        agg.push(AggregateRow {
            timestep: None,
            metric: format!("warning: seeds differ in length, truncated to {n} rows"),
            mean: None,
            stderr: None,
        });
    }
    PlotData {
        long,
        aggregate: agg,
        truncated_to,
    }
}

/// Writes the long and aggregate CSVs into `dir` for every metrics file
/// found below it.
pub fn export_plot_data(dir: &Path) -> Result<PlotData> {
    let files = find_metrics(dir)?;
    if files.is_empty() {
        return Err(Error::EmptyRunDir(dir.to_path_buf()));
    }
    let mut runs = BTreeMap::new();
    for (label, path) in files {
        runs.insert(label, read_metrics(&path)?);
    }
    let data = aggregate(&runs);
    let mut w = csv::Writer::from_path(dir.join(LONG_FILE))?;
    for r in &data.long {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join(AGGREGATE_FILE))?;
    for r in &data.aggregate {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(data)
}

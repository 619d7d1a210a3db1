//! JSON-lines trajectory datasets.
//!
//! The first line is a header record; each following line holds one
//! trajectory as parallel arrays. `states` has one more entry than
//! `actions` because it ends with the final next state.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Action, EnvSpec, Trajectory, Transition};
use crate::{Error, Result};

pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub env: String,
    pub horizon: usize,
    pub num_trajectories: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryRecord {
    states: Vec<Vec<f64>>,
    actions: Vec<Action>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
}

impl From<&Trajectory> for TrajectoryRecord {
    fn from(traj: &Trajectory) -> Self {
        let steps = traj.transitions();
        let mut states: Vec<Vec<f64>> = steps.iter().map(|t| t.state.clone()).collect();
        states.push(steps.last().unwrap().next_state.clone());
        Self {
            states,
            actions: steps.iter().map(|t| t.action.clone()).collect(),
            rewards: steps.iter().map(|t| t.reward).collect(),
            dones: steps.iter().map(|t| t.done).collect(),
        }
    }
}

impl TrajectoryRecord {
    fn into_trajectory(self) -> Result<Trajectory> {
        let n = self.actions.len();
        if self.states.len() != n + 1 || self.rewards.len() != n || self.dones.len() != n {
            return Err(Error::MalformedTrajectory(format!(
                "record arrays disagree: {} states, {} actions, {} rewards, {} dones",
                self.states.len(),
                n,
                self.rewards.len(),
                self.dones.len()
            )));
        }
        let transitions = (0..n)
            .map(|t| Transition {
                state: self.states[t].clone(),
                action: self.actions[t].clone(),
                next_state: self.states[t + 1].clone(),
                reward: self.rewards[t],
                done: self.dones[t],
            })
            .collect();
        Trajectory::new(transitions)
    }
}

pub fn write_dataset(path: &Path, spec: &EnvSpec, trajectories: &[Trajectory]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let header = DatasetHeader {
        format_version: DATASET_VERSION,
        env: spec.name.clone(),
        horizon: spec.horizon,
        num_trajectories: trajectories.len(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for traj in trajectories {
        serde_json::to_writer(&mut out, &TrajectoryRecord::from(traj))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<(DatasetHeader, Vec<Trajectory>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::MalformedTrajectory(format!("{} is empty", path.display())))??;
    let header: DatasetHeader = serde_json::from_str(&header_line)?;
    if header.format_version != DATASET_VERSION {
        return Err(Error::FormatVersion {
            found: header.format_version,
            expected: DATASET_VERSION,
        });
    }
    let mut trajectories = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TrajectoryRecord = serde_json::from_str(&line)?;
        trajectories.push(record.into_trajectory()?);
    }
    Ok((header, trajectories))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_env, run_episode, Mode};

    #[test]
    fn roundtrip_discrete_and_continuous() {
        let dir = tempfile::tempdir().unwrap();
        for (name, action) in [
            ("lap-gridworld", Action::Discrete(0)),
            ("point-mass", Action::Continuous(vec![0.3, -0.2])),
        ] {
            let env = make_env(name).unwrap();
            let traj = run_episode(env.as_ref(), Mode::Nominal, 0, |_| Ok(action.clone())).unwrap();
            let path = dir.path().join(format!("{name}.jsonl"));
            write_dataset(&path, env.spec(), &[traj.clone(), traj.clone()]).unwrap();
            let (header, back) = read_dataset(&path).unwrap();
            assert_eq!(header.env, name);
            assert_eq!(header.horizon, env.spec().horizon);
            assert_eq!(back, vec![traj.clone(), traj]);
        }
    }

    #[test]
    fn rejects_future_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        std::fs::write(
            &path,
            "{\"format_version\":2,\"env\":\"bandit\",\"horizon\":1,\"num_trajectories\":0}\n",
        )
        .unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::FormatVersion { .. })));
    }
}

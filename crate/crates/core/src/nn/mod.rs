//! Small dense networks, backpropagation and the Adam optimizer.

mod adam;
mod mlp;

pub use adam::Adam;
pub use mlp::{Activation, ForwardCache, Mlp, SIGMOID_CEIL, SIGMOID_FLOOR};

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Version written into every checkpoint container.
pub const CHECKPOINT_VERSION: u32 = 1;

/// Self-describing JSON container used for all checkpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint<T> {
    pub format_version: u32,
    pub kind: String,
    /// Hash of the run config that produced the payload, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub payload: T,
}

pub fn save_checkpoint<T: Serialize>(path: &Path, kind: &str, config_hash: Option<&str>, payload: &T) -> Result<()> {
    let ckpt = Checkpoint {
        format_version: CHECKPOINT_VERSION,
        kind: kind.to_string(),
        config_hash: config_hash.map(str::to_string),
        payload,
    };
    fs::write(path, serde_json::to_vec_pretty(&ckpt)?)?;
    Ok(())
}

pub fn load_checkpoint<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let bytes = fs::read(path)?;
    let ckpt: Checkpoint<T> = serde_json::from_slice(&bytes)?;
    if ckpt.format_version != CHECKPOINT_VERSION {
        return Err(Error::FormatVersion {
            found: ckpt.format_version,
            expected: CHECKPOINT_VERSION,
        });
    }
    if ckpt.kind != kind {
        return Err(Error::Config(format!(
            "checkpoint {} holds a `{}`, expected `{kind}`",
            path.display(),
            ckpt.kind
        )));
    }
    Ok(ckpt.payload)
}

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::Network;
use super::{NetworkConfig, NnError};

pub const CHECKPOINT_FORMAT: &str = "skycast-network";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct StoredTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Stored {
    format: String,
    version: u32,
    seed: u64,
    config: NetworkConfig,
    tensors: Vec<StoredTensor>,
}

pub(crate) fn to_json(net: &Network) -> serde_json::Value {
    let stored = Stored {
        format: CHECKPOINT_FORMAT.to_string(),
        version: CHECKPOINT_VERSION,
        seed: net.config.seed,
        config: net.config.clone(),
        tensors: net
            .layout
            .tensors
            .iter()
            .map(|t| StoredTensor {
                name: t.name.clone(),
                shape: t.shape.clone(),
                data: net.params[t.range()].to_vec(),
            })
            .collect(),
    };
    serde_json::to_value(stored).expect("checkpoint serializes")
}

pub(crate) fn from_json(value: serde_json::Value, expected: Option<&NetworkConfig>) -> Result<Network, NnError> {
    #[derive(Deserialize)]
    struct Header {
        format: String,
        version: u32,
    }
    let header: Header =
        serde_json::from_value(value.clone()).map_err(|e| NnError::Checkpoint(format!("unreadable header: {e}")))?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(NnError::Checkpoint(format!("not a network checkpoint ({:?})", header.format)));
    }
    if header.version != CHECKPOINT_VERSION {
        return Err(NnError::Version {
            found: header.version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let stored: Stored = serde_json::from_value(value).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    if let Some(want) = expected {
        if *want != stored.config {
            return Err(NnError::ConfigMismatch(format!(
                "checkpoint has {:?}, loader expects {:?}",
                stored.config, want
            )));
        }
    }
    stored.config.validate()?;
    let layout = stored.config.layout();
    if stored.tensors.len() != layout.tensors.len() {
        return Err(NnError::Checkpoint(format!(
            "{} tensors stored, layout has {}",
            stored.tensors.len(),
            layout.tensors.len()
        )));
    }
    let mut params = vec![0.0; layout.len];
    for (s, t) in stored.tensors.iter().zip(&layout.tensors) {
        if s.name != t.name || s.shape != t.shape || s.data.len() != t.len() {
            return Err(NnError::Checkpoint(format!(
                "tensor {} {:?} does not match layout {} {:?}",
                s.name, s.shape, t.name, t.shape
            )));
        }
        params[t.range()].copy_from_slice(&s.data);
    }
    Ok(Network {
        config: stored.config,
        layout,
        params,
    })
}

pub fn save(net: &Network, path: impl AsRef<Path>) -> Result<(), NnError> {
    let path = path.as_ref();
    let text = serde_json::to_string(&to_json(net)).expect("checkpoint serializes");
    fs::write(path, text).map_err(|source| NnError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a checkpoint. With `expected`, the stored configuration must match
/// it exactly.
pub fn load(path: impl AsRef<Path>, expected: Option<&NetworkConfig>) -> Result<Network, NnError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| NnError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))?;
    from_json(value, expected)
}

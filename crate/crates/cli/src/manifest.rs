use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use skycast_core::experiments::config_hash;
use skycast_core::ExperimentConfig;

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Seeds {
    pub master: u64,
    pub network: u64,
    pub synth: u64,
}

/// What a run read and wrote, enough to repeat it. Output paths are
/// relative to the output directory.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seeds: Seeds,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_time_s: f64,
    pub config: ExperimentConfig,
}

fn digest(path: &Path) -> String {
    match std::fs::read(path) {
        Ok(bytes) => hex::encode(Sha256::digest(&bytes)),
        Err(_) => String::new(),
    }
}

impl RunManifest {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        let hashed = ExperimentConfig {
            workers: 0,
            ..cfg.clone()
        };
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash(&hashed),
            seeds: Seeds {
                master: cfg.seed,
                network: cfg.network_seed(),
                synth: cfg.synth_config().seed,
            },
            inputs: Vec::new(),
            outputs: Vec::new(),
            wall_time_s: 0.0,
            config: cfg.clone(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: digest(path),
        });
    }

    pub fn output(&mut self, root: &Path, path: &Path) {
        let rel = path.strip_prefix(root).unwrap_or(path);
        self.outputs.push(FileDigest {
            path: rel.display().to_string(),
            sha256: digest(path),
        });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExperimentError;
use crate::eval::StrataThresholds;
use crate::features::{FeatureManifest, FeatureSpec, TimeRepresentation};
use crate::forecast::TargetRepresentation;
use crate::ingest::{CsvSchema, WindowSpec};
use crate::nn::{NetworkConfig, TrainConfig};
use crate::solar::SiteConfig;
use crate::synth::SynthConfig;

/// Where observations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    /// Station CSV. Without it the synthetic generator is used.
    pub path: Option<PathBuf>,
    pub cadence_s: u32,
    pub schema: CsvSchema,
    /// Value of the eclipse-shading column (1 = unshaded).
    pub eclipse_shading: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            path: None,
            cadence_s: 60,
            schema: CsvSchema::default(),
            eclipse_shading: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// `desk`, `appendix_a` or a path to a TOML manifest.
    pub manifest: String,
    /// Time encoding appended to the manifest.
    pub time_representation: Option<TimeRepresentation>,
    /// Unscaled `sin(x)` for angle encodings.
    pub literal_angles: bool,
    pub extra: Vec<FeatureSpec>,
    /// Keep only these emitted features when non-empty.
    pub select: Vec<String>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            manifest: "desk".to_string(),
            time_representation: Some(TimeRepresentation::Tm),
            literal_angles: false,
            extra: Vec::new(),
            select: Vec::new(),
        }
    }
}

impl FeatureConfig {
    /// Resolves the manifest plus time encoding and extras. Relative
    /// manifest paths are taken from `base`.
    pub fn resolve(&self, base: Option<&Path>) -> Result<FeatureManifest, ExperimentError> {
        let mut m = match FeatureManifest::builtin(&self.manifest) {
            Some(m) => m,
            None => {
                let p = match base {
                    Some(b) if Path::new(&self.manifest).is_relative() => b.join(&self.manifest),
                    _ => PathBuf::from(&self.manifest),
                };
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| ExperimentError::Config(format!("feature manifest {}: {e}", p.display())))?;
                FeatureManifest::from_toml(&text)?
            }
        };
        if let Some(tr) = self.time_representation {
            m.extend_unique(tr.specs(self.literal_angles));
        }
        m.extend_unique(self.extra.iter().cloned());
        if !self.select.is_empty() {
            let names = m.emitted_names();
            if let Some(missing) = self.select.iter().find(|s| !names.contains(s)) {
                return Err(ExperimentError::Config(format!("selected feature {missing:?} is not in the manifest")));
            }
            m.retain_emitted(&self.select);
        }
        m.validate()?;
        Ok(m)
    }
}

/// One explicit train/validate step, as RFC 3339 instants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitStep {
    pub train_start: String,
    pub train_end: String,
    pub validate_end: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    /// Explicit steps; when empty the rolling day counts below are used.
    pub steps: Vec<ExplicitStep>,
    pub initial_train_days: u32,
    pub validate_days: u32,
    pub num_steps: u32,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            steps: Vec::new(),
            initial_train_days: 14,
            validate_days: 8,
            num_steps: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    #[serde(flatten)]
    pub train: TrainConfig,
    /// Epoch budget in fast mode.
    pub fast_epochs: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig {
                learning_rate: 3e-3,
                batch_size: 32,
                max_epochs: 40,
                patience: 8,
            },
            fast_epochs: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    /// Explicit (time, irradiance) cells; when empty the full grid of the
    /// two lists is used.
    pub rows: Vec<(TimeRepresentation, TargetRepresentation)>,
    pub time_reps: Vec<TimeRepresentation>,
    pub irr_reps: Vec<TargetRepresentation>,
    pub sequence_lengths: Vec<usize>,
    pub importance_repetitions: usize,
    /// Features for the reduced noise-ablation set; taken from the
    /// importance ranking when empty.
    pub top_features: Vec<String>,
    pub top_k: usize,
    /// Split step (0-based) used by each procedure.
    pub representation_step: usize,
    pub sequence_step: usize,
    pub importance_step: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            rows: Vec::new(),
            time_reps: TimeRepresentation::ALL.to_vec(),
            irr_reps: TargetRepresentation::ALL.to_vec(),
            sequence_lengths: vec![1, 4, 7, 13],
            importance_repetitions: 5,
            top_features: Vec::new(),
            top_k: 10,
            representation_step: 0,
            sequence_step: 1,
            importance_step: 1,
        }
    }
}

/// Everything a run needs, read from one TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Master seed; data generation and network streams derive from it.
    pub seed: u64,
    pub site: SiteConfig,
    pub data: DataConfig,
    pub synth: SynthConfig,
    pub features: FeatureConfig,
    pub windows: WindowSpec,
    pub target_representation: TargetRepresentation,
    pub network: NetworkConfig,
    pub training: TrainingConfig,
    pub splits: SplitConfig,
    pub experiments: SweepConfig,
    pub strata: StrataThresholds,
    pub fast: bool,
    pub workers: usize,
    /// Directory of the config file, for resolving relative paths.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            site: SiteConfig::golden_co(),
            data: DataConfig::default(),
            synth: SynthConfig::default(),
            features: FeatureConfig::default(),
            windows: WindowSpec {
                stride_s: 300,
                cover_column: Some(crate::synth::COVER_COLUMN.to_string()),
                ..WindowSpec::default()
            },
            target_representation: TargetRepresentation::DeltaCsi,
            network: NetworkConfig {
                noise_width: 4,
                dropout: 0.1,
                conv_filters: 16,
                conv_kernel: 3,
                lstm_hidden: 16,
                dense_hidden: 32,
                ..NetworkConfig::default()
            },
            training: TrainingConfig::default(),
            splits: SplitConfig::default(),
            experiments: SweepConfig::default(),
            strata: StrataThresholds::default(),
            fast: false,
            workers: 1,
            base_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Epoch budget after the fast-mode switch.
    pub fn train_config(&self) -> TrainConfig {
        let mut t = self.training.train.clone();
        if self.fast {
            t.max_epochs = t.max_epochs.min(self.training.fast_epochs);
        }
        t
    }

    pub fn data_path(&self) -> Option<PathBuf> {
        self.data.path.as_ref().map(|p| match &self.base_dir {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.clone(),
        })
    }

    /// Synthetic generator settings with the master seed and site applied.
    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: crate::rng::derive_seed(self.seed, &[0xda7a]),
            site: self.site.clone(),
            ..self.synth.clone()
        }
    }

    pub fn network_seed(&self) -> u64 {
        crate::rng::derive_seed(self.seed, &[0x4e7])
    }
}

/// Hex SHA-256 of the canonical JSON form of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("serializable");
    let digest = Sha256::digest(&json);
    hex::encode(&digest[..8])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            seed = 7
            target_representation = "GHI"
            [windows]
            input_len = 4
            [network]
            lstm_hidden = 8
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.target_representation, TargetRepresentation::Ghi);
        assert_eq!(cfg.windows.input_len, 4);
        assert_eq!(cfg.network.lstm_hidden, 8);
        assert_eq!(cfg.network.output_len, 12);
    }

    #[test]
    fn unknown_representation_rejected() {
        assert!(ExperimentConfig::from_toml("target_representation = \"NOPE\"").is_err());
    }

    #[test]
    fn hash_depends_on_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.seed += 1;
        assert_ne!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn feature_selection_checks_names() {
        let f = FeatureConfig {
            select: vec!["nope".into()],
            ..Default::default()
        };
        assert!(f.resolve(None).is_err());
        let f = FeatureConfig {
            select: vec!["csi_ghi".into(), "ghi".into()],
            ..Default::default()
        };
        assert_eq!(f.resolve(None).unwrap().emitted_names(), vec!["ghi", "csi_ghi"]);
    }
}

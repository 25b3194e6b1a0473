//! Rolling train/validate splits and the refinement procedures run over
//! them: representation sweep, sequence-length sweep, permutation
//! importance and the noise ablation.

pub mod config;
mod importance;
mod pipeline;
mod splits;
mod sweeps;

pub use config::{config_hash, ExperimentConfig};
pub use importance::{permutation_importance, ImportanceEntry, ImportanceReport};
pub use pipeline::{
    build_model_windows, forecast_window, load_raw, poc_records, prepare, records_from, train_model, ModelMeta, Prepared, TargetScaler, TrainedModel,
    MODEL_FORMAT,
};
pub use splits::{make_splits, SplitPlan, SplitStep};
pub use sweeps::{
    noise_ablation, run_cells, run_importance, sweep_representations, sweep_sequence_length, AblationCell, CellResult, SweepResult,
};

use thiserror::Error;

use crate::eval::EvalError;
use crate::features::FeatureError;
use crate::ingest::IngestError;
use crate::nn::NnError;
use crate::solar::SiteError;
use crate::synth::SynthError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("dataset spans {available_days:.2} days but the splits need {needed_days:.2}")]
    Shortfall { needed_days: f64, available_days: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Site(#[from] SiteError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
    Other,
}

impl ExperimentError {
    pub fn class(&self) -> ErrorClass {
        use ErrorClass::*;
        match self {
            Self::Config(_) | Self::Site(_) => Config,
            Self::Feature(FeatureError::Ingest(_)) => Data,
            Self::Feature(_) => Config,
            Self::Synth(SynthError::Config(_) | SynthError::Site(_)) => Config,
            Self::Synth(SynthError::Io { .. }) => Other,
            Self::Synth(_) => Data,
            Self::Ingest(IngestError::InvalidSpec(_) | IngestError::InvalidCadence) => Config,
            Self::Data(_) | Self::Shortfall { .. } | Self::Ingest(_) => Data,
            Self::Nn(NnError::Config(_) | NnError::ConfigMismatch(_)) => Config,
            Self::Nn(NnError::Io { .. }) => Other,
            Self::Nn(NnError::Checkpoint(_) | NnError::Version { .. } | NnError::Shape { .. }) => Data,
            Self::Nn(_) | Self::Numerical(_) => Numerical,
            Self::Eval(EvalError::Io { .. }) => Other,
            Self::Eval(_) => Data,
            Self::Io { .. } => Other,
        }
    }
}

pub(crate) fn io_error(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

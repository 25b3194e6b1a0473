//! Feature engineering: time encodings, clear-sky indices, lags, rolling
//! statistics and component decompositions, driven by a manifest of
//! [`FeatureSpec`]s.

mod engine;
mod spec;
mod time;
mod transforms;

pub use engine::{assemble, engineer, FeatureMatrix, Normalization};
pub use spec::{Axis, CyclicPart, FeatureManifest, FeatureSpec, FlagKind, Milestone, TimeRepresentation, Transform};
pub use time::{cyclic_encode, time_milestones, time_of_day, time_of_year};
pub use transforms::{clear_sky_index, lagged, rolling_stat, RollingKind, CSI_EPS, CSI_MAX};

use thiserror::Error;

use crate::ingest::IngestError;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("duplicate feature name {0:?}")]
    DuplicateName(String),
    #[error("feature {spec:?} reads unknown column {input:?}")]
    UnknownInput { spec: String, input: String },
    #[error("feature {0:?} is part of a dependency cycle")]
    Cycle(String),
    #[error("feature {name:?}: {msg}")]
    InvalidSpec { name: String, msg: String },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

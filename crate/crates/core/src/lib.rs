//! Short-term solar irradiance forecasting from scalar station and sky-camera
//! measurements.
//!
//! The pipeline runs from raw minute data to a per-horizon metrics report:
//!
//! - [`ingest`]: CSV parsing onto a regular time grid, gap detection and
//!   windowing into complete input/horizon blocks.
//! - [`solar`]: solar position, daily sun events and the Ineichen-Perez
//!   clear-sky model.
//! - [`features`]: time representations, clear-sky indices, lags and rolling
//!   statistics driven by a declarative manifest.
//! - [`forecast`]: target representations and the persistence-of-cloudiness
//!   baseline.
//! - [`nn`]: the dropout, convolution, LSTM and dense stack with a Gaussian
//!   noise input, trained with Adam.
//! - [`experiments`]: rolling splits, representation and sequence-length
//!   sweeps, permutation importance and the noise ablation.
//! - [`eval`]: MAE, RMSE, nMAP, forecast skill, rank correlation and
//!   sky-condition strata.
//! - [`synth`]: a synthetic sky generator with known ground truth.

pub mod eval;
pub mod experiments;
pub mod features;
pub mod forecast;
pub mod ingest;
pub mod nn;
pub mod solar;
pub mod synth;

mod rng;

pub use experiments::config::ExperimentConfig;
pub use forecast::{DecodeContext, TargetRepresentation};
pub use ingest::{GapReport, TimeSeriesTable, Window, WindowSet};
pub use solar::SiteConfig;

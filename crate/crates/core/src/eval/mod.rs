//! Forecast metrics, rank correlation, sky-condition strata and report
//! files.

mod metrics;
mod report;

pub use metrics::{
    autocorrelation_profile, average_ranks, forecast_skill, mae, nmap, rmse, rmse_as_printed, spearman, stable_sum,
};
pub use report::{
    report, stratify, write_report, ForecastRecord, HorizonMetrics, MetricsReport, SkyCondition, StrataThresholds,
    StratumSummary, DENSITY_BIN_W, QUANTILES,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no values to score")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two values, got {0}")]
    TooShort(usize),
    #[error("mean of true values is {0}; normalized error undefined")]
    NonPositiveMean(f64),
    #[error("reference error {0} is not positive; skill undefined")]
    NonPositiveReference(f64),
    #[error("rank variance is zero; correlation undefined")]
    ZeroRankVariance,
    #[error("lag {lag} needs a series longer than {len}")]
    LagTooLarge { lag: usize, len: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

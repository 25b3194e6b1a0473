//! Station data ingest: regular-grid tables, gap detection and windowing.

mod cache;
mod csv_io;
mod gaps;
mod table;
mod windows;

pub use cache::{read_window_cache, write_window_cache, CACHE_VERSION};
pub use csv_io::{format_timestamp, parse_csv, parse_timestamp, read_csv, write_csv, write_csv_to, CsvSchema};
pub use gaps::{detect_gaps, GapInterval, GapReport};
pub use table::{is_missing, TimeSeriesTable, MISSING};
pub use windows::{build_windows, default_horizons, Window, WindowSet, WindowSpec};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: malformed timestamp {value:?}")]
    MalformedTimestamp { line: u64, value: String },
    #[error("line {line}: malformed value {value:?} in column {column}")]
    MalformedValue {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: duplicate timestamp {timestamp}")]
    DuplicateTimestamp { line: u64, timestamp: String },
    #[error("line {line}: timestamp {timestamp} is not on the {cadence_s} s grid")]
    OffGrid {
        line: u64,
        timestamp: String,
        cadence_s: u32,
    },
    #[error("header is missing the timestamp column {0:?}")]
    MissingTimestampColumn(String),
    #[error("column {0:?} is not part of the strict schema")]
    UnknownColumn(String),
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("column {name:?} has {actual} entries, table has {expected}")]
    ColumnLength {
        name: String,
        expected: usize,
        actual: usize,
    },
    #[error("no such column {0:?}")]
    NoSuchColumn(String),
    #[error("invalid window specification: {0}")]
    InvalidSpec(String),
    #[error("cadence must be a positive number of seconds")]
    InvalidCadence,
    #[error("window cache: {0}")]
    Cache(String),
}

pub type Result<T> = std::result::Result<T, IngestError>;

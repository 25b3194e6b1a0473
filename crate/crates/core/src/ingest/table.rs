use chrono::{DateTime, TimeZone, Utc};
use indexmap::IndexMap;

use super::{IngestError, Result};

/// Marker stored in place of a missing measurement.
pub const MISSING: f64 = f64::NAN;

#[inline]
pub fn is_missing(v: f64) -> bool {
    v.is_nan()
}

/// Named real-valued columns on a regular UTC time grid.
///
/// Row `i` sits at `start + i * cadence_s`. Missing entries hold [`MISSING`].
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesTable {
    start: i64,
    cadence_s: u32,
    len: usize,
    columns: IndexMap<String, Vec<f64>>,
}

impl TimeSeriesTable {
    /// Empty-column table of `len` rows starting at `start` (Unix seconds).
    pub fn new(start: i64, cadence_s: u32, len: usize) -> Result<Self> {
        if cadence_s == 0 {
            return Err(IngestError::InvalidCadence);
        }
        Ok(Self {
            start,
            cadence_s,
            len,
            columns: IndexMap::new(),
        })
    }

    pub fn with_start(start: DateTime<Utc>, cadence_s: u32, len: usize) -> Result<Self> {
        Self::new(start.timestamp(), cadence_s, len)
    }

    pub fn add_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.len {
            return Err(IngestError::ColumnLength {
                name,
                expected: self.len,
                actual: values.len(),
            });
        }
        if self.columns.contains_key(&name) {
            return Err(IngestError::DuplicateColumn(name));
        }
        self.columns.insert(name, values);
        Ok(())
    }

    /// Inserts or overwrites a column.
    pub fn set_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.len {
            return Err(IngestError::ColumnLength {
                name,
                expected: self.len,
                actual: values.len(),
            });
        }
        self.columns.insert(name, values);
        Ok(())
    }

    pub fn remove_column(&mut self, name: &str) -> Option<Vec<f64>> {
        self.columns.shift_remove(name)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn cadence_s(&self) -> u32 {
        self.cadence_s
    }

    /// Unix seconds of the first row.
    pub fn start_epoch(&self) -> i64 {
        self.start
    }

    pub fn epoch(&self, row: usize) -> i64 {
        self.start + row as i64 * self.cadence_s as i64
    }

    pub fn timestamp(&self, row: usize) -> DateTime<Utc> {
        Utc.timestamp_opt(self.epoch(row), 0).single().expect("epoch in range")
    }

    /// One past the last row's instant.
    pub fn end_epoch(&self) -> i64 {
        self.epoch(self.len)
    }

    /// Row index of an instant that lies exactly on the grid.
    pub fn row_of(&self, epoch: i64) -> Option<usize> {
        let off = epoch - self.start;
        if off < 0 || off % self.cadence_s as i64 != 0 {
            return None;
        }
        let row = (off / self.cadence_s as i64) as usize;
        (row < self.len).then_some(row)
    }

    /// First row at or after `epoch`, clamped to `len`.
    pub fn row_at_or_after(&self, epoch: i64) -> usize {
        let off = epoch - self.start;
        if off <= 0 {
            return 0;
        }
        let c = self.cadence_s as i64;
        (((off + c - 1) / c) as usize).min(self.len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.get(name).map(Vec::as_slice)
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.column(name)
            .ok_or_else(|| IngestError::NoSuchColumn(name.to_string()))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.columns.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    /// Rows `[from, to)` as a new table.
    pub fn slice_rows(&self, from: usize, to: usize) -> TimeSeriesTable {
        let to = to.min(self.len);
        let from = from.min(to);
        TimeSeriesTable {
            start: self.epoch(from),
            cadence_s: self.cadence_s,
            len: to - from,
            columns: self
                .columns
                .iter()
                .map(|(k, v)| (k.clone(), v[from..to].to_vec()))
                .collect(),
        }
    }

    /// Bitwise equality that treats two missing entries as equal.
    pub fn same_contents(&self, other: &TimeSeriesTable) -> bool {
        self.start == other.start
            && self.cadence_s == other.cadence_s
            && self.len == other.len
            && self.columns.len() == other.columns.len()
            && self.columns.iter().zip(other.columns.iter()).all(|((ka, va), (kb, vb))| {
                ka == kb
                    && va.iter().zip(vb).all(|(a, b)| {
                        (is_missing(*a) && is_missing(*b)) || a.to_bits() == b.to_bits()
                    })
            })
    }
}

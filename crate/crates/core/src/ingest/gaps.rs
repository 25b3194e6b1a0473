use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::table::{is_missing, TimeSeriesTable};
use super::Result;

/// A maximal run of rows where at least one required column is missing.
/// Both ends are inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapInterval {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub first_row: usize,
    pub last_row: usize,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub intervals: Vec<GapInterval>,
    /// Fraction of rows where every required column is present.
    pub coverage_fraction: f64,
}

impl GapReport {
    /// True if any interval touches the inclusive row range `[first, last]`.
    pub fn overlaps_rows(&self, first: usize, last: usize) -> bool {
        // intervals are sorted and disjoint: find the first one ending at or after `first`
        let idx = self.intervals.partition_point(|g| g.last_row < first);
        self.intervals
            .get(idx)
            .is_some_and(|g| g.first_row <= last)
    }

    pub fn missing_rows(&self) -> usize {
        self.intervals.iter().map(|g| g.last_row - g.first_row + 1).sum()
    }
}

pub fn detect_gaps(table: &TimeSeriesTable, required: &[impl AsRef<str>]) -> Result<GapReport> {
    let cols: Vec<(&str, &[f64])> = required
        .iter()
        .map(|n| table.require(n.as_ref()).map(|c| (n.as_ref(), c)))
        .collect::<Result<_>>()?;

    let mut intervals: Vec<GapInterval> = Vec::new();
    let mut open: Option<(usize, Vec<bool>)> = None;
    let close = |first: usize, last: usize, hit: &[bool], out: &mut Vec<GapInterval>| {
        out.push(GapInterval {
            start: table.timestamp(first),
            end: table.timestamp(last),
            first_row: first,
            last_row: last,
            columns: cols
                .iter()
                .zip(hit)
                .filter(|(_, h)| **h)
                .map(|((n, _), _)| n.to_string())
                .collect(),
        });
    };

    for row in 0..table.len() {
        let mut any = false;
        for (ci, (_, c)) in cols.iter().enumerate() {
            if is_missing(c[row]) {
                any = true;
                let state = open.get_or_insert_with(|| (row, vec![false; cols.len()]));
                state.1[ci] = true;
            }
        }
        if !any {
            if let Some((first, hit)) = open.take() {
                close(first, row - 1, &hit, &mut intervals);
            }
        }
    }
    if let Some((first, hit)) = open.take() {
        close(first, table.len() - 1, &hit, &mut intervals);
    }

    let missing: usize = intervals.iter().map(|g| g.last_row - g.first_row + 1).sum();
    let coverage_fraction = if table.is_empty() || missing == 0 {
        1.0
    } else {
        (table.len() - missing) as f64 / table.len() as f64
    };
    Ok(GapReport {
        intervals,
        coverage_fraction,
    })
}

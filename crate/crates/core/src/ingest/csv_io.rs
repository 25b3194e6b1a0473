use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use super::table::{is_missing, TimeSeriesTable, MISSING};
use super::{IngestError, Result};

/// Maps file headers onto canonical column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    #[serde(default = "default_timestamp_column")]
    pub timestamp_column: String,
    /// Source header to canonical name. Unlisted headers keep their name
    /// unless `strict` is set, in which case they are rejected.
    #[serde(default)]
    pub columns: BTreeMap<String, String>,
    #[serde(default)]
    pub strict: bool,
}

fn default_timestamp_column() -> String {
    "timestamp".to_string()
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            timestamp_column: default_timestamp_column(),
            columns: BTreeMap::new(),
            strict: false,
        }
    }
}

impl CsvSchema {
    pub fn strict(columns: impl IntoIterator<Item = (String, String)>) -> Self {
        Self {
            columns: columns.into_iter().collect(),
            strict: true,
            ..Self::default()
        }
    }
}

pub fn parse_csv(path: impl AsRef<Path>, schema: &CsvSchema, cadence_s: u32) -> Result<TimeSeriesTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, schema, cadence_s)
}

/// Parses an ISO-8601 instant. Offsets are honored; naive stamps are UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc());
        }
    }
    None
}

fn parse_value(field: &str) -> Option<f64> {
    let f = field.trim();
    if f.is_empty() || f.eq_ignore_ascii_case("nan") {
        return Some(MISSING);
    }
    f.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema, cadence_s: u32) -> Result<TimeSeriesTable> {
    if cadence_s == 0 {
        return Err(IngestError::InvalidCadence);
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();

    let ts_idx = headers
        .iter()
        .position(|h| h.trim() == schema.timestamp_column)
        .ok_or_else(|| IngestError::MissingTimestampColumn(schema.timestamp_column.clone()))?;

    let mut names: Vec<(usize, String)> = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if i == ts_idx {
            continue;
        }
        let h = h.trim();
        let name = match schema.columns.get(h) {
            Some(canon) => canon.clone(),
            None if schema.strict => return Err(IngestError::UnknownColumn(h.to_string())),
            None => h.to_string(),
        };
        if names.iter().any(|(_, n)| *n == name) {
            return Err(IngestError::DuplicateColumn(name));
        }
        names.push((i, name));
    }

    let mut rows: Vec<(i64, u64, Vec<f64>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let raw_ts = rec.get(ts_idx).unwrap_or("");
        let ts = parse_timestamp(raw_ts).ok_or_else(|| IngestError::MalformedTimestamp {
            line,
            value: raw_ts.to_string(),
        })?;
        let mut values = Vec::with_capacity(names.len());
        for (i, name) in &names {
            let field = rec.get(*i).unwrap_or("");
            let v = parse_value(field).ok_or_else(|| IngestError::MalformedValue {
                line,
                column: name.clone(),
                value: field.to_string(),
            })?;
            values.push(v);
        }
        rows.push((ts.timestamp(), line, values));
    }

    rows.sort_by_key(|r| r.0);
    for pair in rows.windows(2) {
        if pair[0].0 == pair[1].0 {
            let line = pair[0].1.max(pair[1].1);
            return Err(IngestError::DuplicateTimestamp {
                line,
                timestamp: format_timestamp(pair[1].0),
            });
        }
    }

    let (start, len) = match (rows.first(), rows.last()) {
        (Some(first), Some(last)) => {
            let c = cadence_s as i64;
            for r in &rows {
                if (r.0 - first.0) % c != 0 {
                    return Err(IngestError::OffGrid {
                        line: r.1,
                        timestamp: format_timestamp(r.0),
                        cadence_s,
                    });
                }
            }
            (first.0, ((last.0 - first.0) / c) as usize + 1)
        }
        _ => (0, 0),
    };

    let mut cols = vec![vec![MISSING; len]; names.len()];
    for (ts, _, values) in rows {
        let row = ((ts - start) / cadence_s as i64) as usize;
        for (c, v) in values.into_iter().enumerate() {
            cols[c][row] = v;
        }
    }

    let mut table = TimeSeriesTable::new(start, cadence_s, len)?;
    for ((_, name), values) in names.into_iter().zip(cols) {
        table.add_column(name, values)?;
    }
    Ok(table)
}

pub fn format_timestamp(epoch: i64) -> String {
    DateTime::<Utc>::from_timestamp(epoch, 0)
        .map(|t| t.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_else(|| epoch.to_string())
}

/// Writes every grid row; missing entries become empty fields.
pub fn write_csv(table: &TimeSeriesTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_csv_to(table, std::io::BufWriter::new(file))
}

pub fn write_csv_to<W: Write>(table: &TimeSeriesTable, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let cols: Vec<(&str, &[f64])> = table.columns().collect();
    let mut header = vec!["timestamp"];
    header.extend(cols.iter().map(|(n, _)| *n));
    w.write_record(&header)?;
    let mut record: Vec<String> = Vec::with_capacity(cols.len() + 1);
    for row in 0..table.len() {
        record.clear();
        record.push(format_timestamp(table.epoch(row)));
        for (_, values) in &cols {
            let v = values[row];
            record.push(if is_missing(v) { String::new() } else { v.to_string() });
        }
        w.write_record(&record)?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: "<csv writer>".to_string(),
        source,
    })?;
    Ok(())
}

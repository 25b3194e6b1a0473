use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::gaps::GapReport;
use super::table::{is_missing, TimeSeriesTable};
use super::{IngestError, Result};
use crate::features::{clear_sky_index, CSI_EPS};
use crate::forecast::DecodeContext;

/// Ten-minute steps out to two hours.
pub fn default_horizons() -> Vec<u32> {
    (1..=12).map(|k| k * 600).collect()
}

/// How input/horizon blocks are cut from an engineered table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowSpec {
    /// Number of input time steps, including t0.
    pub input_len: usize,
    /// Spacing between input steps.
    pub spacing_s: u32,
    /// Forecast offsets after t0, strictly increasing.
    pub horizons_s: Vec<u32>,
    /// Spacing of candidate forecast times; candidates sit on multiples of
    /// this value in Unix time.
    pub stride_s: u32,
    pub feature_names: Vec<String>,
    pub target_column: String,
    pub clear_sky_column: String,
    pub cover_column: Option<String>,
    /// A window is admitted only if clear-sky GHI exceeds this at t0 and at
    /// every horizon. `None` disables the rule.
    pub daylight_min_ghi_cs: Option<f64>,
    pub csi_eps: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            input_len: 1,
            spacing_s: 600,
            horizons_s: default_horizons(),
            stride_s: 600,
            feature_names: Vec::new(),
            target_column: "ghi".to_string(),
            clear_sky_column: "ghi_cs".to_string(),
            cover_column: None,
            daylight_min_ghi_cs: Some(10.0),
            csi_eps: CSI_EPS,
        }
    }
}

impl WindowSpec {
    /// Seconds from the first input step to the last horizon.
    pub fn span_s(&self) -> u64 {
        (self.input_len.saturating_sub(1) as u64) * self.spacing_s as u64
            + self.horizons_s.last().copied().unwrap_or(0) as u64
    }

    fn validate(&self, cadence_s: u32) -> Result<()> {
        let bad = |m: String| Err(IngestError::InvalidSpec(m));
        if self.input_len == 0 {
            return bad("input_len must be at least 1".into());
        }
        if self.spacing_s == 0 || self.spacing_s % cadence_s != 0 {
            return bad(format!(
                "spacing {} s is not a positive multiple of the {} s cadence",
                self.spacing_s, cadence_s
            ));
        }
        if self.stride_s == 0 || self.stride_s % cadence_s != 0 {
            return bad(format!(
                "stride {} s is not a positive multiple of the {} s cadence",
                self.stride_s, cadence_s
            ));
        }
        if self.horizons_s.is_empty() {
            return bad("at least one horizon is required".into());
        }
        if self.horizons_s.windows(2).any(|w| w[0] >= w[1]) || self.horizons_s[0] == 0 {
            return bad("horizons must be positive and strictly increasing".into());
        }
        if let Some(h) = self.horizons_s.iter().find(|h| *h % cadence_s != 0) {
            return bad(format!("horizon {h} s is off the {cadence_s} s grid"));
        }
        Ok(())
    }
}

/// One sample: a `T x F` input block (time-major), the measured GHI at each
/// horizon and the context needed to decode a prediction back to GHI.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub t0: i64,
    pub inputs: Vec<f64>,
    pub target_ghi: Vec<f64>,
    pub context: DecodeContext,
    /// Cloud cover at t0 in percent, when a cover column is configured.
    pub cover: Option<f64>,
}

impl Window {
    pub fn t0_utc(&self) -> DateTime<Utc> {
        DateTime::from_timestamp(self.t0, 0).expect("epoch in range")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub windows: Vec<Window>,
    pub input_len: usize,
    pub input_spacing_s: u32,
    pub horizon_offsets: Vec<u32>,
    pub feature_names: Vec<String>,
}

impl WindowSet {
    pub fn empty_like(&self) -> WindowSet {
        WindowSet {
            windows: Vec::new(),
            input_len: self.input_len,
            input_spacing_s: self.input_spacing_s,
            horizon_offsets: self.horizon_offsets.clone(),
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn t0s(&self) -> Vec<i64> {
        self.windows.iter().map(|w| w.t0).collect()
    }

    pub fn filter(&self, mut keep: impl FnMut(&Window) -> bool) -> WindowSet {
        let mut out = self.empty_like();
        out.windows = self.windows.iter().filter(|w| keep(w)).cloned().collect();
        out
    }

    /// Windows with `start <= t0 < end` (Unix seconds).
    pub fn in_range(&self, start: i64, end: i64) -> WindowSet {
        self.filter(|w| w.t0 >= start && w.t0 < end)
    }

    pub fn restrict_to(&self, t0s: &BTreeSet<i64>) -> WindowSet {
        self.filter(|w| t0s.contains(&w.t0))
    }

    /// Keeps only the named features, in the given order.
    pub fn select_features(&self, names: &[String]) -> Result<WindowSet> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.feature_index(n).ok_or_else(|| IngestError::NoSuchColumn(n.clone())))
            .collect::<Result<_>>()?;
        let f = self.num_features();
        let mut out = self.empty_like();
        out.feature_names = names.to_vec();
        out.windows = self
            .windows
            .iter()
            .map(|w| {
                let mut win = w.clone();
                win.inputs = (0..self.input_len)
                    .flat_map(|t| idx.iter().map(move |&i| w.inputs[t * f + i]))
                    .collect();
                win
            })
            .collect();
        Ok(out)
    }
}

/// Cuts every admissible window out of `table`.
///
/// A candidate t0 is admitted when the whole span from the first input step
/// to the last horizon is free of gap intervals, every sampled value is
/// present, and the daylight rule holds at t0 and every horizon. Spans that
/// run past either end of the table are skipped.
pub fn build_windows(table: &TimeSeriesTable, gaps: &GapReport, spec: &WindowSpec) -> Result<WindowSet> {
    spec.validate(table.cadence_s())?;
    let cadence = table.cadence_s() as i64;
    let features: Vec<&[f64]> = spec
        .feature_names
        .iter()
        .map(|n| table.require(n))
        .collect::<Result<_>>()?;
    let target = table.require(&spec.target_column)?;
    let clear = table.require(&spec.clear_sky_column)?;
    let cover = spec.cover_column.as_deref().map(|c| table.require(c)).transpose()?;

    let step = spec.spacing_s as i64 / cadence;
    let lookback = (spec.input_len as i64 - 1) * step;
    let horizon_rows: Vec<usize> = spec.horizons_s.iter().map(|h| (*h as i64 / cadence) as usize).collect();
    let max_h = *horizon_rows.last().expect("validated non-empty");
    let f = features.len();
    let t_len = spec.input_len;

    let mut out = WindowSet {
        windows: Vec::new(),
        input_len: spec.input_len,
        input_spacing_s: spec.spacing_s,
        horizon_offsets: spec.horizons_s.clone(),
        feature_names: spec.feature_names.clone(),
    };
    if table.is_empty() {
        return Ok(out);
    }

    let stride = spec.stride_s as i64;
    let first_epoch = table.start_epoch() + lookback * cadence;
    // candidates sit on absolute multiples of the stride when the table is
    // aligned to its cadence, otherwise on the table's own phase
    let anchor = if table.start_epoch().rem_euclid(cadence) == 0 { 0 } else { table.start_epoch() };
    let mut t0 = anchor + (first_epoch - anchor).div_euclid(stride) * stride;
    if t0 < first_epoch {
        t0 += stride;
    }
    let last_row = table.len() - 1;

    while let Some(i) = table.row_of(t0) {
        let next = t0 + stride;
        if i + max_h > last_row {
            break;
        }
        let lo = i - lookback as usize;
        let hi = i + max_h;
        let admit = !gaps.overlaps_rows(lo, hi)
            && spec
                .daylight_min_ghi_cs
                .is_none_or(|min| clear[i] > min && horizon_rows.iter().all(|&h| clear[i + h] > min))
            && !is_missing(target[i])
            && !is_missing(clear[i])
            && horizon_rows
                .iter()
                .all(|&h| !is_missing(target[i + h]) && !is_missing(clear[i + h]))
            && cover.is_none_or(|c| !is_missing(c[i]));
        if admit {
            let mut inputs = Vec::with_capacity(t_len * f);
            let mut complete = true;
            'steps: for t in 0..t_len {
                let r = lo + t * step as usize;
                for col in &features {
                    let v = col[r];
                    if is_missing(v) {
                        complete = false;
                        break 'steps;
                    }
                    inputs.push(v);
                }
            }
            if complete {
                let ghi_0 = target[i];
                out.windows.push(Window {
                    t0,
                    inputs,
                    target_ghi: horizon_rows.iter().map(|&h| target[i + h]).collect(),
                    context: DecodeContext {
                        ghi_0,
                        csi_0: clear_sky_index(ghi_0, clear[i], spec.csi_eps),
                        ghi_cs_horizons: horizon_rows.iter().map(|&h| clear[i + h]).collect(),
                    },
                    cover: cover.map(|c| c[i]),
                });
            }
        }
        t0 = next;
    }
    Ok(out)
}

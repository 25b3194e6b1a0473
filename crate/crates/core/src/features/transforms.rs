use serde::{Deserialize, Serialize};

use crate::ingest::{is_missing, MISSING};

/// Clear-sky GHI below which the index is forced to zero.
pub const CSI_EPS: f64 = 10.0;
/// Upper clamp applied to the index.
pub const CSI_MAX: f64 = 2.0;

/// Guarded ratio of measured to clear-sky irradiance.
pub fn clear_sky_index(measured: f64, clear: f64, eps: f64) -> f64 {
    if is_missing(measured) || is_missing(clear) {
        return MISSING;
    }
    if clear < eps {
        return 0.0;
    }
    (measured / clear).clamp(0.0, CSI_MAX)
}

/// `out[i] = series[i - k]`, first `k` entries missing.
pub fn lagged(series: &[f64], k: usize) -> Vec<f64> {
    let n = series.len();
    let mut out = vec![MISSING; n];
    if k < n {
        out[k..].copy_from_slice(&series[..n - k]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RollingKind {
    Mean,
    Median,
    /// Population standard deviation.
    Std,
}

/// Trailing statistic over `[i - w + 1, i]`. Entries whose window is
/// incomplete or contains a missing value are missing.
pub fn rolling_stat(series: &[f64], w: usize, kind: RollingKind) -> Vec<f64> {
    assert!(w >= 2, "rolling window must span at least two samples");
    let n = series.len();
    let mut out = vec![MISSING; n];
    let mut buf: Vec<f64> = Vec::with_capacity(w);
    // count of missing entries inside the current window
    let mut missing = 0usize;
    for i in 0..n {
        if is_missing(series[i]) {
            missing += 1;
        }
        if i >= w && is_missing(series[i - w]) {
            missing -= 1;
        }
        if i + 1 < w || missing > 0 {
            continue;
        }
        let win = &series[i + 1 - w..=i];
        out[i] = match kind {
            RollingKind::Mean => win.iter().sum::<f64>() / w as f64,
            RollingKind::Std => {
                let mean = win.iter().sum::<f64>() / w as f64;
                (win.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w as f64).sqrt()
            }
            RollingKind::Median => {
                buf.clear();
                buf.extend_from_slice(win);
                buf.sort_by(f64::total_cmp);
                if w % 2 == 1 {
                    buf[w / 2]
                } else {
                    0.5 * (buf[w / 2 - 1] + buf[w / 2])
                }
            }
        };
    }
    out
}

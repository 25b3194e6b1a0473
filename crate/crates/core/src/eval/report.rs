use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{forecast_skill, mae, nmap, rmse};
use super::EvalError;

/// One forecast for one horizon at one t0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub t0: i64,
    pub horizon_min: u32,
    pub ghi_true: f64,
    pub ghi_pred: f64,
    pub ghi_poc: f64,
    pub cloud_cover_pct: Option<f64>,
}

/// Cloud-cover bounds in percent: clear below `clear_max`, overcast at or
/// above `overcast_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrataThresholds {
    pub clear_max: f64,
    pub overcast_min: f64,
}

impl Default for StrataThresholds {
    fn default() -> Self {
        Self {
            clear_max: 20.0,
            overcast_min: 80.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkyCondition {
    Clear,
    PartlyCloudy,
    Overcast,
}

impl SkyCondition {
    pub const ALL: [SkyCondition; 3] = [SkyCondition::Clear, SkyCondition::PartlyCloudy, SkyCondition::Overcast];

    pub fn classify(cover_pct: f64, th: &StrataThresholds) -> Self {
        if cover_pct < th.clear_max {
            SkyCondition::Clear
        } else if cover_pct < th.overcast_min {
            SkyCondition::PartlyCloudy
        } else {
            SkyCondition::Overcast
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SkyCondition::Clear => "clear",
            SkyCondition::PartlyCloudy => "partly_cloudy",
            SkyCondition::Overcast => "overcast",
        }
    }
}

pub const QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSummary {
    pub condition: SkyCondition,
    pub count: usize,
    /// Share of records with a known cover value.
    pub fraction: f64,
    pub mae: Option<f64>,
    pub poc_mae: Option<f64>,
    /// Absolute-error quantiles at [`QUANTILES`].
    pub abs_error_quantiles: Vec<f64>,
}

/// Splits records by cloud cover at t0. Records without a cover value are
/// left out of every stratum.
pub fn stratify(records: &[ForecastRecord], th: &StrataThresholds) -> Vec<StratumSummary> {
    let known: Vec<(&ForecastRecord, SkyCondition)> = records
        .iter()
        .filter_map(|r| r.cloud_cover_pct.map(|c| (r, SkyCondition::classify(c, th))))
        .collect();
    SkyCondition::ALL
        .iter()
        .map(|&cond| {
            let rs: Vec<&ForecastRecord> = known.iter().filter(|(_, c)| *c == cond).map(|(r, _)| *r).collect();
            let truth: Vec<f64> = rs.iter().map(|r| r.ghi_true).collect();
            let pred: Vec<f64> = rs.iter().map(|r| r.ghi_pred).collect();
            let poc: Vec<f64> = rs.iter().map(|r| r.ghi_poc).collect();
            let mut errs: Vec<f64> = rs.iter().map(|r| (r.ghi_true - r.ghi_pred).abs()).collect();
            errs.sort_by(f64::total_cmp);
            StratumSummary {
                condition: cond,
                count: rs.len(),
                fraction: if known.is_empty() {
                    0.0
                } else {
                    rs.len() as f64 / known.len() as f64
                },
                mae: mae(&truth, &pred).ok(),
                poc_mae: mae(&truth, &poc).ok(),
                abs_error_quantiles: QUANTILES.iter().map(|&q| quantile(&errs, q)).collect(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics {
    /// `None` for the aggregate row.
    pub horizon_min: Option<u32>,
    pub count: usize,
    pub mae: f64,
    pub rmse: f64,
    /// `None` when the mean true GHI is not positive.
    pub nmap: Option<f64>,
    pub poc_mae: f64,
    pub poc_rmse: f64,
    pub poc_nmap: Option<f64>,
    /// MAE-based skill over persistence of cloudiness.
    pub fss: Option<f64>,
    pub fss_rmse: Option<f64>,
}

fn metrics_for(horizon: Option<u32>, rs: &[&ForecastRecord]) -> Result<HorizonMetrics, EvalError> {
    let truth: Vec<f64> = rs.iter().map(|r| r.ghi_true).collect();
    let pred: Vec<f64> = rs.iter().map(|r| r.ghi_pred).collect();
    let poc: Vec<f64> = rs.iter().map(|r| r.ghi_poc).collect();
    let (m, p) = (mae(&truth, &pred)?, mae(&truth, &poc)?);
    let (rm, rp) = (rmse(&truth, &pred)?, rmse(&truth, &poc)?);
    Ok(HorizonMetrics {
        horizon_min: horizon,
        count: rs.len(),
        mae: m,
        rmse: rm,
        nmap: nmap(&truth, &pred).ok(),
        poc_mae: p,
        poc_rmse: rp,
        poc_nmap: nmap(&truth, &poc).ok(),
        fss: forecast_skill(m, p).ok(),
        fss_rmse: forecast_skill(rm, rp).ok(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_horizon: Vec<HorizonMetrics>,
    pub aggregate: HorizonMetrics,
    pub strata: Vec<StratumSummary>,
    pub thresholds: StrataThresholds,
    pub record_count: usize,
    /// Decoded values raised to zero before scoring.
    pub clamped: usize,
}

pub fn report(records: &[ForecastRecord], th: &StrataThresholds) -> Result<MetricsReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut by_h: BTreeMap<u32, Vec<&ForecastRecord>> = BTreeMap::new();
    for r in records {
        by_h.entry(r.horizon_min).or_default().push(r);
    }
    let per_horizon = by_h
        .iter()
        .map(|(h, rs)| metrics_for(Some(*h), rs))
        .collect::<Result<Vec<_>, _>>()?;
    let all: Vec<&ForecastRecord> = records.iter().collect();
    Ok(MetricsReport {
        per_horizon,
        aggregate: metrics_for(None, &all)?,
        strata: stratify(records, th),
        thresholds: *th,
        record_count: records.len(),
        clamped: 0,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> EvalError + '_ {
    move |e| EvalError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    }
}

/// Width of the true/predicted GHI bins in `error_density.csv`.
pub const DENSITY_BIN_W: f64 = 50.0;

/// Writes the report and plot data into `dir`:
/// `metrics.json`, `horizons.csv` (one row per horizon plus `all`),
/// `strata.csv`, `overlay.csv` (every record) and `error_density.csv`
/// (counts on a true-vs-predicted GHI grid).
pub fn write_report(report: &MetricsReport, records: &[ForecastRecord], dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();

    let p = dir.join("metrics.json");
    fs::write(&p, serde_json::to_string_pretty(report).expect("report serializes")).map_err(io_err(&p))?;
    written.push(p);

    let p = dir.join("horizons.csv");
    let mut w = csv::Writer::from_path(&p).map_err(csv_err(&p))?;
    w.write_record([
        "horizon_min", "count", "mae", "rmse", "nmap", "poc_mae", "poc_rmse", "poc_nmap", "fss", "fss_rmse",
    ])
    .map_err(csv_err(&p))?;
    for m in report.per_horizon.iter().chain(std::iter::once(&report.aggregate)) {
        w.write_record([
            m.horizon_min.map(|h| h.to_string()).unwrap_or_else(|| "all".into()),
            m.count.to_string(),
            m.mae.to_string(),
            m.rmse.to_string(),
            opt(m.nmap),
            m.poc_mae.to_string(),
            m.poc_rmse.to_string(),
            opt(m.poc_nmap),
            opt(m.fss),
            opt(m.fss_rmse),
        ])
        .map_err(csv_err(&p))?;
    }
    w.flush().map_err(io_err(&p))?;
    written.push(p);

    let p = dir.join("strata.csv");
    let mut w = csv::Writer::from_path(&p).map_err(csv_err(&p))?;
    w.write_record(["condition", "count", "fraction", "mae", "poc_mae", "q05", "q25", "q50", "q75", "q95"])
        .map_err(csv_err(&p))?;
    for s in &report.strata {
        let mut row = vec![
            s.condition.label().to_string(),
            s.count.to_string(),
            s.fraction.to_string(),
            opt(s.mae),
            opt(s.poc_mae),
        ];
        row.extend(s.abs_error_quantiles.iter().map(|q| if q.is_nan() { String::new() } else { q.to_string() }));
        w.write_record(&row).map_err(csv_err(&p))?;
    }
    w.flush().map_err(io_err(&p))?;
    written.push(p);

    let p = dir.join("overlay.csv");
    let mut w = csv::Writer::from_path(&p).map_err(csv_err(&p))?;
    w.write_record(["t0", "horizon_min", "ghi_true", "ghi_pred", "ghi_poc", "cloud_cover_pct"])
        .map_err(csv_err(&p))?;
    for r in records {
        w.write_record([
            crate::ingest::format_timestamp(r.t0),
            r.horizon_min.to_string(),
            r.ghi_true.to_string(),
            r.ghi_pred.to_string(),
            r.ghi_poc.to_string(),
            opt(r.cloud_cover_pct),
        ])
        .map_err(csv_err(&p))?;
    }
    w.flush().map_err(io_err(&p))?;
    written.push(p);

    let p = dir.join("error_density.csv");
    let mut grid: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    for r in records {
        let key = (
            (r.ghi_true / DENSITY_BIN_W).floor() as i64,
            (r.ghi_pred / DENSITY_BIN_W).floor() as i64,
        );
        *grid.entry(key).or_default() += 1;
    }
    let mut w = csv::Writer::from_path(&p).map_err(csv_err(&p))?;
    w.write_record(["true_bin_lo", "pred_bin_lo", "count"]).map_err(csv_err(&p))?;
    for ((t, q), n) in grid {
        w.write_record([
            (t as f64 * DENSITY_BIN_W).to_string(),
            (q as f64 * DENSITY_BIN_W).to_string(),
            n.to_string(),
        ])
        .map_err(csv_err(&p))?;
    }
    w.flush().map_err(io_err(&p))?;
    written.push(p);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(h: u32, t: f64, p: f64, poc: f64, cover: Option<f64>) -> ForecastRecord {
        ForecastRecord {
            t0: 0,
            horizon_min: h,
            ghi_true: t,
            ghi_pred: p,
            ghi_poc: poc,
            cloud_cover_pct: cover,
        }
    }

    #[test]
    fn strata_partition() {
        let th = StrataThresholds::default();
        let rs = vec![
            rec(10, 1.0, 1.0, 1.0, Some(10.0)),
            rec(10, 1.0, 1.0, 1.0, Some(50.0)),
            rec(10, 1.0, 1.0, 1.0, Some(90.0)),
        ];
        let s = stratify(&rs, &th);
        assert!(s.iter().all(|x| x.count == 1));
        assert!((s.iter().map(|x| x.fraction).sum::<f64>() - 1.0).abs() < 1e-15);
        let clear = stratify(&[rec(10, 1.0, 1.0, 1.0, Some(0.0))], &th);
        assert_eq!(clear[0].fraction, 1.0);
        assert_eq!(SkyCondition::classify(80.0, &th), SkyCondition::Overcast);
        assert_eq!(SkyCondition::classify(20.0, &th), SkyCondition::PartlyCloudy);
    }

    #[test]
    fn exact_and_self_skill() {
        let th = StrataThresholds::default();
        let exact: Vec<_> = (1..=12).map(|h| rec(h * 10, 500.0, 500.0, 450.0, None)).collect();
        let r = report(&exact, &th).unwrap();
        assert!(r.per_horizon.iter().all(|m| m.mae == 0.0 && m.fss == Some(1.0)));
        assert_eq!(r.per_horizon.len() + 1, 13);

        let poc: Vec<_> = (1..=12).map(|h| rec(h * 10, 500.0, 430.0, 430.0, None)).collect();
        let r = report(&poc, &th).unwrap();
        assert!(r.per_horizon.iter().all(|m| m.fss == Some(0.0)));
        assert!(report(&[], &th).is_err());
    }

    #[test]
    fn files_written() {
        let dir = tempfile::tempdir().unwrap();
        let rs: Vec<_> = (1..=12).map(|h| rec(h * 10, 500.0, 480.0, 450.0, Some(30.0))).collect();
        let r = report(&rs, &StrataThresholds::default()).unwrap();
        let files = write_report(&r, &rs, dir.path()).unwrap();
        assert_eq!(files.len(), 5);
        let horizons = fs::read_to_string(dir.path().join("horizons.csv")).unwrap();
        assert_eq!(horizons.lines().count(), 14);
    }
}

//! Synthetic sky generator with known ground truth.
//!
//! A two-state (clear/cloudy) Markov chain at minute cadence drives a
//! mean-reverting cloud cover. Cover maps to a clear-sky index through a
//! piecewise-linear attenuation with a deadband, lognormal jitter and an
//! optional persistent disturbance that is never emitted. The sky camera
//! column sees the latent cover `lead_min` minutes ahead, which makes it the
//! planted predictive feature. Every other emitted column is noise.

use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{IngestError, TimeSeriesTable, MISSING};
use crate::rng;
use crate::solar::{clear_sky, solar_position, SiteConfig, SiteError};

/// Upper bound on the emitted clear-sky index.
pub const ENHANCEMENT_CAP: f64 = 1.2;
pub const COVER_COLUMN: &str = "cdoc_total_cloud_cover";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    Config(String),
    #[error(transparent)]
    Site(#[from] SiteError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Clear,
    Cloudy,
}

/// Mean-reverting cover walk for one regime, in percent per minute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverProcess {
    pub mean: f64,
    pub reversion: f64,
    pub sigma: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distractor {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
}

impl Distractor {
    fn new(name: &str, mean: f64, sd: f64) -> Self {
        Self {
            name: name.to_string(),
            mean,
            sd,
        }
    }
}

/// Daily window in which the camera columns are missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraOutage {
    /// Minute of the UTC day the outage starts.
    pub start_minute_utc: u32,
    pub duration_min: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub site: SiteConfig,
    pub start_date: NaiveDate,
    pub n_days: u32,
    pub seed: u64,
    pub initial_regime: Regime,
    /// Per-minute probability of leaving the clear regime.
    pub p_clear_to_cloudy: f64,
    /// Per-minute probability of leaving the cloudy regime.
    pub p_cloudy_to_clear: f64,
    pub clear_cover: CoverProcess,
    pub cloudy_cover: CoverProcess,
    /// Cover at or below this leaves the sky fully clear (index exactly 1).
    pub deadband_pct: f64,
    /// Clear-sky index at 100 % cover.
    pub csi_overcast: f64,
    /// Log-scale sd of the per-minute multiplicative jitter.
    pub jitter_sigma: f64,
    /// Stationary log-scale sd of the unmeasured AR(1) disturbance.
    pub disturbance_amplitude: f64,
    /// AR(1) coefficient of the disturbance per minute.
    pub disturbance_phi: f64,
    /// How far ahead of the latent cover the camera column looks.
    pub lead_min: u32,
    /// Sd of the camera measurement error, percent.
    pub cover_noise_sd: f64,
    pub distractors: Vec<Distractor>,
    /// Also emit every other station and camera column as noise.
    pub full_schema: bool,
    pub camera_outage: Option<CameraOutage>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            site: SiteConfig::golden_co(),
            start_date: NaiveDate::from_ymd_opt(2021, 5, 1).expect("valid date"),
            n_days: 30,
            seed: 42,
            initial_regime: Regime::Clear,
            p_clear_to_cloudy: 1.0 / 150.0,
            p_cloudy_to_clear: 1.0 / 120.0,
            clear_cover: CoverProcess {
                mean: 3.0,
                reversion: 0.05,
                sigma: 1.5,
                min: 0.0,
                max: 10.0,
            },
            cloudy_cover: CoverProcess {
                mean: 65.0,
                reversion: 0.04,
                sigma: 5.0,
                min: 0.0,
                max: 100.0,
            },
            deadband_pct: 10.0,
            csi_overcast: 0.2,
            jitter_sigma: 0.03,
            disturbance_amplitude: 0.12,
            disturbance_phi: 0.98,
            lead_min: 30,
            cover_noise_sd: 3.0,
            distractors: vec![
                Distractor::new("station_pressure", 812.0, 3.0),
                Distractor::new("tower_dry_bulb_temp", 15.0, 8.0),
                Distractor::new("tower_relative_humidity", 40.0, 15.0),
                Distractor::new("avg_wind_speed_22ft", 3.0, 1.5),
                Distractor::new("broadband_turbidity", 0.1, 0.03),
            ],
            full_schema: false,
            camera_outage: None,
        }
    }
}

impl SynthConfig {
    /// Sky that stays clear for the whole run.
    pub fn all_clear(mut self) -> Self {
        self.initial_regime = Regime::Clear;
        self.p_clear_to_cloudy = 0.0;
        self.p_cloudy_to_clear = 0.0;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.site.validate()?;
        let bad = |m: String| Err(SynthError::Config(m));
        for (name, p) in [
            ("p_clear_to_cloudy", self.p_clear_to_cloudy),
            ("p_cloudy_to_clear", self.p_cloudy_to_clear),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if !(0.05..=0.3).contains(&self.csi_overcast) {
            return bad(format!("csi_overcast {} outside [0.05, 0.3]", self.csi_overcast));
        }
        if !(0.0..100.0).contains(&self.deadband_pct) {
            return bad(format!("deadband {} outside [0, 100)", self.deadband_pct));
        }
        if self.n_days == 0 {
            return bad("n_days must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.disturbance_phi) {
            return bad("disturbance_phi must lie in [0, 1)".into());
        }
        for p in [&self.clear_cover, &self.cloudy_cover] {
            if !(p.min <= p.max) || !(0.0..=1.0).contains(&p.reversion) {
                return bad(format!("invalid cover process {p:?}"));
            }
        }
        if self.jitter_sigma < 0.0 || self.disturbance_amplitude < 0.0 || self.cover_noise_sd < 0.0 {
            return bad("noise scales must be non-negative".into());
        }
        Ok(())
    }

    /// Index implied by cover alone.
    pub fn attenuation(&self, cover_pct: f64) -> f64 {
        if cover_pct <= self.deadband_pct {
            return 1.0;
        }
        let frac = ((cover_pct - self.deadband_pct) / (100.0 - self.deadband_pct)).min(1.0);
        1.0 - (1.0 - self.csi_overcast) * frac
    }
}

/// Latent state per minute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub start: i64,
    pub cadence_s: u32,
    pub regime: Vec<Regime>,
    pub cover: Vec<f64>,
    /// Log-scale disturbance (0 where it has no effect).
    pub disturbance: Vec<f64>,
    /// Clear-sky index applied to the clear-sky GHI.
    pub csi: Vec<f64>,
    pub lead_min: u32,
}

impl SynthTruth {
    pub fn len(&self) -> usize {
        self.cover.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cover.is_empty()
    }

    /// Sidecar CSV: `timestamp,regime,cover,disturbance,csi`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), SynthError> {
        let path = path.as_ref();
        let io = |e: std::io::Error| SynthError::Io {
            path: path.display().to_string(),
            source: e,
        };
        let mut w = csv::Writer::from_path(path).map_err(|e| io(std::io::Error::other(e)))?;
        let werr = |e: csv::Error| SynthError::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(e),
        };
        w.write_record(["timestamp", "regime", "cover", "disturbance", "csi"]).map_err(werr)?;
        for i in 0..self.len() {
            w.write_record([
                crate::ingest::format_timestamp(self.start + i as i64 * self.cadence_s as i64),
                match self.regime[i] {
                    Regime::Clear => "clear".into(),
                    Regime::Cloudy => "cloudy".into(),
                },
                self.cover[i].to_string(),
                self.disturbance[i].to_string(),
                self.csi[i].to_string(),
            ])
            .map_err(werr)?;
        }
        w.flush().map_err(io)
    }
}

fn normal(r: &mut impl Rng) -> f64 {
    r.sample(StandardNormal)
}

/// Station names from the shipped column table, for `full_schema`.
fn schema_columns() -> Vec<(String, String)> {
    let mut rdr = csv::Reader::from_reader(include_str!("../../manifests/columns.csv").as_bytes());
    rdr.records()
        .map(|r| r.expect("bundled column table parses"))
        .filter(|r| &r[2] == "bms" || &r[2] == "camera")
        .map(|r| (r[1].to_string(), r[2].to_string()))
        .collect()
}

pub fn generate(cfg: &SynthConfig) -> Result<(TimeSeriesTable, SynthTruth), SynthError> {
    cfg.validate()?;
    let n = cfg.n_days as usize * 1440;
    let start = cfg
        .start_date
        .and_hms_opt(0, 0, 0)
        .expect("midnight exists")
        .and_utc()
        .timestamp();

    // regime chain and latent cover
    let mut chain = rng::stream(cfg.seed, &[1]);
    let mut walk = rng::stream(cfg.seed, &[2]);
    let mut regime = Vec::with_capacity(n);
    let mut cover = Vec::with_capacity(n);
    let mut state = cfg.initial_regime;
    let mut c = match state {
        Regime::Clear => cfg.clear_cover.mean,
        Regime::Cloudy => cfg.cloudy_cover.mean,
    };
    for i in 0..n {
        if i > 0 {
            let u: f64 = chain.random();
            state = match state {
                Regime::Clear if u < cfg.p_clear_to_cloudy => Regime::Cloudy,
                Regime::Cloudy if u < cfg.p_cloudy_to_clear => Regime::Clear,
                s => s,
            };
        }
        let p = match state {
            Regime::Clear => &cfg.clear_cover,
            Regime::Cloudy => &cfg.cloudy_cover,
        };
        let eps = normal(&mut walk);
        if i > 0 {
            c += p.reversion * (p.mean - c) + p.sigma * eps;
        }
        c = c.clamp(p.min, p.max);
        regime.push(state);
        cover.push(c);
    }

    // clear-sky index
    let mut jit = rng::stream(cfg.seed, &[3]);
    let mut dist_rng = rng::stream(cfg.seed, &[4]);
    let innov = cfg.disturbance_amplitude * (1.0 - cfg.disturbance_phi * cfg.disturbance_phi).sqrt();
    let mut d = cfg.disturbance_amplitude * normal(&mut dist_rng);
    let mut disturbance = Vec::with_capacity(n);
    let mut csi = Vec::with_capacity(n);
    for (i, &c) in cover.iter().enumerate() {
        let j = cfg.jitter_sigma * normal(&mut jit);
        if i > 0 {
            d = cfg.disturbance_phi * d + innov * normal(&mut dist_rng);
        }
        if c <= cfg.deadband_pct {
            disturbance.push(0.0);
            csi.push(1.0);
        } else {
            disturbance.push(d);
            csi.push((cfg.attenuation(c) * (j + d).exp()).clamp(0.0, ENHANCEMENT_CAP));
        }
    }

    // irradiance
    let mut table = TimeSeriesTable::new(start, 60, n)?;
    let (mut ghi, mut dni, mut dhi) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (i, &k) in csi.iter().enumerate() {
        let t = table.timestamp(i);
        let pos = solar_position(t, &cfg.site);
        let cs = clear_sky(t, &cfg.site, cfg.site.turbidity.at(t));
        let g = k * cs.ghi_cs;
        let beam = ((k - cfg.csi_overcast) / (1.0 - cfg.csi_overcast)).clamp(0.0, 1.0);
        let b = beam * cs.dni_cs;
        let cos_z = pos.zenith.to_radians().cos().max(0.0);
        ghi.push(g);
        dni.push(b);
        dhi.push((g - cos_z * b).max(0.0));
    }
    table.add_column("ghi", ghi)?;
    table.add_column("dni", dni)?;
    table.add_column("dhi", dhi)?;

    // planted camera cover: latent cover lead_min ahead, plus noise
    let mut obs = rng::stream(cfg.seed, &[5]);
    let lead = cfg.lead_min as usize;
    let mut observed: Vec<f64> = (0..n)
        .map(|i| (cover[(i + lead).min(n - 1)] + cfg.cover_noise_sd * normal(&mut obs)).clamp(0.0, 100.0))
        .collect();

    let mut extra: Vec<(String, Vec<f64>)> = Vec::new();
    for (j, dcol) in cfg.distractors.iter().enumerate() {
        let mut r = rng::stream(cfg.seed, &[6, j as u64]);
        extra.push((dcol.name.clone(), (0..n).map(|_| dcol.mean + dcol.sd * normal(&mut r)).collect()));
    }
    let mut camera_extra: Vec<String> = Vec::new();
    if cfg.full_schema {
        let taken: Vec<&str> = ["ghi", "dni", "dhi", COVER_COLUMN]
            .into_iter()
            .chain(cfg.distractors.iter().map(|d| d.name.as_str()))
            .collect();
        for (k, (name, source)) in schema_columns().into_iter().enumerate() {
            if taken.contains(&name.as_str()) {
                continue;
            }
            let mut r = rng::stream(cfg.seed, &[7, k as u64]);
            let values = if name == "avg_wind_direction_22ft" {
                (0..n).map(|_| r.random_range(0.0..360.0)).collect()
            } else {
                (0..n).map(|_| normal(&mut r)).collect()
            };
            if source == "camera" {
                camera_extra.push(name.clone());
            }
            extra.push((name, values));
        }
    }

    if let Some(o) = &cfg.camera_outage {
        for day in 0..cfg.n_days as usize {
            let from = day * 1440 + o.start_minute_utc as usize;
            let to = (from + o.duration_min as usize).min(n);
            for i in from.min(n)..to {
                observed[i] = MISSING;
                for (name, v) in extra.iter_mut() {
                    if camera_extra.contains(name) {
                        v[i] = MISSING;
                    }
                }
            }
        }
    }
    table.add_column(COVER_COLUMN, observed)?;
    for (name, v) in extra {
        table.add_column(name, v)?;
    }

    let truth = SynthTruth {
        start,
        cadence_s: 60,
        regime,
        cover,
        disturbance,
        csi,
        lead_min: cfg.lead_min,
    };
    Ok((table, truth))
}

/// Quantities acceptance checks compare against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSummary {
    pub clear_fraction: f64,
    pub cloudy_fraction: f64,
    /// Gaussian mutual-information proxy, `-0.5 ln(1 - r^2)` nats, between
    /// the observed cover and the latent index `lead_min` ahead.
    pub planted_mi_proxy: f64,
    pub planted_correlation: f64,
    pub disturbance_variance: f64,
    pub mean_csi: f64,
}

pub fn describe_truth(truth: &SynthTruth, observed_cover: &[f64]) -> TruthSummary {
    let n = truth.len().max(1) as f64;
    let clear = truth.regime.iter().filter(|r| **r == Regime::Clear).count() as f64 / n;
    let lead = truth.lead_min as usize;
    let pairs: Vec<(f64, f64)> = (0..truth.len().saturating_sub(lead))
        .filter(|&i| i < observed_cover.len() && observed_cover[i].is_finite())
        .map(|i| (observed_cover[i], truth.csi[i + lead]))
        .collect();
    let r = pearson(&pairs);
    let mean_d = truth.disturbance.iter().sum::<f64>() / n;
    TruthSummary {
        clear_fraction: clear,
        cloudy_fraction: 1.0 - clear,
        planted_mi_proxy: if r.abs() < 1.0 { -0.5 * (1.0 - r * r).ln() } else { f64::INFINITY },
        planted_correlation: r,
        disturbance_variance: truth.disturbance.iter().map(|d| (d - mean_d).powi(2)).sum::<f64>() / n,
        mean_csi: truth.csi.iter().sum::<f64>() / n,
    }
}

fn pearson(pairs: &[(f64, f64)]) -> f64 {
    if pairs.len() < 2 {
        return 0.0;
    }
    let n = pairs.len() as f64;
    let (mx, my) = (
        pairs.iter().map(|p| p.0).sum::<f64>() / n,
        pairs.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Writes `data.csv` and `truth.csv` into `dir`.
pub fn write_dataset(table: &TimeSeriesTable, truth: &SynthTruth, dir: &Path) -> Result<(), SynthError> {
    fs::create_dir_all(dir).map_err(|source| SynthError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    crate::ingest::write_csv(table, dir.join("data.csv"))?;
    truth.write_csv(dir.join("truth.csv"))
}

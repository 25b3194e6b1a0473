use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{io_error, ExperimentConfig, ExperimentError, Result};
use crate::eval::{mae, ForecastRecord};
use chrono::DateTime;

use crate::features::{clear_sky_index, engineer, FeatureSpec, Normalization};
use crate::forecast::{decode_to_ghi, encode_target, poc_forecast, DecodeContext, Decoded, TargetRepresentation};
use crate::ingest::{
    build_windows, detect_gaps, format_timestamp, is_missing, parse_csv, GapReport, TimeSeriesTable, Window,
    WindowSet, MISSING,
};
use crate::solar::clear_sky;
use crate::nn::{fit, FitReport, Network, Sample};
use crate::solar::augment_with_clear_sky;
use crate::synth;

pub const MODEL_FORMAT: &str = "skycast-model";
const MODEL_VERSION: u32 = 1;

/// Station CSV from the config, or the synthetic generator when no path is
/// set.
pub fn load_raw(cfg: &ExperimentConfig) -> Result<TimeSeriesTable> {
    match cfg.data_path() {
        Some(p) => Ok(parse_csv(&p, &cfg.data.schema, cfg.data.cadence_s)?),
        None => Ok(synth::generate(&cfg.synth_config())?.0),
    }
}

/// An engineered table with its gap report.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub table: TimeSeriesTable,
    pub gaps: GapReport,
    pub feature_names: Vec<String>,
    pub specs: Vec<FeatureSpec>,
}

/// Clear-sky augmentation, feature engineering and gap detection over the
/// emitted features, target and clear-sky columns.
pub fn prepare(cfg: &ExperimentConfig, raw: &TimeSeriesTable) -> Result<Prepared> {
    cfg.site.validate()?;
    let manifest = cfg.features.resolve(cfg.base_dir.as_deref())?;
    let augmented = augment_with_clear_sky(raw, &cfg.site, cfg.data.eclipse_shading)?;
    let table = engineer(&augmented, &manifest.features, &cfg.site)?;
    let feature_names = manifest.emitted_names();
    if feature_names.is_empty() {
        return Err(ExperimentError::Config("the feature manifest emits no features".into()));
    }
    let mut required = feature_names.clone();
    for c in [&cfg.windows.target_column, &cfg.windows.clear_sky_column] {
        if !required.contains(c) {
            required.push(c.clone());
        }
    }
    let gaps = detect_gaps(&table, &required)?;
    Ok(Prepared {
        table,
        gaps,
        feature_names,
        specs: manifest.features,
    })
}

/// Windows of length `input_len` over every emitted feature. Windows whose
/// target cannot be encoded in every representation are dropped so the
/// admitted set does not depend on the representation.
pub fn build_model_windows(prep: &Prepared, cfg: &ExperimentConfig, input_len: usize) -> Result<WindowSet> {
    let mut spec = cfg.windows.clone();
    spec.feature_names = prep.feature_names.clone();
    spec.input_len = input_len;
    if spec.cover_column.as_deref().is_some_and(|c| !prep.table.has_column(c)) {
        log::warn!("cover column {:?} not in data; strata will be empty", spec.cover_column);
        spec.cover_column = None;
    }
    let ws = build_windows(&prep.table, &prep.gaps, &spec)?;
    let ws = ws.filter(|w| {
        TargetRepresentation::ALL
            .iter()
            .all(|k| encode_target(*k, &w.target_ghi, &w.context).is_ok())
    });
    if ws.is_empty() {
        return Err(ExperimentError::Data(format!(
            "no admissible windows: {} of {} rows fall in {} gap intervals (coverage {:.1}%)",
            prep.gaps.missing_rows(),
            prep.table.len(),
            prep.gaps.intervals.len(),
            100.0 * prep.gaps.coverage_fraction
        )));
    }
    Ok(ws)
}

/// A window at `t0` for an operational forecast. Only the inputs must be
/// present; clear-sky GHI at the horizons comes from the solar model, so
/// the horizons may lie past the end of the data. Unobserved targets are
/// `MISSING`.
pub fn forecast_window(prep: &Prepared, cfg: &ExperimentConfig, meta: &ModelMeta, t0: i64) -> Result<Window> {
    let table = &prep.table;
    let i = table
        .row_of(t0)
        .ok_or_else(|| ExperimentError::Data(format!("{} is not a row of the data", format_timestamp(t0))))?;
    let step = meta.spacing_s as usize / table.cadence_s() as usize;
    let lookback = (meta.input_len - 1) * step;
    if i < lookback {
        return Err(ExperimentError::Data(format!(
            "{} has less than {} s of history",
            format_timestamp(t0),
            lookback * table.cadence_s() as usize
        )));
    }
    let cols: Vec<&[f64]> = meta.feature_names.iter().map(|n| table.require(n)).collect::<std::result::Result<_, _>>()?;
    let mut inputs = Vec::with_capacity(meta.input_len * cols.len());
    for t in 0..meta.input_len {
        let r = i - lookback + t * step;
        for (c, name) in cols.iter().zip(&meta.feature_names) {
            if is_missing(c[r]) {
                return Err(ExperimentError::Data(format!(
                    "input {name} is missing at {}",
                    format_timestamp(table.epoch(r))
                )));
            }
            inputs.push(c[r]);
        }
    }
    let ghi = table.require(&cfg.windows.target_column)?;
    let cs = table.require(&cfg.windows.clear_sky_column)?;
    let ghi_cs_horizons: Vec<f64> = meta
        .horizons_s
        .iter()
        .map(|h| {
            let t = DateTime::from_timestamp(t0 + *h as i64, 0).expect("epoch in range");
            clear_sky(t, &cfg.site, cfg.site.turbidity.at(t)).ghi_cs
        })
        .collect();
    let target_ghi = meta
        .horizons_s
        .iter()
        .map(|h| table.row_of(t0 + *h as i64).map_or(MISSING, |r| ghi[r]))
        .collect();
    Ok(Window {
        t0,
        inputs,
        target_ghi,
        context: DecodeContext {
            ghi_0: ghi[i],
            csi_0: clear_sky_index(ghi[i], cs[i], cfg.windows.csi_eps),
            ghi_cs_horizons,
        },
        cover: cfg
            .windows
            .cover_column
            .as_deref()
            .and_then(|c| table.column(c))
            .map(|c| c[i]),
    })
}

/// Per-horizon z-score of encoded targets, fitted on training windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl TargetScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let width = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mean: Vec<f64> = (0..width).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale = (0..width)
            .map(|j| {
                let s = (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.mean).zip(&self.scale).map(|((x, m), s)| (x - m) / s).collect()
    }

    pub fn invert(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.mean).zip(&self.scale).map(|((x, m), s)| x * s + m).collect()
    }
}

/// Everything besides the network needed to turn a window into a forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub representation: TargetRepresentation,
    pub feature_names: Vec<String>,
    pub input_len: usize,
    pub spacing_s: u32,
    pub horizons_s: Vec<u32>,
    pub normalization: Normalization,
    pub scaler: TargetScaler,
    pub best_epoch: usize,
    pub best_val_mae: f64,
    pub train_windows: usize,
    pub validate_windows: usize,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub network: Network,
    pub meta: ModelMeta,
    /// Present right after training; not persisted.
    pub fit: Option<FitReport>,
}

fn normalized(norm: &Normalization, w: &Window) -> Vec<f64> {
    let mut x = w.inputs.clone();
    norm.apply(&mut x);
    x
}

fn decode(
    net: &Network,
    scaler: &TargetScaler,
    kind: TargetRepresentation,
    x: &[f64],
    w: &Window,
) -> Result<Decoded> {
    let raw = net.predict(x)?;
    Ok(decode_to_ghi(kind, &scaler.invert(&raw), &w.context))
}

fn decoded_mae(
    net: &Network,
    scaler: &TargetScaler,
    kind: TargetRepresentation,
    xs: &[Vec<f64>],
    windows: &[Window],
) -> Result<f64> {
    let mut truth = Vec::with_capacity(windows.len() * 12);
    let mut pred = Vec::with_capacity(windows.len() * 12);
    for (x, w) in xs.iter().zip(windows) {
        pred.extend(decode(net, scaler, kind, x, w)?.ghi);
        truth.extend_from_slice(&w.target_ghi);
    }
    Ok(mae(&truth, &pred)?)
}

/// Fits a network on `train` with early stopping on the decoded-GHI MAE of
/// `validate`, using the config's target representation.
pub fn train_model(cfg: &ExperimentConfig, train: &WindowSet, validate: &WindowSet) -> Result<TrainedModel> {
    let kind = cfg.target_representation;
    if train.is_empty() {
        return Err(ExperimentError::Data("the training range contains no windows".into()));
    }
    if validate.is_empty() {
        return Err(ExperimentError::Data("the validation range contains no windows".into()));
    }
    let f = train.num_features();
    let all_rows: Vec<f64> = train.windows.iter().flat_map(|w| w.inputs.iter().copied()).collect();
    let normalization = Normalization::fit(train.feature_names.clone(), &all_rows);

    let encoded: Vec<Vec<f64>> = train
        .windows
        .iter()
        .map(|w| encode_target(kind, &w.target_ghi, &w.context))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| ExperimentError::Data(format!("target encoding: {e}")))?;
    let scaler = TargetScaler::fit(&encoded);
    let targets: Vec<Vec<f64>> = encoded.iter().map(|t| scaler.apply(t)).collect();
    let inputs: Vec<Vec<f64>> = train.windows.iter().map(|w| normalized(&normalization, w)).collect();
    let samples: Vec<Sample> = inputs
        .iter()
        .zip(&targets)
        .map(|(x, y)| Sample { inputs: x, target: y })
        .collect();
    let val_inputs: Vec<Vec<f64>> = validate.windows.iter().map(|w| normalized(&normalization, w)).collect();

    let mut netcfg = cfg.network.clone();
    netcfg.input_features = f;
    netcfg.seq_len = train.input_len;
    netcfg.output_len = train.horizon_offsets.len();
    let mut net = Network::init(netcfg, cfg.network_seed())?;
    let report = fit(&mut net, &samples, &cfg.train_config(), |n| {
        decoded_mae(n, &scaler, kind, &val_inputs, &validate.windows).unwrap_or(f64::NAN)
    })?;
    if !report.best_val_mae.is_finite() {
        return Err(ExperimentError::Numerical(
            "validation error never became finite; training diverged".into(),
        ));
    }
    Ok(TrainedModel {
        network: net,
        meta: ModelMeta {
            representation: kind,
            feature_names: train.feature_names.clone(),
            input_len: train.input_len,
            spacing_s: train.input_spacing_s,
            horizons_s: train.horizon_offsets.clone(),
            normalization,
            scaler,
            best_epoch: report.best_epoch,
            best_val_mae: report.best_val_mae,
            train_windows: train.len(),
            validate_windows: validate.len(),
        },
        fit: Some(report),
    })
}

/// One record per window and horizon from a prediction per window.
pub fn records_from(ws: &WindowSet, predictions: &[Vec<f64>]) -> Vec<ForecastRecord> {
    let mut out = Vec::with_capacity(ws.len() * ws.horizon_offsets.len());
    for (w, p) in ws.windows.iter().zip(predictions) {
        let poc = poc_forecast(&w.context);
        for (h, off) in ws.horizon_offsets.iter().enumerate() {
            out.push(ForecastRecord {
                t0: w.t0,
                horizon_min: off / 60,
                ghi_true: w.target_ghi[h],
                ghi_pred: p[h],
                ghi_poc: poc[h],
                cloud_cover_pct: w.cover,
            });
        }
    }
    out
}

/// Records where the baseline is also the prediction.
pub fn poc_records(ws: &WindowSet) -> Vec<ForecastRecord> {
    let preds: Vec<Vec<f64>> = ws.windows.iter().map(|w| poc_forecast(&w.context)).collect();
    records_from(ws, &preds)
}

impl TrainedModel {
    fn check_windows(&self, ws: &WindowSet) -> Result<()> {
        if ws.feature_names != self.meta.feature_names
            || ws.input_len != self.meta.input_len
            || ws.horizon_offsets != self.meta.horizons_s
        {
            return Err(ExperimentError::Config(
                "windows do not match the model's features, input length or horizons".into(),
            ));
        }
        Ok(())
    }

    /// Forecast from raw (unnormalized) `T x F` inputs.
    pub fn predict_inputs(&self, inputs: &[f64], w: &Window) -> Result<Decoded> {
        let mut x = inputs.to_vec();
        self.meta.normalization.apply(&mut x);
        decode(&self.network, &self.meta.scaler, self.meta.representation, &x, w)
    }

    pub fn predict(&self, w: &Window) -> Result<Decoded> {
        self.predict_inputs(&w.inputs, w)
    }

    /// Decoded GHI per window, plus how many values were clamped at zero.
    pub fn predict_all(&self, ws: &WindowSet) -> Result<(Vec<Vec<f64>>, usize)> {
        self.check_windows(ws)?;
        let mut clamped = 0;
        let preds = ws
            .windows
            .iter()
            .map(|w| {
                let d = self.predict(w)?;
                clamped += d.clamped;
                Ok(d.ghi)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((preds, clamped))
    }

    pub fn records(&self, ws: &WindowSet) -> Result<(Vec<ForecastRecord>, usize)> {
        let (preds, clamped) = self.predict_all(ws)?;
        Ok((records_from(ws, &preds), clamped))
    }

    /// Decoded-GHI MAE over every window and horizon.
    pub fn mae(&self, ws: &WindowSet) -> Result<f64> {
        self.check_windows(ws)?;
        let xs: Vec<Vec<f64>> = ws.windows.iter().map(|w| normalized(&self.meta.normalization, w)).collect();
        decoded_mae(&self.network, &self.meta.scaler, self.meta.representation, &xs, &ws.windows)
    }

    /// Hex SHA-256 of the parameter bytes.
    pub fn params_digest(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.network.params {
            h.update(p.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "meta": self.meta,
            "network": crate::nn::checkpoint_json(&self.network),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_json()).expect("model serializes");
        std::fs::write(path, text).map_err(io_error(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_error(path))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| ExperimentError::Data(format!("{}: not a model file ({e})", path.display())))?;
        if value.get("format").and_then(|f| f.as_str()) != Some(MODEL_FORMAT) {
            return Err(ExperimentError::Data(format!("{}: not a model file", path.display())));
        }
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
        if version != MODEL_VERSION as u64 {
            return Err(ExperimentError::Data(format!(
                "{}: model version {version} is not supported (this build reads {MODEL_VERSION})",
                path.display()
            )));
        }
        let meta: ModelMeta = serde_json::from_value(value["meta"].clone())
            .map_err(|e| ExperimentError::Data(format!("{}: bad model metadata ({e})", path.display())))?;
        let network = crate::nn::checkpoint_from_json(value["network"].clone(), None)?;
        if network.config.input_features != meta.feature_names.len() || network.config.seq_len != meta.input_len {
            return Err(ExperimentError::Data(format!(
                "{}: network shape disagrees with its metadata",
                path.display()
            )));
        }
        Ok(Self {
            network,
            meta,
            fit: None,
        })
    }
}

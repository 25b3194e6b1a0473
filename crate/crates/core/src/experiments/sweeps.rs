use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::config::config_hash;
use super::importance::{permutation_importance, ImportanceReport};
use super::pipeline::{build_model_windows, prepare, train_model, TrainedModel};
use super::splits::SplitPlan;
use super::{io_error, ExperimentConfig, ExperimentError, Result};
use crate::eval::{forecast_skill, mae};
use crate::features::TimeRepresentation;
use crate::forecast::{poc_forecast, TargetRepresentation};
use crate::ingest::{TimeSeriesTable, WindowSet};

/// Outcome of one sweep cell. A failed cell carries `error` and no MAE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub label: String,
    pub params: BTreeMap<String, String>,
    pub config_hash: String,
    pub seed: u64,
    /// 1-based split step.
    pub step: usize,
    pub val_mae: Option<f64>,
    pub poc_mae: Option<f64>,
    pub fss: Option<f64>,
    pub best_epoch: Option<usize>,
    pub train_windows: usize,
    pub validate_windows: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub procedure: String,
    pub cells: Vec<CellResult>,
}

impl SweepResult {
    pub fn get(&self, label: &str) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.label == label)
    }

    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }

    /// One row per cell with its parameters as leading columns.
    pub fn to_tsv(&self) -> String {
        let keys: Vec<&String> = self.cells.first().map(|c| c.params.keys().collect()).unwrap_or_default();
        let mut s = String::from("label");
        for k in &keys {
            s.push('\t');
            s.push_str(k);
        }
        s.push_str("\tstep\tval_mae\tpoc_mae\tfss\tbest_epoch\ttrain_windows\tvalidate_windows\tseed\tconfig_hash\terror\n");
        let o = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.cells {
            s.push_str(&c.label);
            for k in &keys {
                s.push('\t');
                s.push_str(c.params.get(*k).map(String::as_str).unwrap_or(""));
            }
            s.push_str(&format!(
                "\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                c.step,
                o(c.val_mae),
                o(c.poc_mae),
                o(c.fss),
                c.best_epoch.map(|e| e.to_string()).unwrap_or_default(),
                c.train_windows,
                c.validate_windows,
                c.seed,
                c.config_hash,
                c.error.as_deref().unwrap_or("").replace(['\t', '\n'], " ")
            ));
        }
        s
    }

    /// Pivot of `val_mae` with one row per value of `row_key` and one column
    /// per value of `col_key`, in first-seen order.
    pub fn pivot(&self, row_key: &str, col_key: &str) -> String {
        let mut rows: Vec<String> = Vec::new();
        let mut cols: Vec<String> = Vec::new();
        let mut cells = BTreeMap::new();
        for c in &self.cells {
            let r = c.params.get(row_key).cloned().unwrap_or_default();
            let k = c.params.get(col_key).cloned().unwrap_or_default();
            if !rows.contains(&r) {
                rows.push(r.clone());
            }
            if !cols.contains(&k) {
                cols.push(k.clone());
            }
            cells.insert((r, k), c.val_mae);
        }
        let mut s = format!("{row_key}\\{col_key}");
        for k in &cols {
            s.push('\t');
            s.push_str(k);
        }
        s.push('\n');
        for r in &rows {
            s.push_str(r);
            for k in &cols {
                s.push('\t');
                if let Some(Some(v)) = cells.get(&(r.clone(), k.clone())) {
                    s.push_str(&format!("{v:.4}"));
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(io_error(dir))?;
        let tsv = dir.join(format!("{}.tsv", self.procedure));
        std::fs::write(&tsv, self.to_tsv()).map_err(io_error(&tsv))?;
        let json = dir.join(format!("{}.json", self.procedure));
        std::fs::write(&json, serde_json::to_string_pretty(self).expect("serializable")).map_err(io_error(&json))?;
        Ok(vec![tsv, json])
    }
}

fn cell_path(dir: &Path, hash: &str) -> PathBuf {
    dir.join(format!("{hash}.json"))
}

/// Runs `jobs` on up to `workers` threads. With a cache directory, a job
/// whose result file already exists is not rerun, and each finished job is
/// written there at once (through a temporary file and a rename, so an
/// interrupted run never leaves a partial result). Results come back in job
/// order.
pub fn run_cells<J: Sync>(
    jobs: &[J],
    workers: usize,
    cache: Option<&Path>,
    hash: impl Fn(&J) -> String + Sync,
    run: impl Fn(&J, &str) -> CellResult + Sync,
) -> Result<Vec<CellResult>> {
    if let Some(dir) = cache {
        std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    }
    let results: Mutex<Vec<Option<CellResult>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let failure: Mutex<Option<ExperimentError>> = Mutex::new(None);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        if i >= jobs.len() {
            break;
        }
        let h = hash(&jobs[i]);
        let cached = cache.and_then(|d| {
            let text = std::fs::read_to_string(cell_path(d, &h)).ok()?;
            serde_json::from_str::<CellResult>(&text).ok()
        });
        let r = match cached {
            Some(r) => {
                log::info!("cell {} reused from cache", r.label);
                r
            }
            None => {
                let r = run(&jobs[i], &h);
                log::info!("cell {} finished: val_mae {:?}", r.label, r.val_mae);
                if let Some(d) = cache {
                    let p = cell_path(d, &h);
                    let tmp = d.join(format!(".{h}.tmp"));
                    let text = serde_json::to_string_pretty(&r).expect("serializable");
                    if let Err(e) = std::fs::write(&tmp, text).and_then(|_| std::fs::rename(&tmp, &p)) {
                        failure.lock().unwrap().get_or_insert(io_error(&p)(e));
                    }
                }
                r
            }
        };
        results.lock().unwrap()[i] = Some(r);
    };
    let workers = workers.clamp(1, jobs.len().max(1));
    if workers == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(&work);
            }
        });
    }
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Ok(results.into_inner().unwrap().into_iter().map(|r| r.expect("every job ran")).collect())
}

/// Trains one cell and scores it on `validate`. Errors become a failed
/// cell rather than aborting the sweep.
fn train_cell(
    cfg: &ExperimentConfig,
    train: &WindowSet,
    validate: &WindowSet,
    label: String,
    params: BTreeMap<String, String>,
    hash: &str,
    step: usize,
) -> CellResult {
    let mut out = CellResult {
        label,
        params,
        config_hash: hash.to_string(),
        seed: cfg.seed,
        step: step + 1,
        val_mae: None,
        poc_mae: None,
        fss: None,
        best_epoch: None,
        train_windows: train.len(),
        validate_windows: validate.len(),
        error: None,
    };
    let scored = (|| -> Result<(TrainedModel, f64, f64)> {
        let model = train_model(cfg, train, validate)?;
        let m = model.mae(validate)?;
        let truth: Vec<f64> = validate.windows.iter().flat_map(|w| w.target_ghi.clone()).collect();
        let poc: Vec<f64> = validate.windows.iter().flat_map(|w| poc_forecast(&w.context)).collect();
        let p = mae(&truth, &poc)?;
        Ok((model, m, p))
    })();
    match scored {
        Ok((model, m, p)) => {
            out.val_mae = Some(m);
            out.poc_mae = Some(p);
            out.fss = forecast_skill(m, p).ok();
            out.best_epoch = Some(model.meta.best_epoch);
        }
        Err(e) => {
            log::warn!("cell {} failed: {e}", out.label);
            out.error = Some(e.to_string());
        }
    }
    out
}

/// Worker count does not change results, so it is left out of cell hashes.
fn hashable(cfg: &ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig { workers: 0, ..cfg.clone() }
}

fn cell_hash(procedure: &str, cfg: &ExperimentConfig, step: usize) -> String {
    config_hash(&serde_json::json!({ "procedure": procedure, "config": hashable(cfg), "step": step }))
}

fn common_t0s(sets: &[&WindowSet]) -> BTreeSet<i64> {
    let mut it = sets.iter();
    let mut common: BTreeSet<i64> = it.next().map(|s| s.t0s().into_iter().collect()).unwrap_or_default();
    for s in it {
        let t: BTreeSet<i64> = s.t0s().into_iter().collect();
        common = common.intersection(&t).copied().collect();
    }
    common
}

fn cells_dir(out: Option<&Path>, procedure: &str) -> Option<PathBuf> {
    out.map(|d| d.join("cells").join(procedure))
}

/// Representation grid for one split step. Every cell is validated on the
/// same forecast times.
pub fn sweep_representations(
    cfg: &ExperimentConfig,
    raw: &TimeSeriesTable,
    plan: &SplitPlan,
    out: Option<&Path>,
) -> Result<SweepResult> {
    let ex = &cfg.experiments;
    let rows: Vec<(TimeRepresentation, TargetRepresentation)> = if ex.rows.is_empty() {
        ex.time_reps
            .iter()
            .flat_map(|t| ex.irr_reps.iter().map(move |i| (*t, *i)))
            .collect()
    } else {
        ex.rows.clone()
    };
    if rows.is_empty() {
        return Err(ExperimentError::Config("the representation sweep has no cells".into()));
    }
    let si = ex.representation_step;
    let step = plan.step(si)?;
    let mut time_reps: Vec<TimeRepresentation> = Vec::new();
    for (t, _) in &rows {
        if !time_reps.contains(t) {
            time_reps.push(*t);
        }
    }
    let mut data: BTreeMap<String, (ExperimentConfig, WindowSet, WindowSet)> = BTreeMap::new();
    for t in &time_reps {
        let mut c = cfg.clone();
        c.features.time_representation = Some(*t);
        let prep = prepare(&c, raw)?;
        let ws = build_model_windows(&prep, &c, c.windows.input_len)?;
        data.insert(t.label().to_string(), (c, step.train(&ws), step.validate(&ws)));
    }
    let common = common_t0s(&data.values().map(|d| &d.2).collect::<Vec<_>>());
    for d in data.values_mut() {
        d.2 = d.2.restrict_to(&common);
    }
    let jobs: Vec<(ExperimentConfig, &WindowSet, &WindowSet, TimeRepresentation, TargetRepresentation)> = rows
        .iter()
        .map(|(t, i)| {
            let d = &data[t.label()];
            let mut c = d.0.clone();
            c.target_representation = *i;
            (c, &d.1, &d.2, *t, *i)
        })
        .collect();
    let procedure = "representation";
    let cells = run_cells(
        &jobs,
        cfg.workers,
        cells_dir(out, procedure).as_deref(),
        |j| cell_hash(procedure, &j.0, si),
        |j, h| {
            let params = BTreeMap::from([
                ("time".to_string(), j.3.label().to_string()),
                ("irradiance".to_string(), j.4.name().to_string()),
            ]);
            train_cell(&j.0, j.1, j.2, format!("{} + {}", j.3.label(), j.4.name()), params, h, si)
        },
    )?;
    Ok(SweepResult {
        procedure: procedure.into(),
        cells,
    })
}

/// One cell per input length, all validated on the forecast times admitted
/// for every length.
pub fn sweep_sequence_length(
    cfg: &ExperimentConfig,
    raw: &TimeSeriesTable,
    plan: &SplitPlan,
    out: Option<&Path>,
) -> Result<SweepResult> {
    let lengths = &cfg.experiments.sequence_lengths;
    if lengths.is_empty() {
        return Err(ExperimentError::Config("the sequence-length sweep has no lengths".into()));
    }
    if let Some(t) = lengths.iter().find(|t| !(1..=13).contains(*t)) {
        return Err(ExperimentError::Config(format!("sequence length {t} is outside 1..=13")));
    }
    let si = cfg.experiments.sequence_step;
    let step = plan.step(si)?;
    let prep = prepare(cfg, raw)?;
    let mut sets = Vec::new();
    for &t in lengths {
        let ws = build_model_windows(&prep, cfg, t)?;
        sets.push((t, step.train(&ws), step.validate(&ws)));
    }
    let common = common_t0s(&sets.iter().map(|s| &s.2).collect::<Vec<_>>());
    let jobs: Vec<(ExperimentConfig, usize, WindowSet, WindowSet)> = sets
        .into_iter()
        .map(|(t, tr, va)| {
            let mut c = cfg.clone();
            c.windows.input_len = t;
            (c, t, tr, va.restrict_to(&common))
        })
        .collect();
    let procedure = "sequence_length";
    let cells = run_cells(
        &jobs,
        cfg.workers,
        cells_dir(out, procedure).as_deref(),
        |j| cell_hash(procedure, &j.0, si),
        |j, h| {
            let params = BTreeMap::from([
                ("input_len".to_string(), j.1.to_string()),
                ("lookback_min".to_string(), ((j.1 - 1) as u32 * j.0.windows.spacing_s / 60).to_string()),
            ]);
            train_cell(&j.0, &j.2, &j.3, format!("T={}", j.1), params, h, si)
        },
    )?;
    Ok(SweepResult {
        procedure: procedure.into(),
        cells,
    })
}

/// Trains on the importance step and permutes each input feature over its
/// validation windows.
pub fn run_importance(
    cfg: &ExperimentConfig,
    raw: &TimeSeriesTable,
    plan: &SplitPlan,
) -> Result<(TrainedModel, WindowSet, ImportanceReport)> {
    let step = plan.step(cfg.experiments.importance_step)?;
    let prep = prepare(cfg, raw)?;
    let ws = build_model_windows(&prep, cfg, cfg.windows.input_len)?;
    let (train, validate) = (step.train(&ws), step.validate(&ws));
    let model = train_model(cfg, &train, &validate)?;
    let seed = crate::rng::derive_seed(cfg.seed, &[0x1a]);
    let report = permutation_importance(
        &model,
        &validate,
        &prep.feature_names,
        cfg.experiments.importance_repetitions,
        seed,
    )?;
    Ok((model, validate, report))
}

/// One noise-ablation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub features: String,
    pub noise: bool,
    pub step: usize,
}

/// Noise on/off crossed with all features/the reduced set, for every split
/// step. With a zero-width noise channel the on and off runs coincide.
pub fn noise_ablation(
    cfg: &ExperimentConfig,
    raw: &TimeSeriesTable,
    plan: &SplitPlan,
    top_features: &[String],
    out: Option<&Path>,
) -> Result<SweepResult> {
    if top_features.is_empty() {
        return Err(ExperimentError::Config("the reduced feature set is empty".into()));
    }
    let prep = prepare(cfg, raw)?;
    if let Some(f) = top_features.iter().find(|f| !prep.feature_names.contains(f)) {
        return Err(ExperimentError::Config(format!("reduced-set feature {f:?} is not in the manifest")));
    }
    let ws = build_model_windows(&prep, cfg, cfg.windows.input_len)?;
    let top_ws = ws.select_features(top_features)?;
    let sets = [(format!("all ({})", prep.feature_names.len()), &ws), (format!("top {}", top_features.len()), &top_ws)];
    let mut split_sets = Vec::new();
    for (si, step) in plan.steps.iter().enumerate() {
        for (name, set) in &sets {
            split_sets.push((si, name.clone(), step.train(set), step.validate(set)));
        }
    }
    let mut jobs = Vec::new();
    for (k, (si, name, _, _)) in split_sets.iter().enumerate() {
        for noise in [false, true] {
            let mut c = cfg.clone();
            if !noise {
                c.network.noise_width = 0;
            }
            if name.starts_with("top") {
                c.features.select = top_features.to_vec();
            }
            jobs.push((c, k, noise, *si, name.clone()));
        }
    }
    let procedure = "noise_ablation";
    let cells = run_cells(
        &jobs,
        cfg.workers,
        cells_dir(out, procedure).as_deref(),
        |j| {
            config_hash(&serde_json::json!({
                "procedure": procedure, "config": hashable(&j.0), "step": j.3, "noise": j.2, "features": j.4,
            }))
        },
        |j, h| {
            let (_, _, train, validate) = &split_sets[j.1];
            let noise = if j.2 { "noise" } else { "no noise" };
            let params = BTreeMap::from([
                ("model".to_string(), format!("{} / {noise}", j.4)),
                ("step".to_string(), format!("step {}", j.3 + 1)),
                ("features".to_string(), j.4.clone()),
                ("noise".to_string(), j.2.to_string()),
            ]);
            train_cell(&j.0, train, validate, format!("{} / {noise} / step {}", j.4, j.3 + 1), params, h, j.3)
        },
    )?;
    Ok(SweepResult {
        procedure: procedure.into(),
        cells,
    })
}

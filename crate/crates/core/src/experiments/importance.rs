use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::pipeline::TrainedModel;
use super::{ExperimentError, Result};
use crate::eval::mae;
use crate::ingest::WindowSet;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    /// Mean over repetitions of corrupted minus baseline MAE, W/m².
    pub delta_mae: f64,
    /// Sample standard deviation over repetitions (0 for one repetition).
    pub delta_sd: f64,
    pub deltas: Vec<f64>,
}

impl ImportanceEntry {
    /// Standard error of `delta_mae`.
    pub fn delta_se(&self) -> f64 {
        self.delta_sd / (self.deltas.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub baseline_mae: f64,
    pub repetitions: usize,
    pub seed: u64,
    /// Sorted by `delta_mae`, largest first.
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceReport {
    /// 1-based rank of `feature`.
    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.feature == feature).map(|i| i + 1)
    }

    pub fn get(&self, feature: &str) -> Option<&ImportanceEntry> {
        self.entries.iter().find(|e| e.feature == feature)
    }

    pub fn top(&self, k: usize) -> Vec<String> {
        self.entries.iter().take(k).map(|e| e.feature.clone()).collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("rank\tfeature\tdelta_mae\tdelta_sd\n");
        for (i, e) in self.entries.iter().enumerate() {
            s.push_str(&format!("{}\t{}\t{}\t{}\n", i + 1, e.feature, e.delta_mae, e.delta_sd));
        }
        s
    }
}

/// Permutation importance over `ws`. For each feature and repetition the
/// feature's whole input block is reassigned across windows by a seeded
/// permutation; repetition `r` uses the same permutation for every feature.
/// The model is only read.
pub fn permutation_importance(
    model: &TrainedModel,
    ws: &WindowSet,
    features: &[String],
    repetitions: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    if repetitions == 0 {
        return Err(ExperimentError::Config("importance needs at least one repetition".into()));
    }
    let names = &model.meta.feature_names;
    let cols: Vec<usize> = features
        .iter()
        .map(|f| {
            names
                .iter()
                .position(|n| n == f)
                .ok_or_else(|| ExperimentError::Config(format!("feature {f:?} is not a model input")))
        })
        .collect::<Result<_>>()?;
    let baseline_mae = model.mae(ws)?;
    let f = names.len();
    let t_len = model.meta.input_len;
    let truth: Vec<f64> = ws.windows.iter().flat_map(|w| w.target_ghi.iter().copied()).collect();

    let perms: Vec<Vec<usize>> = (0..repetitions)
        .map(|r| {
            let mut p: Vec<usize> = (0..ws.len()).collect();
            p.shuffle(&mut rng::stream(seed, &[0x1a, r as u64]));
            p
        })
        .collect();

    let mut entries = Vec::with_capacity(cols.len());
    for (name, &j) in features.iter().zip(&cols) {
        let mut deltas = Vec::with_capacity(repetitions);
        for perm in &perms {
            let mut pred = Vec::with_capacity(truth.len());
            for (i, w) in ws.windows.iter().enumerate() {
                let donor = &ws.windows[perm[i]].inputs;
                let mut x = w.inputs.clone();
                for t in 0..t_len {
                    x[t * f + j] = donor[t * f + j];
                }
                pred.extend(model.predict_inputs(&x, w)?.ghi);
            }
            deltas.push(mae(&truth, &pred)? - baseline_mae);
        }
        let n = deltas.len() as f64;
        let mean = deltas.iter().sum::<f64>() / n;
        let sd = if deltas.len() > 1 {
            (deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        entries.push(ImportanceEntry {
            feature: name.clone(),
            delta_mae: mean,
            delta_sd: sd,
            deltas,
        });
    }
    entries.sort_by(|a, b| b.delta_mae.total_cmp(&a.delta_mae).then_with(|| a.feature.cmp(&b.feature)));
    Ok(ImportanceReport {
        baseline_mae,
        repetitions,
        seed,
        entries,
    })
}

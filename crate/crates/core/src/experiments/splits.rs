use serde::{Deserialize, Serialize};

use super::config::SplitConfig;
use super::{ExperimentError, Result};
use crate::ingest::{format_timestamp, parse_timestamp, WindowSet};

const DAY_S: i64 = 86_400;

/// One train/validate step. Ranges are half-open `[start, end)` in Unix
/// seconds and refer to window forecast times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStep {
    pub description: String,
    pub train_start: i64,
    pub train_end: i64,
    pub validate_start: i64,
    pub validate_end: i64,
    pub train_windows: Option<usize>,
    pub validate_windows: Option<usize>,
}

impl SplitStep {
    pub fn train(&self, ws: &WindowSet) -> WindowSet {
        ws.in_range(self.train_start, self.train_end)
    }

    pub fn validate(&self, ws: &WindowSet) -> WindowSet {
        ws.in_range(self.validate_start, self.validate_end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub steps: Vec<SplitStep>,
}

impl SplitPlan {
    /// Fills the per-range window counts from `ws`.
    pub fn count(&mut self, ws: &WindowSet) {
        for s in &mut self.steps {
            s.train_windows = Some(s.train(ws).len());
            s.validate_windows = Some(s.validate(ws).len());
        }
    }

    pub fn step(&self, i: usize) -> Result<&SplitStep> {
        self.steps
            .get(i)
            .ok_or_else(|| ExperimentError::Config(format!("split step {} requested, plan has {}", i + 1, self.steps.len())))
    }

    /// Tab-separated summary with one row per step.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("step\ttrain_start\ttrain_end\tvalidate_end\ttrain_windows\tvalidate_windows\tdescription\n");
        for (i, st) in self.steps.iter().enumerate() {
            let c = |v: Option<usize>| v.map(|n| n.to_string()).unwrap_or_default();
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                i + 1,
                format_timestamp(st.train_start),
                format_timestamp(st.train_end),
                format_timestamp(st.validate_end),
                c(st.train_windows),
                c(st.validate_windows),
                st.description
            ));
        }
        s
    }
}

fn instant(s: &str) -> Result<i64> {
    parse_timestamp(s)
        .map(|t| t.timestamp())
        .ok_or_else(|| ExperimentError::Config(format!("split date {s:?} is not an ISO-8601 instant")))
}

/// Builds the rolling plan for data covering `[data_start, data_end)`.
///
/// Rolling steps start at the UTC midnight on or after `data_start`; step
/// `i` trains on the first `initial + i * validate` days and validates on
/// the following `validate` days.
pub fn make_splits(cfg: &SplitConfig, data_start: i64, data_end: i64) -> Result<SplitPlan> {
    let available_days = (data_end - data_start).max(0) as f64 / DAY_S as f64;
    let steps = if cfg.steps.is_empty() {
        if cfg.num_steps == 0 || cfg.validate_days == 0 || cfg.initial_train_days == 0 {
            return Err(ExperimentError::Config(
                "rolling splits need positive initial_train_days, validate_days and num_steps".into(),
            ));
        }
        let origin = data_start.div_euclid(DAY_S) * DAY_S;
        let origin = if origin < data_start { origin + DAY_S } else { origin };
        let needed_end = origin + DAY_S * (cfg.initial_train_days + cfg.num_steps * cfg.validate_days) as i64;
        if needed_end > data_end {
            return Err(ExperimentError::Shortfall {
                needed_days: (needed_end - data_start) as f64 / DAY_S as f64,
                available_days,
            });
        }
        (0..cfg.num_steps as i64)
            .map(|i| {
                let train_days = cfg.initial_train_days as i64 + i * cfg.validate_days as i64;
                let train_end = origin + train_days * DAY_S;
                let v = cfg.validate_days as i64;
                SplitStep {
                    description: format!(
                        "train days 1-{train_days}, validate days {}-{}",
                        train_days + 1,
                        train_days + v
                    ),
                    train_start: origin,
                    train_end,
                    validate_start: train_end,
                    validate_end: train_end + v * DAY_S,
                    train_windows: None,
                    validate_windows: None,
                }
            })
            .collect()
    } else {
        let mut out = Vec::new();
        for st in &cfg.steps {
            let (a, b, c) = (instant(&st.train_start)?, instant(&st.train_end)?, instant(&st.validate_end)?);
            if !(a < b && b < c) {
                return Err(ExperimentError::Config(format!(
                    "split {:?}: dates must satisfy train_start < train_end < validate_end",
                    st.description
                )));
            }
            if a < data_start || c > data_end {
                let needed = (c.max(data_end) - a.min(data_start)) as f64 / DAY_S as f64;
                return Err(ExperimentError::Shortfall {
                    needed_days: needed,
                    available_days,
                });
            }
            out.push(SplitStep {
                description: st.description.clone(),
                train_start: a,
                train_end: b,
                validate_start: b,
                validate_end: c,
                train_windows: None,
                validate_windows: None,
            });
        }
        out
    };
    Ok(SplitPlan { steps })
}

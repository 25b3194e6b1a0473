use std::collections::HashMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::spec::{Axis, CyclicPart, FeatureSpec, FlagKind, Milestone, Transform};
use super::time::{cyclic_encode, time_milestones, time_of_day, time_of_year};
use super::transforms::{clear_sky_index, lagged, rolling_stat};
use super::FeatureError;
use crate::ingest::{is_missing, TimeSeriesTable, MISSING};
use crate::solar::{solar_date, sun_events, SiteConfig, SunCycle};

/// Orders specs so every spec follows the specs it reads from.
fn dependency_order(table: &TimeSeriesTable, specs: &[FeatureSpec]) -> Result<Vec<usize>, FeatureError> {
    let mut by_name: HashMap<&str, usize> = HashMap::new();
    for (i, s) in specs.iter().enumerate() {
        if by_name.insert(s.name.as_str(), i).is_some() {
            return Err(FeatureError::DuplicateName(s.name.clone()));
        }
        s.validate()?;
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; specs.len()];
    let mut order = Vec::with_capacity(specs.len());

    fn visit(
        i: usize,
        specs: &[FeatureSpec],
        by_name: &HashMap<&str, usize>,
        table: &TimeSeriesTable,
        state: &mut [u8],
        order: &mut Vec<usize>,
    ) -> Result<(), FeatureError> {
        match state[i] {
            2 => return Ok(()),
            1 => return Err(FeatureError::Cycle(specs[i].name.clone())),
            _ => {}
        }
        state[i] = 1;
        for input in &specs[i].inputs {
            match by_name.get(input.as_str()) {
                // a raw spec reading its own name refers to the table column
                Some(&j) if j == i => {
                    if !table.has_column(input) {
                        return Err(FeatureError::UnknownInput {
                            spec: specs[i].name.clone(),
                            input: input.clone(),
                        });
                    }
                }
                Some(&j) => visit(j, specs, by_name, table, state, order)?,
                None if table.has_column(input) => {}
                None => {
                    return Err(FeatureError::UnknownInput {
                        spec: specs[i].name.clone(),
                        input: input.clone(),
                    })
                }
            }
        }
        state[i] = 2;
        order.push(i);
        Ok(())
    }

    for i in 0..specs.len() {
        visit(i, specs, &by_name, table, &mut state, &mut order)?;
    }
    Ok(order)
}

/// Per-row sun cycle, cached by solar date.
struct SunCache<'a> {
    site: &'a SiteConfig,
    days: HashMap<NaiveDate, SunCycle>,
}

impl<'a> SunCache<'a> {
    fn get(&mut self, t: chrono::DateTime<chrono::Utc>) -> SunCycle {
        let date = solar_date(t, self.site);
        let site = self.site;
        *self.days.entry(date).or_insert_with(|| sun_events(date, site))
    }
}

fn map1(a: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
    a.iter().map(|&x| if is_missing(x) { MISSING } else { f(x) }).collect()
}

fn map2(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| if is_missing(x) || is_missing(y) { MISSING } else { f(x, y) })
        .collect()
}

/// Computes every spec as a new column of a copy of `table`. Emitted and
/// helper specs are both added; raw specs naming a table column are no-ops.
pub fn engineer(table: &TimeSeriesTable, specs: &[FeatureSpec], site: &SiteConfig) -> Result<TimeSeriesTable, FeatureError> {
    let order = dependency_order(table, specs)?;
    let mut out = table.clone();
    let mut sun = SunCache {
        site,
        days: HashMap::new(),
    };
    let n = table.len();
    for i in order {
        let spec = &specs[i];
        let input = |k: usize| -> &[f64] { out.column(&spec.inputs[k]).expect("dependency resolved") };
        let values: Vec<f64> = match &spec.transform {
            Transform::Raw => {
                if spec.inputs[0] == spec.name {
                    continue;
                }
                input(0).to_vec()
            }
            Transform::Tod => (0..n).map(|r| time_of_day(table.timestamp(r))).collect(),
            Transform::Toy => (0..n).map(|r| time_of_year(table.timestamp(r))).collect(),
            Transform::Tm { milestone } => {
                let idx = match milestone {
                    Milestone::Sunrise => 0,
                    Milestone::SolarNoon => 1,
                    Milestone::Sunset => 2,
                };
                (0..n)
                    .map(|r| {
                        let t = table.timestamp(r);
                        match sun.get(t) {
                            SunCycle::Normal(ev) => time_milestones(t, &ev)[idx],
                            // no sunrise that day: the offsets are undefined
                            _ => MISSING,
                        }
                    })
                    .collect()
            }
            Transform::Cyclic { period, part, literal } => {
                let (period, literal, part) = (*period, *literal, *part);
                map1(input(0), |x| {
                    let (s, c) = if literal { (x.sin(), x.cos()) } else { cyclic_encode(x, period) };
                    match part {
                        CyclicPart::Sin => s,
                        CyclicPart::Cos => c,
                    }
                })
            }
            Transform::Csi { eps } => {
                let eps = *eps;
                map2(input(0), input(1), |m, c| clear_sky_index(m, c, eps))
            }
            Transform::CsDev => map2(input(0), input(1), |m, c| c - m),
            Transform::Lag { k } => lagged(input(0), *k),
            Transform::RollMean { .. } | Transform::RollMedian { .. } | Transform::RollStd { .. } => {
                let (w, kind) = spec.transform.rolling().expect("rolling kind");
                rolling_stat(input(0), w, kind)
            }
            Transform::WindComponents { component } => {
                let component = *component;
                map2(input(0), input(1), |speed, dir| {
                    let d = dir.to_radians();
                    match component {
                        Axis::NorthSouth => speed * d.cos(),
                        Axis::EastWest => speed * d.sin(),
                    }
                })
            }
            Transform::Flag { flag: FlagKind::Day } => map1(input(0), |e| f64::from(u8::from(e > 0.0))),
            Transform::Flag {
                flag: FlagKind::BeforeSolarNoon,
            } => (0..n)
                .map(|r| {
                    let t = table.timestamp(r);
                    f64::from(u8::from(t < sun.get(t).solar_noon()))
                })
                .collect(),
            Transform::CosZenith => map1(input(0), |z| z.to_radians().cos()),
            Transform::CosNormal => map2(input(0), input(1), |z, dni| z.to_radians().cos() * dni),
            Transform::SunPosition { axis } => {
                let axis = *axis;
                map2(input(0), input(1), |az, el| {
                    let (a, e) = (az.to_radians(), el.to_radians());
                    match axis {
                        Axis::NorthSouth => a.cos() * e.cos(),
                        Axis::EastWest => a.sin() * e.cos(),
                    }
                })
            }
            Transform::Constant { value } => vec![*value; n],
        };
        out.set_column(spec.name.clone(), values)?;
    }
    Ok(out)
}

/// Per-feature z-score parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    /// Population standard deviation, or 1 where the feature is constant.
    pub scale: Vec<f64>,
}

impl Normalization {
    pub fn identity(feature_names: Vec<String>) -> Self {
        let f = feature_names.len();
        Self {
            feature_names,
            mean: vec![0.0; f],
            scale: vec![1.0; f],
        }
    }

    /// Fits on row-major rows of width `feature_names.len()`.
    pub fn fit(feature_names: Vec<String>, rows: &[f64]) -> Self {
        let f = feature_names.len();
        if f == 0 || rows.is_empty() {
            return Self::identity(feature_names);
        }
        let n = rows.len() / f;
        let mut mean = vec![0.0; f];
        for r in rows.chunks_exact(f) {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; f];
        for r in rows.chunks_exact(f) {
            for j in 0..f {
                var[j] += (r[j] - mean[j]).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let s = (v / n as f64).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self {
            feature_names,
            mean,
            scale,
        }
    }

    pub fn apply(&self, rows: &mut [f64]) {
        let f = self.mean.len();
        if f == 0 {
            return;
        }
        for r in rows.chunks_exact_mut(f) {
            for j in 0..f {
                r[j] = (r[j] - self.mean[j]) / self.scale[j];
            }
        }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }
}

/// Fully observed feature rows ready for modelling.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    pub timestamps: Vec<i64>,
    /// Row-major, `timestamps.len() * feature_names.len()`.
    pub rows: Vec<f64>,
    pub normalization: Normalization,
    /// Timestamps of rows dropped for a missing engineered value.
    pub excluded: Vec<i64>,
}

impl FeatureMatrix {
    pub fn num_rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let f = self.num_features();
        &self.rows[i * f..(i + 1) * f]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.num_rows()).map(|i| self.row(i)[j]).collect()
    }
}

/// Engineers `specs` on `table` and gathers the emitted columns, in spec
/// order. With a 0-column spec list every row is kept.
///
/// `normalize` fits z-scores on the retained rows; pass the training rows
/// only and reuse [`FeatureMatrix::normalization`] for other splits.
pub fn assemble(
    table: &TimeSeriesTable,
    specs: &[FeatureSpec],
    site: &SiteConfig,
    normalize: bool,
) -> Result<FeatureMatrix, FeatureError> {
    let engineered = engineer(table, specs, site)?;
    let names: Vec<String> = specs.iter().filter(|s| s.emit).map(|s| s.name.clone()).collect();
    let cols: Vec<&[f64]> = names
        .iter()
        .map(|n| engineered.column(n).expect("engineered column"))
        .collect();
    let mut rows = Vec::with_capacity(table.len() * names.len());
    let mut timestamps = Vec::with_capacity(table.len());
    let mut excluded = Vec::new();
    for r in 0..table.len() {
        if cols.iter().any(|c| is_missing(c[r])) {
            excluded.push(table.epoch(r));
            continue;
        }
        timestamps.push(table.epoch(r));
        rows.extend(cols.iter().map(|c| c[r]));
    }
    let normalization = if normalize {
        Normalization::fit(names.clone(), &rows)
    } else {
        Normalization::identity(names.clone())
    };
    normalization.apply(&mut rows);
    Ok(FeatureMatrix {
        feature_names: names,
        timestamps,
        rows,
        normalization,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solar::augment_with_clear_sky;

    fn table(n: usize) -> TimeSeriesTable {
        let mut t = TimeSeriesTable::new(1_600_000_020, 60, n).unwrap();
        t.add_column("a", (0..n).map(|i| i as f64).collect()).unwrap();
        t.add_column("b", (0..n).map(|i| (i as f64).sin()).collect()).unwrap();
        t
    }

    #[test]
    fn cycle_rejected() {
        let specs = vec![
            FeatureSpec::new("x", &["y"], Transform::Lag { k: 1 }),
            FeatureSpec::new("y", &["x"], Transform::Lag { k: 1 }),
        ];
        let site = SiteConfig::golden_co();
        assert!(matches!(engineer(&table(5), &specs, &site), Err(FeatureError::Cycle(_))));
    }

    #[test]
    fn unknown_input_rejected() {
        let specs = vec![FeatureSpec::new("x", &["nope"], Transform::Lag { k: 1 })];
        let site = SiteConfig::golden_co();
        assert!(matches!(
            engineer(&table(5), &specs, &site),
            Err(FeatureError::UnknownInput { .. })
        ));
    }

    #[test]
    fn dependencies_resolve_out_of_order() {
        let specs = vec![
            FeatureSpec::new("lag_of_dev", &["dev"], Transform::Lag { k: 2 }),
            FeatureSpec::new("dev", &["a", "b"], Transform::CsDev),
        ];
        let t = engineer(&table(6), &specs, &SiteConfig::golden_co()).unwrap();
        let lag = t.column("lag_of_dev").unwrap();
        let dev = t.column("dev").unwrap();
        assert_eq!(lag[4], dev[2]);
    }

    #[test]
    fn empty_specs_keep_every_row() {
        let m = assemble(&table(7), &[], &SiteConfig::golden_co(), true).unwrap();
        assert_eq!(m.num_features(), 0);
        assert_eq!(m.num_rows(), 7);
    }

    #[test]
    fn zscore_is_standard_on_fit_rows() {
        let specs = vec![FeatureSpec::raw("a"), FeatureSpec::raw("b")];
        let m = assemble(&table(500), &specs, &SiteConfig::golden_co(), true).unwrap();
        for j in 0..2 {
            let c = m.column(j);
            let mean = c.iter().sum::<f64>() / c.len() as f64;
            let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c.len() as f64;
            assert!(mean.abs() < 1e-9 && (var.sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rows_with_missing_values_reported() {
        let specs = vec![FeatureSpec::new("l", &["a"], Transform::Lag { k: 3 })];
        let t = table(10);
        let m = assemble(&t, &specs, &SiteConfig::golden_co(), false).unwrap();
        assert_eq!(m.num_rows(), 7);
        assert_eq!(m.excluded, (0..3).map(|r| t.epoch(r)).collect::<Vec<_>>());
        assert_eq!(m.row(0), &[0.0]);
    }

    #[test]
    fn csi_of_clear_sky_is_one() {
        let site = SiteConfig::golden_co();
        let start = chrono::DateTime::parse_from_rfc3339("2021-06-01T12:00:00Z").unwrap().timestamp();
        let base = TimeSeriesTable::new(start, 60, 600).unwrap();
        let mut t = augment_with_clear_sky(&base, &site, 1.0).unwrap();
        let cs = t.column("ghi_cs").unwrap().to_vec();
        t.add_column("ghi", cs.clone()).unwrap();
        let specs = vec![FeatureSpec::new("csi", &["ghi", "ghi_cs"], Transform::Csi { eps: 10.0 })];
        let out = engineer(&t, &specs, &site).unwrap();
        for (c, v) in cs.iter().zip(out.column("csi").unwrap()) {
            if *c >= 10.0 {
                assert!((v - 1.0).abs() < 1e-9);
            }
        }
    }
}

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::transforms::{RollingKind, CSI_EPS};
use super::FeatureError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Milestone {
    Sunrise,
    SolarNoon,
    Sunset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CyclicPart {
    Sin,
    Cos,
}

/// North-south or east-west projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    NorthSouth,
    EastWest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagKind {
    /// 1 while the sun is above the horizon; input: elevation in degrees.
    Day,
    /// 1 before local solar noon.
    BeforeSolarNoon,
}

fn default_eps() -> f64 {
    CSI_EPS
}

/// A named column transform. Inputs are table columns or the outputs of
/// other specs in the same set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    /// Copy of one input column.
    Raw,
    Tod,
    Toy,
    Tm {
        milestone: Milestone,
    },
    /// `sin`/`cos` of the input on a cycle of `period`. With `literal` the
    /// input is passed to `sin`/`cos` unscaled.
    Cyclic {
        period: f64,
        part: CyclicPart,
        #[serde(default)]
        literal: bool,
    },
    /// inputs: measured, clear-sky.
    Csi {
        #[serde(default = "default_eps")]
        eps: f64,
    },
    /// Clear-sky minus measured; inputs: measured, clear-sky.
    CsDev,
    Lag {
        k: usize,
    },
    RollMean {
        w: usize,
    },
    RollMedian {
        w: usize,
    },
    RollStd {
        w: usize,
    },
    /// inputs: speed, direction in degrees from north.
    WindComponents {
        component: Axis,
    },
    Flag {
        flag: FlagKind,
    },
    /// input: zenith in degrees.
    CosZenith,
    /// `cos(zenith) * DNI`; inputs: zenith, DNI.
    CosNormal,
    /// Unit sun vector projected on the ground plane; inputs: azimuth,
    /// elevation.
    SunPosition {
        axis: Axis,
    },
    Constant {
        value: f64,
    },
}

impl Transform {
    fn arity(&self) -> usize {
        match self {
            Transform::Tod
            | Transform::Toy
            | Transform::Tm { .. }
            | Transform::Constant { .. }
            | Transform::Flag {
                flag: FlagKind::BeforeSolarNoon,
            } => 0,
            Transform::Raw
            | Transform::Cyclic { .. }
            | Transform::Lag { .. }
            | Transform::RollMean { .. }
            | Transform::RollMedian { .. }
            | Transform::RollStd { .. }
            | Transform::CosZenith
            | Transform::Flag { flag: FlagKind::Day } => 1,
            Transform::Csi { .. }
            | Transform::CsDev
            | Transform::WindComponents { .. }
            | Transform::CosNormal
            | Transform::SunPosition { .. } => 2,
        }
    }

    pub(crate) fn rolling(&self) -> Option<(usize, RollingKind)> {
        match *self {
            Transform::RollMean { w } => Some((w, RollingKind::Mean)),
            Transform::RollMedian { w } => Some((w, RollingKind::Median)),
            Transform::RollStd { w } => Some((w, RollingKind::Std)),
            _ => None,
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(flatten)]
    pub transform: Transform,
    /// Helper specs with `emit = false` are computed but not model inputs.
    #[serde(default = "yes")]
    pub emit: bool,
}

impl FeatureSpec {
    pub fn new(name: impl Into<String>, inputs: &[&str], transform: Transform) -> Self {
        Self {
            name: name.into(),
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            transform,
            emit: true,
        }
    }

    pub fn raw(name: &str) -> Self {
        Self::new(name, &[name], Transform::Raw)
    }

    pub fn hidden(mut self) -> Self {
        self.emit = false;
        self
    }

    pub(crate) fn validate(&self) -> Result<(), FeatureError> {
        let invalid = |msg: String| FeatureError::InvalidSpec {
            name: self.name.clone(),
            msg,
        };
        if self.inputs.len() != self.transform.arity() {
            return Err(invalid(format!(
                "expects {} inputs, got {}",
                self.transform.arity(),
                self.inputs.len()
            )));
        }
        match self.transform {
            Transform::Lag { k } if k < 1 => Err(invalid("lag must be at least 1".into())),
            Transform::RollMean { w } | Transform::RollMedian { w } | Transform::RollStd { w } if w < 2 => {
                Err(invalid("rolling window must be at least 2".into()))
            }
            Transform::Cyclic { period, .. } if !(period > 0.0) => Err(invalid("period must be positive".into())),
            Transform::Csi { eps } if !(eps >= 0.0) => Err(invalid("eps must be non-negative".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureManifest {
    #[serde(rename = "feature", default)]
    pub features: Vec<FeatureSpec>,
}

impl FeatureManifest {
    pub fn from_toml(s: &str) -> Result<Self, FeatureError> {
        let m: FeatureManifest = toml::from_str(s).map_err(|e| FeatureError::Manifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        let mut seen = HashSet::new();
        for f in &self.features {
            if !seen.insert(f.name.as_str()) {
                return Err(FeatureError::DuplicateName(f.name.clone()));
            }
            f.validate()?;
        }
        Ok(())
    }

    /// Every engineered and raw feature listed in the station documentation.
    pub fn appendix_a() -> Self {
        Self::from_toml(include_str!("../../manifests/appendix_a.toml")).expect("bundled manifest parses")
    }

    /// Small desk-scale set used with the synthetic generator. Carries no
    /// time features; combine with a [`TimeRepresentation`].
    pub fn desk() -> Self {
        Self::from_toml(include_str!("../../manifests/desk.toml")).expect("bundled manifest parses")
    }

    /// Looks up a bundled manifest by name.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "appendix_a" => Some(Self::appendix_a()),
            "desk" => Some(Self::desk()),
            _ => None,
        }
    }

    pub fn emitted_names(&self) -> Vec<String> {
        self.features.iter().filter(|f| f.emit).map(|f| f.name.clone()).collect()
    }

    /// Appends specs whose names are not already present.
    pub fn extend_unique(&mut self, specs: impl IntoIterator<Item = FeatureSpec>) {
        for s in specs {
            if let Some(existing) = self.features.iter_mut().find(|f| f.name == s.name) {
                existing.emit |= s.emit;
            } else {
                self.features.push(s);
            }
        }
    }

    /// Drops every emitted spec not named in `keep`; helpers they depend on
    /// stay (hidden).
    pub fn retain_emitted(&mut self, keep: &[String]) {
        for f in &mut self.features {
            if f.emit && !keep.contains(&f.name) {
                f.emit = false;
            }
        }
    }
}

/// Encodings of the forecast time offered to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeRepresentation {
    /// Fraction of day and of year.
    TodToy,
    /// `sin`/`cos` of fraction of day and of year.
    AngleTodToy,
    /// Signed day fractions from sunrise, solar noon and sunset.
    Tm,
    /// `sin`/`cos` of each milestone offset.
    AngleTm,
}

impl TimeRepresentation {
    pub const ALL: [TimeRepresentation; 4] = [
        TimeRepresentation::TodToy,
        TimeRepresentation::AngleTodToy,
        TimeRepresentation::Tm,
        TimeRepresentation::AngleTm,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            TimeRepresentation::TodToy => "ToD/ToY",
            TimeRepresentation::AngleTodToy => "∠ToD/∠ToY",
            TimeRepresentation::Tm => "TM",
            TimeRepresentation::AngleTm => "∠TM",
        }
    }

    /// Feature specs implementing this representation. `literal` selects
    /// unscaled `sin(x)` for the angle variants.
    pub fn specs(&self, literal: bool) -> Vec<FeatureSpec> {
        let tod = || FeatureSpec::new("time_of_day", &[], Transform::Tod);
        let toy = || FeatureSpec::new("time_of_year", &[], Transform::Toy);
        let cyc = |name: &str, input: &str, part| {
            FeatureSpec::new(
                name,
                &[input],
                Transform::Cyclic {
                    period: 1.0,
                    part,
                    literal,
                },
            )
        };
        let tm = || {
            vec![
                FeatureSpec::new("time_from_sunrise", &[], Transform::Tm { milestone: Milestone::Sunrise }),
                FeatureSpec::new("time_to_solar_noon", &[], Transform::Tm { milestone: Milestone::SolarNoon }),
                FeatureSpec::new("time_to_sunset", &[], Transform::Tm { milestone: Milestone::Sunset }),
            ]
        };
        match self {
            TimeRepresentation::TodToy => vec![tod(), toy()],
            TimeRepresentation::AngleTodToy => vec![
                tod().hidden(),
                toy().hidden(),
                cyc("sin_time_of_day", "time_of_day", CyclicPart::Sin),
                cyc("cos_time_of_day", "time_of_day", CyclicPart::Cos),
                cyc("sin_time_of_year", "time_of_year", CyclicPart::Sin),
                cyc("cos_time_of_year", "time_of_year", CyclicPart::Cos),
            ],
            TimeRepresentation::Tm => tm(),
            TimeRepresentation::AngleTm => {
                let mut v: Vec<FeatureSpec> = tm().into_iter().map(FeatureSpec::hidden).collect();
                for m in ["time_from_sunrise", "time_to_solar_noon", "time_to_sunset"] {
                    v.push(cyc(&format!("sin_{m}"), m, CyclicPart::Sin));
                    v.push(cyc(&format!("cos_{m}"), m, CyclicPart::Cos));
                }
                v
            }
        }
    }
}

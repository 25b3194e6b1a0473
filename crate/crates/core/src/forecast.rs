//! Target representations and the persistence-of-cloudiness baseline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{CSI_EPS, CSI_MAX};

/// Conditions at forecast time needed to turn any representation back into
/// GHI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeContext {
    pub ghi_0: f64,
    pub csi_0: f64,
    pub ghi_cs_horizons: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TargetRepresentation {
    #[serde(rename = "GHI")]
    Ghi,
    #[serde(rename = "CSI")]
    Csi,
    /// Clear-sky minus measured GHI.
    #[serde(rename = "CS_DEV")]
    CsDev,
    /// Future GHI minus GHI at t0.
    #[serde(rename = "DELTA_GHI")]
    DeltaGhi,
    /// Future CSI minus CSI at t0.
    #[serde(rename = "DELTA_CSI")]
    DeltaCsi,
}

impl TargetRepresentation {
    pub const ALL: [TargetRepresentation; 5] = [
        TargetRepresentation::Ghi,
        TargetRepresentation::Csi,
        TargetRepresentation::CsDev,
        TargetRepresentation::DeltaGhi,
        TargetRepresentation::DeltaCsi,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TargetRepresentation::Ghi => "GHI",
            TargetRepresentation::Csi => "CSI",
            TargetRepresentation::CsDev => "CS_DEV",
            TargetRepresentation::DeltaGhi => "DELTA_GHI",
            TargetRepresentation::DeltaCsi => "DELTA_CSI",
        }
    }
}

impl std::fmt::Display for TargetRepresentation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TargetRepresentation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown target representation {s:?}"))
    }
}

/// Reasons a window cannot be encoded; the window should be dropped.
#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("expected {expected} horizons, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("clear-sky GHI {value} at horizon {horizon} is not positive")]
    NonPositiveClearSky { horizon: usize, value: f64 },
    /// CSI would hit the guard or the clamp, so the encoding would not be
    /// invertible.
    #[error("clear-sky index at horizon {horizon} outside the invertible range: {value}")]
    CsiOutOfRange { horizon: usize, value: f64 },
}

/// `csi_0 * ghi_cs` at every horizon.
pub fn poc_forecast(ctx: &DecodeContext) -> Vec<f64> {
    ctx.ghi_cs_horizons.iter().map(|cs| ctx.csi_0 * cs).collect()
}

pub fn encode_target(
    kind: TargetRepresentation,
    ghi_future: &[f64],
    ctx: &DecodeContext,
) -> Result<Vec<f64>, EncodeError> {
    let cs = &ctx.ghi_cs_horizons;
    if ghi_future.len() != cs.len() {
        return Err(EncodeError::Length {
            expected: cs.len(),
            actual: ghi_future.len(),
        });
    }
    if let Some((h, &v)) = cs.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(EncodeError::NonPositiveClearSky { horizon: h, value: v });
    }
    let mut out = Vec::with_capacity(cs.len());
    for (h, (&g, &c)) in ghi_future.iter().zip(cs).enumerate() {
        let v = match kind {
            TargetRepresentation::Ghi => g,
            TargetRepresentation::CsDev => c - g,
            TargetRepresentation::DeltaGhi => g - ctx.ghi_0,
            TargetRepresentation::Csi | TargetRepresentation::DeltaCsi => {
                let csi = g / c;
                if c < CSI_EPS || !(0.0..=CSI_MAX).contains(&csi) {
                    return Err(EncodeError::CsiOutOfRange { horizon: h, value: csi });
                }
                if kind == TargetRepresentation::Csi {
                    csi
                } else {
                    csi - ctx.csi_0
                }
            }
        };
        out.push(v);
    }
    Ok(out)
}

/// GHI from a prediction, floored at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub ghi: Vec<f64>,
    /// How many values were raised to zero.
    pub clamped: usize,
}

pub fn decode_to_ghi(kind: TargetRepresentation, prediction: &[f64], ctx: &DecodeContext) -> Decoded {
    let mut clamped = 0;
    let ghi = prediction
        .iter()
        .zip(&ctx.ghi_cs_horizons)
        .map(|(&p, &c)| {
            let g = match kind {
                TargetRepresentation::Ghi => p,
                TargetRepresentation::Csi => p * c,
                TargetRepresentation::CsDev => c - p,
                TargetRepresentation::DeltaGhi => p + ctx.ghi_0,
                TargetRepresentation::DeltaCsi => (p + ctx.csi_0) * c,
            };
            if g < 0.0 {
                clamped += 1;
                0.0
            } else {
                g
            }
        })
        .collect();
    Decoded { ghi, clamped }
}

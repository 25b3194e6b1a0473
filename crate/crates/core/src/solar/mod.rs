//! Solar geometry and clear-sky irradiance.

mod clearsky;
mod position;

pub use clearsky::{
    air_mass_absolute, air_mass_relative, clear_sky, extraterrestrial_normal, pressure_from_altitude,
    ClearSkyIrradiance,
};
pub use position::{solar_date, solar_position, sun_events, SolarPosition, SunCycle, SunEvents};

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{IngestError, TimeSeriesTable};

#[derive(Debug, Error, PartialEq)]
pub enum SiteError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("Linke turbidity {0} must be finite and at least 1")]
    Turbidity(f64),
}

/// Linke turbidity as one value or one per calendar month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Turbidity {
    Scalar(f64),
    Monthly([f64; 12]),
}

impl Default for Turbidity {
    fn default() -> Self {
        Turbidity::Scalar(3.0)
    }
}

impl Turbidity {
    pub fn at(&self, t: DateTime<Utc>) -> f64 {
        match self {
            Turbidity::Scalar(v) => *v,
            Turbidity::Monthly(m) => m[t.month0() as usize],
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            Turbidity::Scalar(v) => std::slice::from_ref(v),
            Turbidity::Monthly(m) => m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteConfig {
    pub latitude: f64,
    pub longitude: f64,
    #[serde(default)]
    pub elevation_m: f64,
    #[serde(default)]
    pub turbidity: Turbidity,
}

impl SiteConfig {
    /// NREL Solar Radiation Research Laboratory, Golden, Colorado.
    pub fn golden_co() -> Self {
        Self {
            latitude: 39.742,
            longitude: -105.18,
            elevation_m: 1828.8,
            turbidity: Turbidity::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SiteError> {
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(SiteError::Latitude(self.latitude));
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(SiteError::Longitude(self.longitude));
        }
        if let Some(t) = self.turbidity.values().iter().find(|t| !(t.is_finite() && **t >= 1.0)) {
            return Err(SiteError::Turbidity(*t));
        }
        Ok(())
    }
}

/// Column names written by [`augment_with_clear_sky`].
pub mod columns {
    pub const GHI_CS: &str = "ghi_cs";
    pub const DNI_CS: &str = "dni_cs";
    pub const DHI_CS: &str = "dhi_cs";
    pub const ECLIPSE_SHADING: &str = "solar_eclipse_shading";
    pub const ZENITH: &str = "zenith_angle";
    pub const ELEVATION: &str = "solar_elevation_angle";
    pub const AZIMUTH: &str = "solar_azimuth_angle";
}

/// Adds the clear-sky model columns for every row of `table`.
///
/// Eclipse shading has no model here and is emitted as `eclipse_shading`
/// (1.0 means unshaded).
pub fn augment_with_clear_sky(
    table: &TimeSeriesTable,
    site: &SiteConfig,
    eclipse_shading: f64,
) -> Result<TimeSeriesTable, IngestError> {
    let n = table.len();
    let mut cols: [Vec<f64>; 6] = Default::default();
    for c in cols.iter_mut() {
        c.reserve(n);
    }
    for row in 0..n {
        let t = table.timestamp(row);
        let pos = solar_position(t, site);
        let cs = clearsky::clear_sky_at(t, &pos, site, site.turbidity.at(t));
        cols[0].push(cs.ghi_cs);
        cols[1].push(cs.dni_cs);
        cols[2].push(cs.dhi_cs);
        cols[3].push(pos.zenith);
        cols[4].push(pos.elevation);
        cols[5].push(pos.azimuth);
    }
    let mut out = table.clone();
    let [ghi, dni, dhi, zen, elev, az] = cols;
    out.set_column(columns::GHI_CS, ghi)?;
    out.set_column(columns::DNI_CS, dni)?;
    out.set_column(columns::DHI_CS, dhi)?;
    out.set_column(columns::ECLIPSE_SHADING, vec![eclipse_shading; n])?;
    out.set_column(columns::ZENITH, zen)?;
    out.set_column(columns::ELEVATION, elev)?;
    out.set_column(columns::AZIMUTH, az)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn site_validation() {
        assert!(SiteConfig::golden_co().validate().is_ok());
        let mut s = SiteConfig::golden_co();
        s.latitude = 91.0;
        assert_eq!(s.validate(), Err(SiteError::Latitude(91.0)));
        let mut s = SiteConfig::golden_co();
        s.turbidity = Turbidity::Scalar(0.5);
        assert!(s.validate().is_err());
    }

    #[test]
    fn turbidity_parses_scalar_or_monthly() {
        let s: SiteConfig = toml::from_str("latitude = 1.0\nlongitude = 2.0\nturbidity = 2.5\n").unwrap();
        assert_eq!(s.turbidity, Turbidity::Scalar(2.5));
        let s: SiteConfig = toml::from_str(
            "latitude = 1.0\nlongitude = 2.0\nturbidity = [1,2,3,4,5,6,7,8,9,10,11,12]\n",
        )
        .unwrap();
        let jul = DateTime::parse_from_rfc3339("2020-07-04T00:00:00Z").unwrap().with_timezone(&Utc);
        assert_eq!(s.turbidity.at(jul), 7.0);
    }
}

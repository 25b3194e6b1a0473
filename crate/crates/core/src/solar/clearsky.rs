//! Ineichen-Perez clear-sky model with Linke turbidity.

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};

use super::{solar_position, SiteConfig, SolarPosition};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClearSkyIrradiance {
    pub ghi_cs: f64,
    pub dni_cs: f64,
    pub dhi_cs: f64,
}

/// Kasten & Young (1989) relative optical air mass; `None` below the horizon.
pub fn air_mass_relative(zenith_deg: f64) -> Option<f64> {
    if zenith_deg >= 90.0 {
        return None;
    }
    Some(1.0 / (zenith_deg.to_radians().cos() + 0.505_72 * (96.079_95 - zenith_deg).powf(-1.636_4)))
}

/// Standard-atmosphere station pressure in Pa.
pub fn pressure_from_altitude(altitude_m: f64) -> f64 {
    100.0 * ((44_331.514 - altitude_m) / 11_880.516).powf(1.0 / 0.190_263_2)
}

pub fn air_mass_absolute(relative: f64, pressure_pa: f64) -> f64 {
    relative * pressure_pa / 101_325.0
}

/// Spencer (1971) extraterrestrial normal irradiance in W/m².
pub fn extraterrestrial_normal(day_of_year: u32) -> f64 {
    let b = 2.0 * std::f64::consts::PI * (day_of_year as f64 - 1.0) / 365.0;
    1_366.1
        * (1.000_11 + 0.034_221 * b.cos() + 0.001_28 * b.sin() + 0.000_719 * (2.0 * b).cos()
            + 0.000_077 * (2.0 * b).sin())
}

pub fn clear_sky(t: DateTime<Utc>, site: &SiteConfig, turbidity: f64) -> ClearSkyIrradiance {
    let pos = solar_position(t, site);
    clear_sky_at(t, &pos, site, turbidity)
}

pub(crate) fn clear_sky_at(
    t: DateTime<Utc>,
    pos: &SolarPosition,
    site: &SiteConfig,
    turbidity: f64,
) -> ClearSkyIrradiance {
    let Some(am_rel) = air_mass_relative(pos.zenith) else {
        return ClearSkyIrradiance::default();
    };
    let cos_z = pos.zenith.to_radians().cos().max(0.0);
    let alt = site.elevation_m;
    let am = air_mass_absolute(am_rel, pressure_from_altitude(alt));
    let tl = turbidity;
    let i0 = extraterrestrial_normal(t.ordinal());

    let fh1 = (-alt / 8_000.0).exp();
    let fh2 = (-alt / 1_250.0).exp();
    let cg1 = 5.09e-5 * alt + 0.868;
    let cg2 = 3.92e-5 * alt + 0.038_7;

    let ghi = cg1 * i0 * cos_z * (-cg2 * am * (fh1 + fh2 * (tl - 1.0))).exp().max(0.0);

    let b = 0.664 + 0.163 / fh1;
    let beam = i0 * (b * (-0.09 * am * (tl - 1.0)).exp()).max(0.0);
    // empirical correction bounding beam by the global estimate
    let beam_cap = if cos_z > 0.0 {
        ghi * ((1.0 - (0.1 - 0.2 * (-tl).exp()) / (0.1 + 0.882 / fh1)) / cos_z).clamp(0.0, 1e20)
    } else {
        0.0
    };
    let dni = beam.min(beam_cap);
    let dhi = ghi - dni * cos_z;
    ClearSkyIrradiance {
        ghi_cs: ghi,
        dni_cs: dni,
        dhi_cs: dhi.max(0.0),
    }
}

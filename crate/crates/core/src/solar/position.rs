//! Low-precision solar ephemeris (NOAA spreadsheet formulation): declination
//! and equation of time from the Julian century, then local hour angle.

use chrono::{DateTime, Duration, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use super::SiteConfig;

/// Geometric (unrefracted) solar position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolarPosition {
    pub zenith: f64,
    pub elevation: f64,
    /// Degrees clockwise from north, in `[0, 360)`.
    pub azimuth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SunEvents {
    pub sunrise: DateTime<Utc>,
    pub solar_noon: DateTime<Utc>,
    pub sunset: DateTime<Utc>,
}

impl SunEvents {
    pub fn day_length_hours(&self) -> f64 {
        (self.sunset - self.sunrise).num_milliseconds() as f64 / 3.6e6
    }
}

/// Outcome of the sunrise computation for one solar day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SunCycle {
    Normal(SunEvents),
    /// The sun never sets.
    PolarDay { solar_noon: DateTime<Utc> },
    /// The sun never rises.
    PolarNight { solar_noon: DateTime<Utc> },
}

impl SunCycle {
    pub fn events(&self) -> Option<&SunEvents> {
        match self {
            SunCycle::Normal(e) => Some(e),
            _ => None,
        }
    }

    pub fn solar_noon(&self) -> DateTime<Utc> {
        match self {
            SunCycle::Normal(e) => e.solar_noon,
            SunCycle::PolarDay { solar_noon } | SunCycle::PolarNight { solar_noon } => *solar_noon,
        }
    }
}

/// Declination (deg) and equation of time (min) at an instant.
struct Ephemeris {
    declination: f64,
    eq_time_min: f64,
}

fn julian_century(t: DateTime<Utc>) -> f64 {
    let jd = t.timestamp() as f64 / 86_400.0
        + t.timestamp_subsec_nanos() as f64 / 86_400e9
        + 2_440_587.5;
    (jd - 2_451_545.0) / 36_525.0
}

fn ephemeris(t: DateTime<Utc>) -> Ephemeris {
    let jc = julian_century(t);
    let l0 = (280.466_46 + jc * (36_000.769_83 + jc * 0.000_303_2)).rem_euclid(360.0);
    let m = 357.529_11 + jc * (35_999.050_29 - 0.000_153_7 * jc);
    let e = 0.016_708_634 - jc * (0.000_042_037 + 0.000_000_126_7 * jc);
    let mr = m.to_radians();
    let center = mr.sin() * (1.914_602 - jc * (0.004_817 + 0.000_014 * jc))
        + (2.0 * mr).sin() * (0.019_993 - 0.000_101 * jc)
        + (3.0 * mr).sin() * 0.000_289;
    let true_long = l0 + center;
    let omega = (125.04 - 1_934.136 * jc).to_radians();
    let app_long = true_long - 0.005_69 - 0.004_78 * omega.sin();
    let mean_obliq = 23.0 + (26.0 + (21.448 - jc * (46.815 + jc * (0.000_59 - jc * 0.001_813))) / 60.0) / 60.0;
    let obliq = (mean_obliq + 0.002_56 * omega.cos()).to_radians();
    let declination = (obliq.sin() * app_long.to_radians().sin()).asin().to_degrees();

    let y = (obliq / 2.0).tan().powi(2);
    let l0r = l0.to_radians();
    let eq = y * (2.0 * l0r).sin() - 2.0 * e * mr.sin() + 4.0 * e * y * mr.sin() * (2.0 * l0r).cos()
        - 0.5 * y * y * (4.0 * l0r).sin()
        - 1.25 * e * e * (2.0 * mr).sin();
    Ephemeris {
        declination,
        eq_time_min: 4.0 * eq.to_degrees(),
    }
}

pub fn solar_position(t: DateTime<Utc>, site: &SiteConfig) -> SolarPosition {
    let eph = ephemeris(t);
    let secs_of_day = t.timestamp().rem_euclid(86_400) as f64 + t.timestamp_subsec_nanos() as f64 * 1e-9;
    let true_solar_min = (secs_of_day / 60.0 + eph.eq_time_min + 4.0 * site.longitude).rem_euclid(1440.0);
    let mut hour_angle = true_solar_min / 4.0 - 180.0;
    if hour_angle < -180.0 {
        hour_angle += 360.0;
    }
    let ha = hour_angle.to_radians();
    let lat = site.latitude.to_radians();
    let dec = eph.declination.to_radians();

    let cos_zen = (lat.sin() * dec.sin() + lat.cos() * dec.cos() * ha.cos()).clamp(-1.0, 1.0);
    let zenith = cos_zen.acos().to_degrees();
    let azimuth = (ha.sin().atan2(ha.cos() * lat.sin() - dec.tan() * lat.cos()).to_degrees() + 180.0)
        .rem_euclid(360.0);
    SolarPosition {
        zenith,
        elevation: 90.0 - zenith,
        azimuth: if azimuth >= 360.0 { 0.0 } else { azimuth },
    }
}

/// Calendar date of local mean solar time at `t`, which is the day whose
/// events bracket `t` most closely.
pub fn solar_date(t: DateTime<Utc>, site: &SiteConfig) -> NaiveDate {
    (t + Duration::milliseconds((site.longitude / 15.0 * 3.6e6) as i64)).date_naive()
}

fn at_minutes(date: NaiveDate, minutes: f64) -> DateTime<Utc> {
    let midnight = date.and_hms_opt(0, 0, 0).expect("valid midnight").and_utc();
    midnight + Duration::milliseconds((minutes * 60_000.0).round() as i64)
}

/// Sun altitude at sunrise/sunset: refraction plus solar semi-diameter.
const HORIZON_DEG: f64 = -0.833;

/// Sunrise, solar noon and sunset for the solar day `date` at `site`.
/// Each event is refined by re-evaluating the ephemeris at its own time.
pub fn sun_events(date: NaiveDate, site: &SiteConfig) -> SunCycle {
    let mut noon_min = 720.0 - 4.0 * site.longitude;
    for _ in 0..3 {
        let eph = ephemeris(at_minutes(date, noon_min));
        noon_min = 720.0 - 4.0 * site.longitude - eph.eq_time_min;
    }
    let solar_noon = at_minutes(date, noon_min);

    let lat = site.latitude.to_radians();
    let hour_angle_cos = |dec_deg: f64| {
        let dec = dec_deg.to_radians();
        (HORIZON_DEG.to_radians().sin() - lat.sin() * dec.sin()) / (lat.cos() * dec.cos())
    };

    let noon_eph = ephemeris(solar_noon);
    let c = hour_angle_cos(noon_eph.declination);
    if c > 1.0 {
        return SunCycle::PolarNight { solar_noon };
    }
    if c < -1.0 {
        return SunCycle::PolarDay { solar_noon };
    }

    let refine = |sign: f64| -> Option<f64> {
        let mut minutes = noon_min + sign * 4.0 * c.acos().to_degrees();
        for _ in 0..4 {
            let eph = ephemeris(at_minutes(date, minutes));
            let cc = hour_angle_cos(eph.declination);
            if !(-1.0..=1.0).contains(&cc) {
                return None;
            }
            minutes = 720.0 - 4.0 * site.longitude - eph.eq_time_min + sign * 4.0 * cc.acos().to_degrees();
        }
        Some(minutes)
    };
    match (refine(-1.0), refine(1.0)) {
        (Some(rise), Some(set)) => SunCycle::Normal(SunEvents {
            sunrise: at_minutes(date, rise),
            solar_noon,
            sunset: at_minutes(date, set),
        }),
        _ if c > 0.0 => SunCycle::PolarNight { solar_noon },
        _ => SunCycle::PolarDay { solar_noon },
    }
}

use chrono::{DateTime, Datelike, Timelike, Utc};

use crate::solar::SunEvents;

/// Fraction of the UTC day elapsed, in `[0, 1)`.
pub fn time_of_day(t: DateTime<Utc>) -> f64 {
    (t.hour() as f64 + t.minute() as f64 / 60.0 + t.second() as f64 / 3600.0) / 24.0
}

/// `(day_of_year + time_of_day) / 365` with `day_of_year` in `1..=366`.
pub fn time_of_year(t: DateTime<Utc>) -> f64 {
    (t.ordinal() as f64 + time_of_day(t)) / 365.0
}

/// Signed offsets from sunrise, solar noon and sunset in fractional days.
pub fn time_milestones(t: DateTime<Utc>, ev: &SunEvents) -> [f64; 3] {
    let days = |other: DateTime<Utc>| (t - other).num_milliseconds() as f64 / 86_400_000.0;
    [days(ev.sunrise), days(ev.solar_noon), days(ev.sunset)]
}

/// `(sin, cos)` of `x` on a cycle of length `period`.
pub fn cyclic_encode(x: f64, period: f64) -> (f64, f64) {
    debug_assert!(period > 0.0);
    let a = std::f64::consts::TAU * x / period;
    (a.sin(), a.cos())
}

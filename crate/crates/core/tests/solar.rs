use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use proptest::prelude::*;
use skycast_core::solar::{clear_sky, solar_position, sun_events, SiteConfig, Turbidity};

fn golden() -> SiteConfig {
    SiteConfig {
        turbidity: Turbidity::Scalar(3.0),
        ..SiteConfig::golden_co()
    }
}

fn utc(s: &str) -> DateTime<Utc> {
    DateTime::parse_from_rfc3339(s).unwrap().with_timezone(&Utc)
}

// Reference values from pvlib 0.11 (SPA geometric zenith, Ineichen with
// Kasten-Young air mass, pressure from altitude, Spencer extraterrestrial
// irradiance), Linke turbidity 3, Golden CO at 1828.8 m.
// (time, zenith, azimuth, ghi, dni, dhi)
const PVLIB: [(&str, f64, f64, f64, f64, f64); 5] = [
    ("2022-06-21T18:00:00Z", 20.992304, 136.303655, 1052.619839, 983.990919, 133.937820),
    ("2019-12-21T19:30:00Z", 63.598477, 187.995705, 470.436882, 888.494703, 75.359732),
    ("2020-03-20T16:00:00Z", 58.224250, 120.645641, 564.335385, 910.302053, 84.973933),
    ("2021-09-27T22:15:00Z", 62.447636, 240.997076, 475.554168, 865.847207, 75.048683),
    ("2018-01-15T15:10:00Z", 82.608597, 125.377968, 76.957370, 424.468933, 22.350800),
];

#[test]
fn position_matches_reference_within_half_degree() {
    let site = golden();
    for (t, zen, az, ..) in PVLIB {
        let p = solar_position(utc(t), &site);
        assert!((p.zenith - zen).abs() < 0.5, "{t}: zenith {} vs {zen}", p.zenith);
        assert!((p.azimuth - az).abs() < 0.5, "{t}: azimuth {} vs {az}", p.azimuth);
    }
}

#[test]
fn clear_sky_matches_reference_within_three_percent() {
    let site = golden();
    for (t, _, _, ghi, dni, dhi) in PVLIB {
        let cs = clear_sky(utc(t), &site, 3.0);
        for (name, got, want) in [("ghi", cs.ghi_cs, ghi), ("dni", cs.dni_cs, dni), ("dhi", cs.dhi_cs, dhi)] {
            assert!((got - want).abs() <= 0.03 * want, "{t} {name}: {got} vs {want}");
        }
    }
}

#[test]
fn solstice_noon_zenith_is_latitude_minus_tilt() {
    let site = golden();
    let ev = *sun_events(NaiveDate::from_ymd_opt(2022, 6, 21).unwrap(), &site).events().unwrap();
    let p = solar_position(ev.solar_noon, &site);
    assert!((p.zenith - (site.latitude - 23.44).abs()).abs() < 0.5, "{}", p.zenith);
}

// (site lat, lon, date, sunrise, transit, sunset) from the same reference
const EVENTS: [(f64, f64, &str, &str, &str, &str); 4] = [
    (39.742, -105.18, "2022-06-21", "2022-06-21T11:32:56Z", "2022-06-21T19:02:36Z", "2022-06-22T02:32:03Z"),
    (39.742, -105.18, "2019-12-21", "2019-12-21T14:18:08Z", "2019-12-21T18:58:46Z", "2019-12-21T23:39:25Z"),
    (39.742, -105.18, "2020-03-20", "2020-03-20T13:03:12Z", "2020-03-20T19:07:58Z", "2020-03-21T01:12:23Z"),
    (0.0, 0.0, "2021-03-20", "2021-03-20T06:04:09Z", "2021-03-20T12:07:24Z", "2021-03-20T18:10:40Z"),
];

#[test]
fn sun_events_match_reference_within_three_minutes() {
    for (lat, lon, date, rise, noon, set) in EVENTS {
        let site = SiteConfig {
            latitude: lat,
            longitude: lon,
            elevation_m: 0.0,
            turbidity: Turbidity::Scalar(3.0),
        };
        let d = NaiveDate::parse_from_str(date, "%Y-%m-%d").unwrap();
        let ev = *sun_events(d, &site).events().unwrap();
        for (name, got, want) in [("rise", ev.sunrise, rise), ("noon", ev.solar_noon, noon), ("set", ev.sunset, set)] {
            let err = (got - utc(want)).num_seconds().abs();
            assert!(err <= 180, "{date} {name}: {got} vs {want}");
        }
    }
}

#[test]
fn solstice_day_length_and_equator_equinox() {
    let g = sun_events(NaiveDate::from_ymd_opt(2022, 6, 21).unwrap(), &golden());
    let h = g.events().unwrap().day_length_hours();
    assert!((h - 14.9).abs() < 0.25, "{h}");
    let eq = SiteConfig {
        latitude: 0.0,
        longitude: 0.0,
        elevation_m: 0.0,
        turbidity: Turbidity::Scalar(3.0),
    };
    let h = sun_events(NaiveDate::from_ymd_opt(2021, 3, 20).unwrap(), &eq).events().unwrap().day_length_hours();
    assert!((h - 12.0).abs() < 10.0 / 60.0, "{h}");
}

#[test]
fn events_ordered_every_day_2017_to_2022() {
    let site = golden();
    let mut d = NaiveDate::from_ymd_opt(2017, 1, 1).unwrap();
    let end = NaiveDate::from_ymd_opt(2022, 12, 31).unwrap();
    while d <= end {
        let ev = *sun_events(d, &site).events().expect("sun rises at Golden");
        assert!(ev.sunrise < ev.solar_noon && ev.solar_noon < ev.sunset, "{d}");
        d = d.succ_opt().unwrap();
    }
}

#[test]
fn dark_outside_events_and_noon_is_the_peak() {
    let site = golden();
    let ev = *sun_events(NaiveDate::from_ymd_opt(2021, 8, 3).unwrap(), &site).events().unwrap();
    // a few minutes of margin for refraction in the event times
    assert_eq!(clear_sky(ev.sunrise - Duration::minutes(5), &site, 3.0).ghi_cs, 0.0);
    assert_eq!(clear_sky(ev.sunset + Duration::minutes(5), &site, 3.0).ghi_cs, 0.0);
    let noon_elev = solar_position(ev.solar_noon, &site).elevation;
    for m in [-2i64, -1, 1, 2] {
        assert!(solar_position(ev.solar_noon + Duration::minutes(m), &site).elevation <= noon_elev + 1e-9);
    }
}

#[test]
fn june_peak_in_expected_band() {
    let site = golden();
    let ev = *sun_events(NaiveDate::from_ymd_opt(2021, 6, 15).unwrap(), &site).events().unwrap();
    let peak = clear_sky(ev.solar_noon, &site, 3.0).ghi_cs;
    assert!((950.0..=1150.0).contains(&peak), "{peak}");
}

#[test]
fn minute_series_is_smooth_and_rises_to_noon() {
    let site = golden();
    for date in [(2019, 1, 10), (2020, 4, 2), (2021, 7, 19), (2022, 10, 30)] {
        let d = NaiveDate::from_ymd_opt(date.0, date.1, date.2).unwrap();
        let ev = *sun_events(d, &site).events().unwrap();
        let start = Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0).unwrap()) + Duration::hours(6);
        let mut prev: Option<f64> = None;
        for m in 0..(24 * 60) {
            let t = start + Duration::minutes(m);
            let g = clear_sky(t, &site, 3.0).ghi_cs;
            if let Some(p) = prev {
                if p > 0.0 && g > 0.0 {
                    assert!((g - p).abs() <= 5.0, "{t}: jump {p} -> {g}");
                }
                if t > ev.sunrise && t <= ev.solar_noon {
                    assert!(g >= p - 1e-9, "{t}: {p} -> {g} before noon");
                }
            }
            prev = Some(g);
        }
    }
}

#[test]
fn symmetric_about_solar_noon() {
    let site = golden();
    for date in [(2019, 3, 1), (2020, 6, 21), (2021, 9, 9), (2022, 12, 1)] {
        let d = NaiveDate::from_ymd_opt(date.0, date.1, date.2).unwrap();
        let ev = *sun_events(d, &site).events().unwrap();
        for dm in [15i64, 60, 120, 180, 240] {
            let a = clear_sky(ev.solar_noon - Duration::minutes(dm), &site, 3.0).ghi_cs;
            let b = clear_sky(ev.solar_noon + Duration::minutes(dm), &site, 3.0).ghi_cs;
            if a.max(b) > 50.0 {
                assert!((a - b).abs() <= 0.02 * a.max(b), "{d} +-{dm}: {a} vs {b}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn components_consistent(secs in 1_483_228_800i64..1_672_531_200i64, tl in 1.0f64..7.0) {
        let site = golden();
        let t = DateTime::from_timestamp(secs, 0).unwrap();
        let p = solar_position(t, &site);
        prop_assert_eq!(p.zenith + p.elevation, 90.0);
        prop_assert!((0.0..360.0).contains(&p.azimuth));
        let cs = clear_sky(t, &site, tl);
        prop_assert!(cs.ghi_cs >= 0.0 && cs.dni_cs >= 0.0 && cs.dhi_cs >= 0.0);
        if p.zenith >= 90.0 {
            prop_assert_eq!((cs.ghi_cs, cs.dni_cs, cs.dhi_cs), (0.0, 0.0, 0.0));
        } else {
            prop_assert!(cs.ghi_cs >= cs.dhi_cs);
            let closure = p.zenith.to_radians().cos() * cs.dni_cs + cs.dhi_cs;
            prop_assert!((cs.ghi_cs - closure).abs() <= 1.0, "{} vs {}", cs.ghi_cs, closure);
        }
    }
}

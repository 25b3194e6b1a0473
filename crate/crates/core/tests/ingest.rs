use std::collections::BTreeSet;

use proptest::prelude::*;
use skycast_core::ingest::{
    build_windows, detect_gaps, is_missing, read_csv, read_window_cache, write_csv_to, write_window_cache, CsvSchema,
    TimeSeriesTable, WindowSpec, MISSING,
};
use skycast_core::synth::{self, CameraOutage, SynthConfig, COVER_COLUMN};

fn value() -> impl Strategy<Value = f64> {
    prop_oneof![
        1 => Just(MISSING),
        1 => Just(0.0),
        6 => -1.0e6f64..1.0e6,
        2 => -1.0e-3f64..1.0e-3,
    ]
}

fn table_strategy() -> impl Strategy<Value = TimeSeriesTable> {
    (prop_oneof![Just(60u32), Just(300), Just(600)], 0i64..100_000, 1usize..40, 1usize..5).prop_flat_map(
        |(cadence, k, len, ncols)| {
            proptest::collection::vec(proptest::collection::vec(value(), len), ncols).prop_map(move |cols| {
                let start = 1_500_000_000 / cadence as i64 * cadence as i64 + k * cadence as i64;
                let mut t = TimeSeriesTable::new(start, cadence, len).unwrap();
                for (i, c) in cols.into_iter().enumerate() {
                    t.add_column(format!("c{i}"), c).unwrap();
                }
                t
            })
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn csv_round_trip(t in table_strategy()) {
        // a table whose first or last row is entirely missing still has
        // those rows written, so the grid extent survives
        let mut buf = Vec::new();
        write_csv_to(&t, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &CsvSchema::default(), t.cadence_s()).unwrap();
        prop_assert!(t.same_contents(&back));
    }
}

#[test]
fn parsed_values_equal_an_independent_text_parse() {
    let mut text = String::from("timestamp,ghi,dni,dhi\n");
    let mut rows = Vec::new();
    for i in 0..500u64 {
        let x = (i as f64 * 0.7311).sin();
        let vals = [x * 1034.123456789, (x * 3.1).cos() * 955.5 + 1e-9 * i as f64, x.abs() * 87.015625];
        rows.push(format!(
            "2021-06-01T{:02}:{:02}:00Z,{},{},{}",
            i / 60,
            i % 60,
            vals[0],
            vals[1],
            vals[2]
        ));
    }
    text.push_str(&rows.join("\n"));
    text.push('\n');
    let t = read_csv(text.as_bytes(), &CsvSchema::default(), 60).unwrap();
    for (row, line) in text.lines().skip(1).enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        for (j, name) in ["ghi", "dni", "dhi"].iter().enumerate() {
            let want: f64 = fields[j + 1].parse().unwrap();
            assert_eq!(t.column(name).unwrap()[row].to_bits(), want.to_bits(), "row {row} {name}");
        }
    }
}

/// Synthetic table: ghi and a feature `x` with missing runs, and a clear-sky
/// column that dips below the daylight threshold in places.
fn gappy_table(len: usize, holes: &[(usize, usize)], dark: &[(usize, usize)]) -> TimeSeriesTable {
    let mut t = TimeSeriesTable::new(1_600_000_200 - 1_600_000_200 % 60, 60, len).unwrap();
    let mut x: Vec<f64> = (0..len).map(|i| i as f64).collect();
    for &(a, l) in holes {
        for v in x.iter_mut().skip(a).take(l) {
            *v = MISSING;
        }
    }
    let mut cs = vec![500.0; len];
    for &(a, l) in dark {
        for v in cs.iter_mut().skip(a).take(l) {
            *v = 5.0;
        }
    }
    t.add_column("ghi", vec![300.0; len]).unwrap();
    t.add_column("ghi_cs", cs).unwrap();
    t.add_column("x", x).unwrap();
    t
}

/// Exhaustive oracle: scan each candidate t0 and check every rule directly.
fn brute_force_t0s(t: &TimeSeriesTable, spec: &WindowSpec) -> Vec<i64> {
    let c = t.cadence_s() as i64;
    let step = spec.spacing_s as i64 / c;
    let lookback = (spec.input_len as i64 - 1) * step;
    let hs: Vec<i64> = spec.horizons_s.iter().map(|h| *h as i64 / c).collect();
    let x = t.column("x").unwrap();
    let ghi = t.column("ghi").unwrap();
    let cs = t.column("ghi_cs").unwrap();
    let mut out = Vec::new();
    for i in 0..t.len() as i64 {
        let e = t.epoch(i as usize);
        if e % spec.stride_s as i64 != 0 || i - lookback < 0 || i + hs.last().unwrap() >= t.len() as i64 {
            continue;
        }
        let span_ok = (i - lookback..=i + hs.last().unwrap())
            .all(|r| !is_missing(x[r as usize]) && !is_missing(ghi[r as usize]) && !is_missing(cs[r as usize]));
        let day_ok = cs[i as usize] > 10.0 && hs.iter().all(|h| cs[(i + h) as usize] > 10.0);
        if span_ok && day_ok {
            out.push(e);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn no_window_touches_a_gap(
        len in 150usize..500,
        holes in proptest::collection::vec((0usize..500, 1usize..20), 0..6),
        dark in proptest::collection::vec((0usize..500, 1usize..40), 0..3),
        input_len in 1usize..5,
        spacing_k in 1u32..4,
        stride_k in 1u32..4,
    ) {
        let t = gappy_table(len, &holes, &dark);
        let gaps = detect_gaps(&t, &["ghi", "ghi_cs", "x"]).unwrap();
        let spec = WindowSpec {
            input_len,
            spacing_s: 60 * spacing_k,
            horizons_s: vec![120, 300, 600],
            stride_s: 60 * stride_k,
            feature_names: vec!["x".into()],
            ..WindowSpec::default()
        };
        let ws = build_windows(&t, &gaps, &spec).unwrap();
        let missing: BTreeSet<usize> = (0..t.len()).filter(|&r| is_missing(t.column("x").unwrap()[r])).collect();
        let lookback = (input_len - 1) * spacing_k as usize;
        for w in &ws.windows {
            let i = t.row_of(w.t0).unwrap();
            prop_assert!(missing.range(i - lookback..=i + 10).next().is_none());
            prop_assert_eq!(w.inputs.len(), input_len);
            prop_assert_eq!(w.target_ghi.len(), 3);
        }
        prop_assert_eq!(ws.t0s(), brute_force_t0s(&t, &spec));
    }
}

#[test]
fn gap_free_days_admit_every_daylight_point() {
    // ten synthetic days, T=1: one window per stride point whose t0 and
    // every horizon have clear-sky GHI above the threshold
    let cfg = SynthConfig {
        n_days: 10,
        ..SynthConfig::default()
    };
    let (table, _) = synth::generate(&cfg).unwrap();
    let table = skycast_core::solar::augment_with_clear_sky(&table, &cfg.site, 1.0).unwrap();
    let gaps = detect_gaps(&table, &["ghi", "ghi_cs"]).unwrap();
    assert!(gaps.intervals.is_empty());
    assert_eq!(gaps.coverage_fraction, 1.0);
    let spec = WindowSpec {
        stride_s: 60,
        feature_names: vec!["ghi".into()],
        ..WindowSpec::default()
    };
    let ws = build_windows(&table, &gaps, &spec).unwrap();
    let cs = table.column("ghi_cs").unwrap();
    let expected = (0..table.len())
        .filter(|&i| i + 120 < table.len() && cs[i] > 10.0 && (1..=12).all(|k| cs[i + 10 * k] > 10.0))
        .count();
    assert_eq!(ws.len(), expected);
    assert!(expected > 10 * 600);
}

#[test]
fn long_lookback_starts_two_hours_in() {
    let len = 400;
    let t = gappy_table(len, &[], &[]);
    let gaps = detect_gaps(&t, &["x"]).unwrap();
    let spec = WindowSpec {
        input_len: 13,
        spacing_s: 600,
        stride_s: 60,
        feature_names: vec!["x".into()],
        ..WindowSpec::default()
    };
    let ws = build_windows(&t, &gaps, &spec).unwrap();
    assert_eq!(ws.windows[0].t0 - t.start_epoch(), 120 * 60);
}

#[test]
fn daily_camera_outage_recovered_as_daily_gaps() {
    let cfg = SynthConfig {
        n_days: 6,
        camera_outage: Some(CameraOutage {
            start_minute_utc: 17 * 60,
            duration_min: 7,
        }),
        ..SynthConfig::default()
    };
    let (table, _) = synth::generate(&cfg).unwrap();
    let gaps = detect_gaps(&table, &[COVER_COLUMN, "ghi"]).unwrap();
    assert_eq!(gaps.intervals.len(), 6);
    for (day, g) in gaps.intervals.iter().enumerate() {
        assert_eq!(g.first_row, day * 1440 + 17 * 60);
        assert_eq!(g.last_row, day * 1440 + 17 * 60 + 6);
        assert_eq!(g.columns, vec![COVER_COLUMN.to_string()]);
    }
    assert!((gaps.coverage_fraction - (1.0 - 42.0 / table.len() as f64)).abs() < 1e-12);
}

#[test]
fn window_cache_round_trip_through_files() {
    let t = gappy_table(300, &[(50, 5)], &[]);
    let gaps = detect_gaps(&t, &["x"]).unwrap();
    let spec = WindowSpec {
        input_len: 3,
        spacing_s: 120,
        stride_s: 60,
        feature_names: vec!["x".into(), "ghi".into()],
        ..WindowSpec::default()
    };
    let ws = build_windows(&t, &gaps, &spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("w.bin");
    let h = write_window_cache(&ws, &p).unwrap();
    assert_eq!(read_window_cache(&p, Some(h)).unwrap(), ws);
    assert!(read_window_cache(&p, Some(h ^ 1)).is_err());
}

#[test]
fn build_is_deterministic() {
    let t = gappy_table(300, &[(10, 3), (200, 1)], &[(100, 20)]);
    let gaps = detect_gaps(&t, &["x"]).unwrap();
    let spec = WindowSpec {
        feature_names: vec!["x".into()],
        stride_s: 60,
        horizons_s: vec![60, 120],
        ..WindowSpec::default()
    };
    assert_eq!(build_windows(&t, &gaps, &spec).unwrap(), build_windows(&t.clone(), &gaps, &spec).unwrap());
}

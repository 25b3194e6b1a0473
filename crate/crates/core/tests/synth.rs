use skycast_core::solar::solar_position;
use skycast_core::synth::{describe_truth, generate, write_dataset, Regime, SynthConfig, COVER_COLUMN};

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn regime_chain_reaches_its_stationary_split() {
    let cfg = SynthConfig {
        n_days: 120,
        ..SynthConfig::default()
    };
    let (_, truth) = generate(&cfg).unwrap();
    let clear = truth.regime.iter().filter(|r| **r == Regime::Clear).count() as f64 / truth.len() as f64;
    let want = cfg.p_cloudy_to_clear / (cfg.p_clear_to_cloudy + cfg.p_cloudy_to_clear);
    assert!((clear - want).abs() < 0.05, "{clear} vs {want}");

    // mean sojourn in the clear regime is 1 / p
    let mut runs = Vec::new();
    let mut len = 0usize;
    for w in truth.regime.windows(2) {
        if w[0] == Regime::Clear {
            len += 1;
            if w[1] != Regime::Clear {
                runs.push(len);
                len = 0;
            }
        }
    }
    let mean_run = runs.iter().sum::<usize>() as f64 / runs.len() as f64;
    let expected = 1.0 / cfg.p_clear_to_cloudy;
    assert!((mean_run - expected).abs() < 0.15 * expected, "{mean_run} vs {expected}");
}

#[test]
fn distractors_are_uncorrelated_with_irradiance() {
    let cfg = SynthConfig::default();
    let (table, _) = generate(&cfg).unwrap();
    let ghi = table.column("ghi").unwrap();
    for d in &cfg.distractors {
        let x = table.column(&d.name).unwrap();
        let r = pearson(x, ghi);
        assert!(r.abs() < 0.05, "{}: {r}", d.name);
    }
}

#[test]
fn cover_carries_the_planted_signal() {
    let (table, truth) = generate(&SynthConfig::default()).unwrap();
    let s = describe_truth(&truth, table.column(COVER_COLUMN).unwrap());
    assert!(s.planted_correlation < -0.5, "{}", s.planted_correlation);
    assert!(s.planted_mi_proxy > 0.1);
    assert!((s.clear_fraction + s.cloudy_fraction - 1.0).abs() < 1e-12);
}

#[test]
fn closure_holds_on_every_row() {
    let (table, _) = generate(&SynthConfig { n_days: 3, ..SynthConfig::default() }).unwrap();
    let (ghi, dni, dhi) = (table.column("ghi").unwrap(), table.column("dni").unwrap(), table.column("dhi").unwrap());
    let site = SynthConfig::default().site;
    for i in 0..table.len() {
        assert!(ghi[i] >= 0.0 && dni[i] >= 0.0 && dhi[i] >= 0.0);
        let zen = solar_position(table.timestamp(i), &site).zenith;
        let closure = zen.to_radians().cos().max(0.0) * dni[i] + dhi[i];
        assert!((ghi[i] - closure).abs() < 1e-6, "row {i}: {} vs {closure}", ghi[i]);
    }
}

#[test]
fn same_seed_same_bytes() {
    let cfg = SynthConfig {
        n_days: 4,
        seed: 11,
        ..SynthConfig::default()
    };
    let (a, ta) = generate(&cfg).unwrap();
    let (b, tb) = generate(&cfg).unwrap();
    assert!(a.same_contents(&b));
    assert_eq!(ta, tb);
    let (c, _) = generate(&SynthConfig { seed: 12, ..cfg.clone() }).unwrap();
    assert!(!a.same_contents(&c));

    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_dataset(&a, &ta, d1.path()).unwrap();
    write_dataset(&b, &tb, d2.path()).unwrap();
    for f in ["data.csv", "truth.csv"] {
        assert_eq!(std::fs::read(d1.path().join(f)).unwrap(), std::fs::read(d2.path().join(f)).unwrap());
    }
}

#[test]
fn invalid_configs_rejected() {
    assert!(generate(&SynthConfig { n_days: 0, ..SynthConfig::default() }).is_err());
    assert!(generate(&SynthConfig { csi_overcast: 0.9, ..SynthConfig::default() }).is_err());
    assert!(generate(&SynthConfig { p_clear_to_cloudy: 1.5, ..SynthConfig::default() }).is_err());
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

const BIN: &str = env!("CARGO_BIN_EXE_skycast");

fn desk_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml")
}

const SMALL: &str = r#"
seed = 7
target_representation = "DELTA_CSI"

[synth]
start_date = "2021-05-01"
n_days = 9

[features]
manifest = "desk"
time_representation = "tm"

[windows]
stride_s = 300
cover_column = "cdoc_total_cloud_cover"

[network]
noise_width = 2
dropout = 0.1
conv_filters = 6
lstm_hidden = 6
dense_hidden = 8

[training]
learning_rate = 0.003
batch_size = 64
max_epochs = 3
patience = 3

[splits]
initial_train_days = 5
validate_days = 2
num_steps = 2

[experiments]
sequence_lengths = [1, 3, 5]
sequence_step = 0
"#;

fn small_config(dir: &Path) -> PathBuf {
    let p = dir.join("small.toml");
    std::fs::write(&p, SMALL).unwrap();
    p
}

fn skycast(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}\n{}", o.status.code(), String::from_utf8_lossy(&o.stderr));
}

fn read(p: PathBuf) -> Vec<u8> {
    std::fs::read(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn manifest_without_timing(dir: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(&read(dir.join("manifest.json"))).unwrap();
    v.as_object_mut().unwrap().remove("wall_time_s");
    v
}

#[test]
fn config_problems_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(BIN).arg("train").arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = skycast(&dir.path().join("missing.toml"), dir.path(), &["train"]);
    assert_eq!(o.status.code(), Some(2));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "seed = \"not a number\"\n").unwrap();
    assert_eq!(skycast(&bad, dir.path(), &["ingest"]).status.code(), Some(2));
    let o = Command::new(BIN).arg("no-such-command").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unreadable_data_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("data.csv"), "timestamp,ghi\nyesterday,12\n").unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, format!("{SMALL}\n[data]\npath = \"data.csv\"\n")).unwrap();
    let o = skycast(&cfg, &dir.path().join("out"), &["ingest"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    let cfg2 = dir.path().join("c2.toml");
    std::fs::write(&cfg2, format!("{SMALL}\n[data]\npath = \"nowhere.csv\"\n")).unwrap();
    assert_eq!(skycast(&cfg2, &dir.path().join("out"), &["ingest"]).status.code(), Some(3));
}

#[test]
fn too_little_data_for_the_splits_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, SMALL.replace("n_days = 9", "n_days = 6")).unwrap();
    let o = skycast(&cfg, dir.path(), &["train"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn synth_and_train_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&skycast(&cfg, out, &["synth"]));
        assert_eq!(manifest_without_timing(out)["command"], "synth");
        ok(&skycast(&cfg, out, &["train", "--step", "1"]));
    }
    for f in ["data.csv", "truth.csv", "model.json", "epochs.tsv", "splits.tsv", "validation/metrics.json"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f} differs");
    }
    assert_eq!(manifest_without_timing(&a), manifest_without_timing(&b));

    // a different seed gives a different dataset
    let c = dir.path().join("c");
    ok(&skycast(&cfg, &c, &["synth", "--seed", "8"]));
    assert_ne!(read(a.join("data.csv")), read(c.join("data.csv")));
}

#[test]
fn manifest_lists_outputs_with_digests() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("o");
    ok(&skycast(&cfg, &out, &["ingest"]));
    let m = manifest_without_timing(&out);
    assert_eq!(m["command"], "ingest");
    assert_eq!(m["seeds"]["master"], 7);
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|o| o["path"].as_str().unwrap()).collect();
    for f in ["gaps.json", "splits.tsv", "windows.bin"] {
        assert!(outputs.contains(&f), "{f} not in {outputs:?}");
    }
    for o in m["outputs"].as_array().unwrap() {
        assert_eq!(o["sha256"].as_str().unwrap().len(), 64);
    }
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 16);
    // the worker count does not change the config hash
    let out2 = dir.path().join("o2");
    ok(&skycast(&cfg, &out2, &["ingest", "--workers", "3"]));
    assert_eq!(manifest_without_timing(&out2)["config_hash"], m["config_hash"]);
}

#[test]
fn baseline_only_evaluation_has_zero_skill_per_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("o");
    ok(&skycast(&cfg, &out, &["evaluate"]));
    let text = String::from_utf8(read(out.join("report/horizons.csv"))).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let fss = header.iter().position(|h| *h == "fss").unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 13);
    let horizons: Vec<&str> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(&horizons[..3], &["10", "20", "30"]);
    assert_eq!(horizons[12], "all");
    for r in &rows {
        assert_eq!(r[fss].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn trained_model_evaluates_and_forecasts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("o");
    ok(&skycast(&cfg, &out, &["train"]));
    let model = out.join("model.json");
    let ev = dir.path().join("ev");
    ok(&skycast(&cfg, &ev, &["evaluate", "--model", model.to_str().unwrap()]));
    // default evaluation range is the validation range the model was scored on
    let a: serde_json::Value = serde_json::from_slice(&read(out.join("validation/metrics.json"))).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&read(ev.join("report/metrics.json"))).unwrap();
    assert_eq!(a["aggregate"], b["aggregate"]);

    let fc = dir.path().join("fc");
    ok(&skycast(&cfg, &fc, &["forecast", "--model", model.to_str().unwrap(), "--at", "2021-05-08T18:00:00Z"]));
    let text = String::from_utf8(read(fc.join("forecast.tsv"))).unwrap();
    assert_eq!(text.lines().count(), 13);
    for l in text.lines().skip(1) {
        let cols: Vec<&str> = l.split('\t').collect();
        assert!(cols[3].parse::<f64>().unwrap() >= 0.0);
    }
    let o = skycast(&cfg, &fc, &["forecast", "--model", model.to_str().unwrap(), "--at", "last tuesday"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn interrupted_sweep_resumes_to_the_same_result() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let full = dir.path().join("full");
    ok(&skycast(&cfg, &full, &["sweep-seq"]));

    let part = dir.path().join("part");
    let cells = part.join("cells/sequence_length");
    let mut child = Command::new(BIN)
        .args(["sweep-seq", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&part)
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(120);
    loop {
        let done = std::fs::read_dir(&cells)
            .map(|d| d.filter_map(|e| e.ok()).any(|e| e.path().extension().is_some_and(|x| x == "json")))
            .unwrap_or(false);
        if done || Instant::now() > deadline || child.try_wait().unwrap().is_some() {
            break;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    let _ = child.kill();
    let _ = child.wait();
    ok(&skycast(&cfg, &part, &["sweep-seq"]));
    for f in ["sequence_length.tsv", "sequence_length.json", "sequence_length_scatter.tsv"] {
        assert_eq!(read(full.join(f)), read(part.join(f)), "{f} differs after resume");
    }
    // no temporary files are left behind
    assert!(std::fs::read_dir(&cells).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
}

#[test]
fn data_dir_variable_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_dir = dir.path().join("cfg");
    std::fs::create_dir_all(&cfg_dir).unwrap();
    let cfg = cfg_dir.join("c.toml");
    std::fs::write(&cfg, format!("{SMALL}\n[data]\npath = \"data.csv\"\n")).unwrap();
    let gen = dir.path().join("gen");
    ok(&skycast(&small_config(dir.path()), &gen, &["synth"]));
    // without the variable the path resolves next to the config and is missing
    assert_eq!(skycast(&cfg, &dir.path().join("x"), &["ingest"]).status.code(), Some(3));
    let o = Command::new(BIN)
        .env("SKYCAST_DATA_DIR", &gen)
        .args(["ingest", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("y"))
        .output()
        .unwrap();
    ok(&o);
}

#[test]
fn desk_commands_finish_in_budget() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let t = Instant::now();
    ok(&skycast(&desk_config(), &out, &["synth"]));
    let synth_s = t.elapsed().as_secs_f64();
    assert!(synth_s < 60.0, "synth took {synth_s:.1} s");
    let t = Instant::now();
    ok(&skycast(&desk_config(), &out, &["train", "--fast"]));
    let train_s = t.elapsed().as_secs_f64();
    assert!(train_s < 300.0, "train --fast took {train_s:.1} s");
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["desk.toml", "srrl.toml"] {
        skycast_core::ExperimentConfig::load(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    let full = skycast_core::ExperimentConfig::load(dir.join("srrl.toml")).unwrap();
    assert_eq!(full.splits.steps.len(), 3);
    assert_eq!(full.windows.input_len, 13);
    // 2017-09-27 local midnight through the end of the record
    let plan = skycast_core::experiments::make_splits(&full.splits, 1_506_495_600, 1_664_262_000).unwrap();
    assert_eq!(plan.steps.len(), 3);
}

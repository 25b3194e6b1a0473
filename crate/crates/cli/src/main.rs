//! `skycast`: data generation, training, evaluation and the refinement
//! sweeps, each driven by one TOML config.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use skycast_core::eval::{report, write_report};
use skycast_core::experiments::{
    self, build_model_windows, forecast_window, load_raw, make_splits, noise_ablation, poc_records, prepare,
    run_importance, sweep_representations, sweep_sequence_length, train_model, ErrorClass, ExperimentError,
    SplitPlan, TrainedModel,
};
use skycast_core::forecast::poc_forecast;
use skycast_core::ingest::{format_timestamp, parse_timestamp, write_window_cache, TimeSeriesTable};
use skycast_core::synth;
use skycast_core::ExperimentConfig;

use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "skycast", version, about = "Short-term solar irradiance forecasting")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps, overriding the config.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Short epoch budget.
    #[arg(long, global = true)]
    fast: bool,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset and its ground truth.
    Synth,
    /// Parse data, report gaps and splits, and cache the windows.
    Ingest,
    /// Train on one split step and score its validation range.
    Train {
        /// 1-based split step; defaults to the last.
        #[arg(long)]
        step: Option<usize>,
    },
    /// Score a model, or the persistence baseline alone, over a time range.
    Evaluate {
        /// Model file; without it the baseline is scored against itself.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Range start (ISO 8601); defaults to the step's validation range.
        #[arg(long)]
        from: Option<String>,
        /// Range end, exclusive.
        #[arg(long)]
        to: Option<String>,
        /// 1-based split step whose validation range is scored.
        #[arg(long)]
        step: Option<usize>,
    },
    /// Issue the 12-horizon forecast at one time.
    Forecast {
        #[arg(long)]
        model: PathBuf,
        /// Forecast time (ISO 8601); defaults to the last row of the data.
        #[arg(long)]
        at: Option<String>,
    },
    /// Permutation feature importance.
    Importance,
    /// Time and irradiance representation grid.
    SweepRep,
    /// Input sequence length sweep.
    SweepSeq,
    /// Noise channel on/off for all features and the reduced set.
    AblateNoise {
        /// Reduced feature set; defaults to the config, then to the top of
        /// a fresh importance ranking.
        #[arg(long, value_delimiter = ',')]
        top: Vec<String>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let code = match e.class() {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numerical => 4,
            ErrorClass::Other => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    }
}

type Outcome<T> = Result<T, Failure>;

/// Environment variable naming the directory that relative data paths are
/// read from.
const DATA_DIR_ENV: &str = "SKYCAST_DATA_DIR";

fn load_config(cli: &Cli) -> Outcome<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| usage("--config is required"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if cli.fast {
        cfg.fast = true;
    }
    if let (Ok(dir), Some(p)) = (std::env::var(DATA_DIR_ENV), cfg.data.path.as_ref()) {
        if p.is_relative() {
            cfg.data.path = Some(PathBuf::from(dir).join(p));
        }
    }
    Ok(cfg)
}

struct Run<'a> {
    cli: &'a Cli,
    cfg: ExperimentConfig,
    manifest: RunManifest,
}

impl Run<'_> {
    fn out(&self, name: &str) -> PathBuf {
        self.cli.out.join(name)
    }

    fn write(&mut self, name: &str, text: &str) -> Outcome<PathBuf> {
        let p = self.out(name);
        if let Some(d) = p.parent() {
            std::fs::create_dir_all(d).map_err(|e| io_failure(d, e))?;
        }
        std::fs::write(&p, text).map_err(|e| io_failure(&p, e))?;
        self.manifest.output(&self.cli.out, &p);
        Ok(p)
    }

    fn raw(&mut self) -> Outcome<TimeSeriesTable> {
        if let Some(p) = self.cfg.data_path() {
            self.manifest.input(&p);
        }
        Ok(load_raw(&self.cfg)?)
    }

    fn plan(&self, raw: &TimeSeriesTable) -> Outcome<SplitPlan> {
        Ok(make_splits(&self.cfg.splits, raw.start_epoch(), raw.end_epoch())?)
    }

    fn step_index(&self, plan: &SplitPlan, step: Option<usize>) -> Outcome<usize> {
        match step {
            None => Ok(plan.steps.len() - 1),
            Some(s) if (1..=plan.steps.len()).contains(&s) => Ok(s - 1),
            Some(s) => Err(usage(format!("--step {s} is outside 1..={}", plan.steps.len()))),
        }
    }
}

fn instant(s: &str) -> Outcome<i64> {
    parse_timestamp(s)
        .map(|t| t.timestamp())
        .ok_or_else(|| usage(format!("{s:?} is not an ISO-8601 instant")))
}

fn execute(cli: &Cli) -> Outcome<()> {
    let started = Instant::now();
    let cfg = load_config(cli)?;
    std::fs::create_dir_all(&cli.out).map_err(|e| io_failure(&cli.out, e))?;
    let mut run = Run {
        cli,
        manifest: RunManifest::new(command_name(&cli.command), &cfg),
        cfg,
    };
    if let Some(p) = &cli.config {
        run.manifest.input(p);
    }
    match &cli.command {
        Command::Synth => cmd_synth(&mut run)?,
        Command::Ingest => cmd_ingest(&mut run)?,
        Command::Train { step } => cmd_train(&mut run, *step)?,
        Command::Evaluate { model, from, to, step } => {
            cmd_evaluate(&mut run, model.as_deref(), from.as_deref(), to.as_deref(), *step)?
        }
        Command::Forecast { model, at } => cmd_forecast(&mut run, model, at.as_deref())?,
        Command::Importance => cmd_importance(&mut run)?,
        Command::SweepRep => cmd_sweep_rep(&mut run)?,
        Command::SweepSeq => cmd_sweep_seq(&mut run)?,
        Command::AblateNoise { top } => cmd_ablate(&mut run, top)?,
    }
    run.manifest.wall_time_s = started.elapsed().as_secs_f64();
    let p = cli.out.join("manifest.json");
    std::fs::write(&p, run.manifest.to_json()).map_err(|e| io_failure(&p, e))?;
    Ok(())
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Synth => "synth",
        Command::Ingest => "ingest",
        Command::Train { .. } => "train",
        Command::Evaluate { .. } => "evaluate",
        Command::Forecast { .. } => "forecast",
        Command::Importance => "importance",
        Command::SweepRep => "sweep-rep",
        Command::SweepSeq => "sweep-seq",
        Command::AblateNoise { .. } => "ablate-noise",
    }
}

fn cmd_synth(run: &mut Run) -> Outcome<()> {
    let scfg = run.cfg.synth_config();
    let (table, truth) = synth::generate(&scfg).map_err(ExperimentError::from)?;
    synth::write_dataset(&table, &truth, &run.cli.out).map_err(ExperimentError::from)?;
    for name in ["data.csv", "truth.csv"] {
        let p = run.out(name);
        run.manifest.output(&run.cli.out, &p);
    }
    let cover = table.column(synth::COVER_COLUMN).unwrap_or(&[]).to_vec();
    let summary = synth::describe_truth(&truth, &cover);
    run.write("truth_summary.json", &serde_json::to_string_pretty(&summary).expect("serializable"))?;
    println!(
        "{} rows from {}; clear fraction {:.3}, planted correlation {:.3}",
        table.len(),
        format_timestamp(table.start_epoch()),
        summary.clear_fraction,
        summary.planted_correlation
    );
    Ok(())
}

fn cmd_ingest(run: &mut Run) -> Outcome<()> {
    let raw = run.raw()?;
    let prep = prepare(&run.cfg, &raw)?;
    let ws = build_model_windows(&prep, &run.cfg, run.cfg.windows.input_len)?;
    let mut plan = run.plan(&raw)?;
    plan.count(&ws);
    run.write("gaps.json", &serde_json::to_string_pretty(&prep.gaps).expect("serializable"))?;
    run.write("splits.tsv", &plan.to_tsv())?;
    let p = run.out("windows.bin");
    let hash = write_window_cache(&ws, &p).map_err(ExperimentError::from)?;
    run.manifest.output(&run.cli.out, &p);
    println!(
        "{} rows, {} gap intervals ({:.1}% coverage), {} windows (cache {:016x})",
        raw.len(),
        prep.gaps.intervals.len(),
        100.0 * prep.gaps.coverage_fraction,
        ws.len(),
        hash
    );
    print!("{}", plan.to_tsv());
    Ok(())
}

fn write_metrics(run: &mut Run, dir: &str, records: &[skycast_core::eval::ForecastRecord], clamped: usize) -> Outcome<()> {
    let mut rep = report(records, &run.cfg.strata).map_err(ExperimentError::from)?;
    rep.clamped = clamped;
    let out = run.out(dir);
    let written = write_report(&rep, records, &out).map_err(ExperimentError::from)?;
    for p in written {
        run.manifest.output(&run.cli.out, &p);
    }
    let a = &rep.aggregate;
    println!(
        "{} windows: MAE {:.3} W/m2, POC MAE {:.3} W/m2, FSS {:.4}",
        records.len() / 12.max(1),
        a.mae,
        a.poc_mae,
        a.fss.unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_train(run: &mut Run, step: Option<usize>) -> Outcome<()> {
    let raw = run.raw()?;
    let prep = prepare(&run.cfg, &raw)?;
    let ws = build_model_windows(&prep, &run.cfg, run.cfg.windows.input_len)?;
    let mut plan = run.plan(&raw)?;
    plan.count(&ws);
    let si = run.step_index(&plan, step)?;
    let st = &plan.steps[si];
    let (train, validate) = (st.train(&ws), st.validate(&ws));
    let model = train_model(&run.cfg, &train, &validate)?;
    let p = run.out("model.json");
    model.save(&p)?;
    run.manifest.output(&run.cli.out, &p);
    run.write("splits.tsv", &plan.to_tsv())?;
    let fit = model.fit.as_ref().expect("fresh model");
    run.write("epochs.tsv", &fit.log_tsv())?;
    let (records, clamped) = model.records(&validate)?;
    println!(
        "step {}: trained on {} windows, best epoch {} of {}",
        si + 1,
        train.len(),
        fit.best_epoch,
        fit.epochs.len()
    );
    write_metrics(run, "validation", &records, clamped)
}

fn cmd_evaluate(run: &mut Run, model: Option<&Path>, from: Option<&str>, to: Option<&str>, step: Option<usize>) -> Outcome<()> {
    let model = model
        .map(|p| {
            run.manifest.input(p);
            TrainedModel::load(p)
        })
        .transpose()?;
    let raw = run.raw()?;
    let prep = prepare(&run.cfg, &raw)?;
    let input_len = model.as_ref().map_or(run.cfg.windows.input_len, |m| m.meta.input_len);
    let mut ws = build_model_windows(&prep, &run.cfg, input_len)?;
    if let Some(m) = &model {
        ws = ws.select_features(&m.meta.feature_names).map_err(ExperimentError::from)?;
    }
    let (start, end) = match (from, to) {
        (None, None) => {
            let plan = run.plan(&raw)?;
            let st = &plan.steps[run.step_index(&plan, step)?];
            (st.validate_start, st.validate_end)
        }
        (a, b) => (
            a.map(instant).transpose()?.unwrap_or(i64::MIN),
            b.map(instant).transpose()?.unwrap_or(i64::MAX),
        ),
    };
    let ws = ws.in_range(start, end);
    if ws.is_empty() {
        return Err(Failure {
            code: 3,
            message: "no admissible windows in the requested range".into(),
        });
    }
    let (records, clamped) = match &model {
        Some(m) => m.records(&ws)?,
        None => (poc_records(&ws), 0),
    };
    write_metrics(run, "report", &records, clamped)
}

fn cmd_forecast(run: &mut Run, model_path: &Path, at: Option<&str>) -> Outcome<()> {
    run.manifest.input(model_path);
    let model = TrainedModel::load(model_path)?;
    let raw = run.raw()?;
    let prep = prepare(&run.cfg, &raw)?;
    let t0 = match at {
        Some(s) => instant(s)?,
        None => raw.end_epoch() - raw.cadence_s() as i64,
    };
    let w = forecast_window(&prep, &run.cfg, &model.meta, t0)?;
    let d = model.predict(&w)?;
    let poc = poc_forecast(&w.context);
    let mut text = String::from("t0\thorizon_min\tvalid_time\tghi_pred\tghi_poc\tghi_cs\n");
    for (h, off) in model.meta.horizons_s.iter().enumerate() {
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            format_timestamp(t0),
            off / 60,
            format_timestamp(t0 + *off as i64),
            d.ghi[h],
            poc[h],
            w.context.ghi_cs_horizons[h]
        ));
    }
    run.write("forecast.tsv", &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_importance(run: &mut Run) -> Outcome<()> {
    let raw = run.raw()?;
    let plan = run.plan(&raw)?;
    let (model, _, rep) = run_importance(&run.cfg, &raw, &plan)?;
    let p = run.out("model.json");
    model.save(&p)?;
    run.manifest.output(&run.cli.out, &p);
    run.write("importance.tsv", &rep.to_tsv())?;
    run.write("importance.json", &serde_json::to_string_pretty(&rep).expect("serializable"))?;
    println!("baseline MAE {:.3} W/m2", rep.baseline_mae);
    print!("{}", rep.to_tsv());
    Ok(())
}

fn write_sweep(run: &mut Run, res: &experiments::SweepResult) -> Outcome<()> {
    let written = res.write(&run.cli.out)?;
    for p in written {
        run.manifest.output(&run.cli.out, &p);
    }
    if res.failed() > 0 {
        log::warn!("{} of {} cells failed", res.failed(), res.cells.len());
    }
    Ok(())
}

fn cmd_sweep_rep(run: &mut Run) -> Outcome<()> {
    let raw = run.raw()?;
    let plan = run.plan(&raw)?;
    let res = sweep_representations(&run.cfg, &raw, &plan, Some(&run.cli.out))?;
    write_sweep(run, &res)?;
    let grid = res.pivot("time", "irradiance");
    run.write("representation_grid.tsv", &grid)?;
    print!("{grid}");
    Ok(())
}

fn cmd_sweep_seq(run: &mut Run) -> Outcome<()> {
    let raw = run.raw()?;
    let plan = run.plan(&raw)?;
    let res = sweep_sequence_length(&run.cfg, &raw, &plan, Some(&run.cli.out))?;
    write_sweep(run, &res)?;
    let mut text = String::from("input_len\tlookback_min\tval_mae\n");
    for c in &res.cells {
        text.push_str(&format!(
            "{}\t{}\t{}\n",
            c.params["input_len"],
            c.params["lookback_min"],
            c.val_mae.map(|v| v.to_string()).unwrap_or_default()
        ));
    }
    run.write("sequence_length_scatter.tsv", &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_ablate(run: &mut Run, top: &[String]) -> Outcome<()> {
    let raw = run.raw()?;
    let plan = run.plan(&raw)?;
    let top = if !top.is_empty() {
        top.to_vec()
    } else if !run.cfg.experiments.top_features.is_empty() {
        run.cfg.experiments.top_features.clone()
    } else {
        let (_, _, rep) = run_importance(&run.cfg, &raw, &plan)?;
        run.write("importance.tsv", &rep.to_tsv())?;
        rep.top(run.cfg.experiments.top_k)
    };
    let res = noise_ablation(&run.cfg, &raw, &plan, &top, Some(&run.cli.out))?;
    write_sweep(run, &res)?;
    let table = res.pivot("model", "step");
    run.write("noise_ablation_table.tsv", &table)?;
    print!("{table}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

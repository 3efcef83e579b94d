//! The `mwad` command line.
//!
//! Exit codes: 0 on success, 1 for invalid input or configuration, 2 when a
//! valid request fails while running. Errors go to stderr as a single
//! `error[code]: message` line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{RunConfig, FORMAT_VERSION, OUT_DIR_ENV};
use crate::dataset::{load_csv, write_atomic};
use crate::error::{Error, Result};
use crate::eval::{self, ExperimentGrid, SweepAxis};
use crate::pipeline;
use crate::scoring::{self, DetectionReport, ThresholdPolicy};
use crate::synth::{self, AnomalySpec, SynthConfig};
use crate::training::{Checkpoint, TrainReport};

pub const CHECKPOINT_FILE: &str = "checkpoint.mwad";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const SCORES_FILE: &str = "scores.csv";
pub const EVAL_REPORT_FILE: &str = "eval_report.json";

#[derive(Parser, Debug)]
#[command(name = "mwad", version, about = "Multi-window anomaly detection for multivariate event time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a labeled synthetic dataset.
    Synth(SynthArgs),
    /// Train a model and write a checkpoint plus training report.
    Train(RunArgs),
    /// Score the test split with a trained checkpoint.
    Score(ScoreArgs),
    /// Evaluate a score file: threshold selection and metrics.
    Eval(EvalArgs),
    /// Run an experiment grid over one axis.
    Sweep(SweepArgs),
    /// Print a summary of a grid report.
    Report(ReportArgs),
}

/// Configuration layers shared by every pipeline command.
#[derive(Args, Debug, Default, Clone)]
pub struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override any config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub w1: Option<usize>,
    #[arg(long)]
    pub w2: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub train_ratio: Option<f64>,
    #[arg(long)]
    pub window_mode: Option<String>,
    #[arg(long = "policy")]
    pub threshold_policy: Option<String>,
}

impl ConfigArgs {
    fn overrides(&self) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("`--set {s}` is not KEY=VALUE")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        put("data", self.data.as_ref().map(|p| p.display().to_string()));
        put("out_dir", self.out_dir.as_ref().map(|p| p.display().to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("epochs", self.epochs.map(|v| v.to_string()));
        put("learning_rate", self.learning_rate.map(|v| format!("{v:?}")));
        put("w1", self.w1.map(|v| v.to_string()));
        put("w2", self.w2.map(|v| v.to_string()));
        put("hidden", self.hidden.map(|v| v.to_string()));
        put("train_ratio", self.train_ratio.map(|v| format!("{v:?}")));
        put("window_mode", self.window_mode.clone());
        put("threshold_policy", self.threshold_policy.clone());
        Ok(out)
    }

    /// Defaults, then `base` (an embedded config), then the environment
    /// output directory, the config file and the flags.
    fn resolve_over(&self, base: Option<&str>) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(text) = base {
            cfg.apply_text(text)?;
        }
        let env = std::env::var(OUT_DIR_ENV).ok();
        if let Some(dir) = env.as_deref().filter(|d| !d.is_empty()) {
            cfg.out_dir = dir.into();
        }
        if let Some(f) = &self.config {
            cfg.apply_file(f)?;
        }
        for (k, v) in self.overrides()? {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        self.resolve_over(None)
    }
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Drop the default anomaly intervals.
    #[arg(long)]
    pub clean: bool,
    /// Anomaly as `start:duration:kind:magnitude`; repeatable. Replaces the
    /// default intervals.
    #[arg(long = "anomaly", value_name = "SPEC")]
    pub anomalies: Vec<String>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Checkpoint to load; defaults to the one in the output directory.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Score CSV path; defaults to `scores.csv` in the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Score CSV to evaluate.
    #[arg(long)]
    pub scores: PathBuf,
    /// Report JSON path; defaults to `eval_report.json` in the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// `train_ratio`, `threshold`, `w1`, `w2` or `window_mode`.
    #[arg(long)]
    pub axis: String,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<f64>,
    /// Comma-separated seeds for the window-mode grid.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Grid JSON written by `sweep`.
    #[arg(long)]
    pub grid: PathBuf,
}

#[derive(Serialize)]
struct EvalReport<'a> {
    format_version: u32,
    scores_file: String,
    config: String,
    seed: u64,
    detection: &'a DetectionReport,
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return 1;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), e.to_string().replace('\n', " "));
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => cmd_synth(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Score(a) => cmd_score(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

fn parse_anomaly(s: &str) -> Result<AnomalySpec> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Config(format!("anomaly `{s}` is not start:duration:kind:magnitude"));
    if parts.len() != 4 {
        return Err(bad());
    }
    Ok(AnomalySpec::new(
        parts[0].parse().map_err(|_| bad())?,
        parts[1].parse().map_err(|_| bad())?,
        parts[2].parse()?,
        parts[3].parse().map_err(|_| bad())?,
    ))
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let mut cfg = SynthConfig::default();
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.n {
        cfg.n = v;
    }
    if let Some(v) = a.length {
        cfg.length = v;
    }
    if let Some(v) = a.noise_sigma {
        cfg.noise_sigma = v;
    }
    if a.clean || !a.anomalies.is_empty() {
        cfg.anomalies = a.anomalies.iter().map(|s| parse_anomaly(s)).collect::<Result<_>>()?;
    }
    let ds = synth::generate(&cfg)?;
    let meta = serde_json::to_string(&cfg).expect("synth config serializes");
    ds.save_csv(
        &a.out,
        &[
            format!("format_version = {FORMAT_VERSION}"),
            format!("seed = {}", cfg.seed),
            format!("synth = {meta}"),
        ],
    )?;
    println!(
        "wrote {} rows, {} features, {} anomalous to {}",
        ds.len(),
        ds.feature_count(),
        ds.anomaly_count(),
        a.out.display()
    );
    Ok(())
}

fn data_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.data
        .as_deref()
        .ok_or_else(|| Error::Config("no dataset given (use --data or `data = ...`)".into()))
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

fn cmd_train(a: &RunArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let ds = load_csv(data_path(&cfg)?, &cfg.roles())?;
    let prep = pipeline::prepare(&ds, &cfg)?;
    let (ck, report) = pipeline::fit(&prep, &cfg)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let ck_path = cfg.out_dir.join(CHECKPOINT_FILE);
    ck.save(&ck_path)?;
    #[derive(Serialize)]
    struct Out<'a> {
        format_version: u32,
        config: String,
        dropped_columns: &'a [crate::dataset::DroppedColumn],
        report: &'a TrainReport,
    }
    let out = Out {
        format_version: FORMAT_VERSION,
        config: cfg.to_kv(),
        dropped_columns: &prep.dropped,
        report: &report,
    };
    write_atomic(&cfg.out_dir.join(TRAIN_REPORT_FILE), &json_bytes(&out))?;
    println!(
        "trained on {} rows x {} features; final loss {:.6}; checkpoint {}",
        prep.train.len(),
        prep.train.feature_count(),
        report.final_loss,
        ck_path.display()
    );
    Ok(())
}

fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let pre = a.cfg.resolve()?;
    let ck_path = a.checkpoint.clone().unwrap_or_else(|| pre.out_dir.join(CHECKPOINT_FILE));
    let ck = Checkpoint::load(&ck_path)?;
    let cfg = a.cfg.resolve_over(Some(&ck.config))?;
    let ds = load_csv(data_path(&cfg)?, &cfg.roles())?;
    let series = pipeline::score_with_checkpoint(&ds, &ck, &cfg)?;
    let labels = (cfg.threshold_policy == ThresholdPolicy::BestF1InRange).then_some(&series.labels[..]);
    let det = scoring::select_threshold(&series.scores, labels, cfg.threshold_policy)?;
    let predicted = scoring::classify(&series.scores, det.threshold);
    let out = a.out.clone().unwrap_or_else(|| cfg.out_dir.join(SCORES_FILE));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut comments = vec![
        format!("format_version = {FORMAT_VERSION}"),
        format!("seed = {}", ck.seed),
        format!("threshold = {:?}", det.threshold),
    ];
    comments.extend(cfg.to_kv().lines().map(|l| format!("config.{l}")));
    scoring::save_scores(&out, &series, &predicted, &comments)?;
    println!(
        "scored {} rows; threshold {:.6} ({}); {} flagged; wrote {}",
        series.len(),
        det.threshold,
        det.policy.as_str(),
        det.predicted_anomalies,
        out.display()
    );
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let (series, _) = scoring::load_scores(&a.scores)?;
    if series.is_empty() {
        return Err(Error::Validation(format!("{} holds no scores", a.scores.display())));
    }
    let det = scoring::select_threshold(&series.scores, Some(&series.labels), cfg.threshold_policy)?;
    let report = EvalReport {
        format_version: FORMAT_VERSION,
        scores_file: a.scores.display().to_string(),
        config: cfg.to_kv(),
        seed: cfg.seed,
        detection: &det,
    };
    let out = a.out.clone().unwrap_or_else(|| cfg.out_dir.join(EVAL_REPORT_FILE));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_atomic(&out, &json_bytes(&report))?;
    let m = det.metrics.expect("labels were supplied");
    println!("policy     {}", det.policy.as_str());
    println!("threshold  {:.6}", det.threshold);
    println!(
        "range      [{:.6}, {:.6}] step {:.6}{}",
        det.range.lower,
        det.range.upper,
        det.range.slide_step,
        if det.range.degenerate { " (degenerate)" } else { "" }
    );
    println!("accuracy   {:.4}", m.accuracy);
    println!("precision  {:.4}", m.precision);
    println!("recall     {:.4}", m.recall);
    println!("f1         {:.4}", m.f1);
    let c = m.confusion;
    println!("confusion  tp {} fp {} tn {} fn {}", c.tp, c.fp, c.tn, c.fn_);
    println!("report     {}", out.display());
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let ds = load_csv(data_path(&cfg)?, &cfg.roles())?;
    let axis_name = a.axis.replace('-', "_");
    let grid = if axis_name == "window_mode" || axis_name == "window_validity" {
        let seeds = if a.seeds.is_empty() { vec![cfg.seed] } else { a.seeds.clone() };
        eval::window_validity(&ds, &cfg, &seeds, a.jobs)?
    } else {
        let axis: SweepAxis = axis_name.parse()?;
        eval::sweep(&ds, axis, &a.values, &cfg, a.jobs)?
    };
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let stem = format!("grid_{}", grid.axis);
    let json = cfg.out_dir.join(format!("{stem}.json"));
    let csv = cfg.out_dir.join(format!("{stem}.csv"));
    write_atomic(&json, grid.to_json().as_bytes())?;
    write_atomic(&csv, grid.to_csv().as_bytes())?;
    print!("{}", summarize(&grid));
    println!("wrote {} and {}", json.display(), csv.display());
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.grid).map_err(|e| Error::io(&a.grid, e))?;
    let grid = ExperimentGrid::from_json(&text)?;
    print!("{}", summarize(&grid));
    Ok(())
}

/// Human-readable grid table.
pub fn summarize(grid: &ExperimentGrid) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    writeln!(s, "{:<14} {:>6} {:>9} {:>9} {:>9} {:>9}", grid.axis, "seed", "accuracy", "precision", "recall", "f1").unwrap();
    for c in &grid.cells {
        match (&c.metrics, &c.error) {
            (Some(m), _) => writeln!(
                s,
                "{:<14} {:>6} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                c.value, c.seed, m.accuracy, m.precision, m.recall, m.f1
            )
            .unwrap(),
            (None, err) => writeln!(
                s,
                "{:<14} {:>6} failed: {}",
                c.value,
                c.seed,
                err.as_deref().unwrap_or("unknown")
            )
            .unwrap(),
        }
    }
    if grid.seeds.len() > 1 {
        for v in &grid.values {
            if let Some(f) = grid.median_f1(v) {
                writeln!(s, "median f1 {v:<10} {f:.4}").unwrap();
            }
        }
    }
    for r in &grid.reference {
        writeln!(
            s,
            "reference (published, not reproduced) {} {}: f1 {:.2}%",
            r.dataset, r.variant, r.f1_percent
        )
        .unwrap();
    }
    s
}

//! `sfselect` command-line front end.
//!
//! Subcommands: `ingest`, `synth`, `sweep`, `rank`, `report`. Progress goes to
//! stderr; files go under `--out`; stdout only carries `--json` summaries.

mod config;

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use sfselect::data::{generate_synthetic, load_csv, write_csv, CleanStats, LoadStats};
use sfselect::metrics::rank_features;
use sfselect::report::{self, ReportBundle, TableMode};
use sfselect::sweep::{run_sweep_with, ResumeState, SweepOptions, SweepPlan, SweepReport};
use sfselect::{ColumnMapping, Dataset, EvalResult, SyntheticConfig};

use crate::config::{parse_kinds, parse_serials, RunConfig};

static CANCEL: AtomicBool = AtomicBool::new(false);

/// Exit status for an interrupted sweep.
const EXIT_CANCELLED: u8 = 130;
/// Exit status for "finished, but the result is suspicious" (e.g. no rows).
const EXIT_WARNING: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "sfselect", version, about = "Feature-combination sweep for LoRaWAN SF prediction")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Global {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the sweep.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Base seed for the split and per-run model seeds (generator seed for `synth`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// z-score features for k-NN and MLR.
    #[arg(long, global = true)]
    standardize: bool,
    /// Serials to run, e.g. `6,16-18,31`.
    #[arg(long, global = true)]
    serials: Option<String>,
    /// Model kinds to run, e.g. `knn,dtc,mlr,rf`.
    #[arg(long, global = true)]
    kinds: Option<String>,
    #[arg(long, global = true)]
    train_fraction: Option<f64>,
    #[arg(long, global = true)]
    stratified: bool,
    /// Record failing runs and continue.
    #[arg(long, global = true)]
    keep_going: bool,
    /// Reuse completed runs from the checkpoint in the output directory.
    #[arg(long, global = true)]
    resume: bool,
    /// Print a JSON summary on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Input CSV.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Column mapping JSON for the input CSV.
    #[arg(long, global = true)]
    mapping: Option<PathBuf>,
    /// Use the synthetic generator with default settings.
    #[arg(long, global = true)]
    synthetic: bool,
    /// Use the synthetic generator configured by this JSON file.
    #[arg(long, global = true)]
    synthetic_config: Option<PathBuf>,
    /// Synthetic row count.
    #[arg(long, global = true)]
    rows: Option<usize>,
    /// Cap on k-NN training rows (random subsample).
    #[arg(long, global = true)]
    knn_max_train: Option<usize>,
    /// Number of random-forest trees.
    #[arg(long, global = true)]
    rf_trees: Option<usize>,
    #[arg(long, global = true)]
    log_level: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load and clean a CSV, print schema statistics.
    Ingest,
    /// Write a synthetic dataset CSV.
    Synth {
        /// Output file (default `<out>/synthetic.csv`).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Shadowing standard deviation, dB.
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Run the combination x model sweep.
    Sweep,
    /// Pearson ranking of the five features against SF.
    Rank,
    /// Render tables and figures from a sweep report.
    Report {
        /// Sweep report (default `<out>/report.json`).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Emit available rows of an incomplete sweep instead of failing.
        #[arg(long)]
        partial: bool,
    },
}

fn effective_config(g: &Global) -> Result<RunConfig> {
    let mut c = match &g.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &g.dataset {
        c.dataset = Some(d.clone());
        c.synthetic = None;
    }
    if let Some(p) = &g.synthetic_config {
        c.synthetic = Some(SyntheticConfig::from_json_file(p)?);
        c.dataset = None;
    } else if g.synthetic {
        c.synthetic.get_or_insert_with(SyntheticConfig::default);
        c.dataset = None;
    }
    if let Some(n) = g.rows {
        if c.dataset.is_some() {
            bail!("--rows applies to synthetic data only");
        }
        c.synthetic.get_or_insert_with(SyntheticConfig::default).n_rows = n;
    }
    if let Some(m) = &g.mapping {
        c.mapping = Some(m.clone());
    }
    if let Some(o) = &g.out {
        c.out = o.clone();
    }
    if let Some(w) = g.workers {
        c.workers = w;
    }
    if let Some(s) = g.seed {
        c.base_seed = s;
        c.split.seed = s;
    }
    if g.standardize {
        c.hyperparams.standardize = true;
    }
    if let Some(s) = &g.serials {
        c.serials = Some(parse_serials(s)?);
    }
    if let Some(k) = &g.kinds {
        c.kinds = Some(parse_kinds(k)?);
    }
    if let Some(f) = g.train_fraction {
        c.split.train_fraction = f;
    }
    if g.stratified {
        c.split.stratified = true;
    }
    if g.keep_going {
        c.keep_going = true;
    }
    if let Some(n) = g.knn_max_train {
        c.hyperparams.knn_max_train = Some(n);
    }
    if let Some(n) = g.rf_trees {
        c.hyperparams.rf_n_estimators = n;
    }
    if let Some(l) = &g.log_level {
        c.log_level = l.clone();
    }
    Ok(c)
}

#[derive(Debug, Serialize)]
struct Ingested {
    source: String,
    load: Option<LoadStats>,
    clean: CleanStats,
}

fn load_data(cfg: &RunConfig) -> Result<(Dataset, Ingested)> {
    cfg.check_source()?;
    if let Some(path) = &cfg.dataset {
        let mapping = match &cfg.mapping {
            Some(m) => ColumnMapping::from_json_file(m)?,
            None => ColumnMapping::default(),
        };
        log::info!("loading {}", path.display());
        let (raw, load) = load_csv(path, &mapping)?;
        let (ds, clean) = raw.clean()?;
        log::info!(
            "{} rows accepted, {} rejected while parsing, {} dropped while cleaning",
            load.accepted,
            load.rejected(),
            clean.dropped()
        );
        Ok((
            ds,
            Ingested {
                source: path.display().to_string(),
                load: Some(load),
                clean,
            },
        ))
    } else {
        let s = cfg.synthetic.as_ref().expect("checked source");
        log::info!("generating {} synthetic rows (seed {})", s.n_rows, s.seed);
        let ds = generate_synthetic(s)?;
        let clean = CleanStats {
            input_rows: ds.n_rows(),
            output_rows: ds.n_rows(),
            ..Default::default()
        };
        Ok((
            ds,
            Ingested {
                source: "synthetic".into(),
                load: None,
                clean,
            },
        ))
    }
}

fn emit_json(enabled: bool, value: &serde_json::Value) {
    if enabled {
        println!("{value}");
    }
}

fn cmd_ingest(cfg: &RunConfig, json_out: bool) -> Result<u8> {
    let (ds, ing) = load_data(cfg)?;
    let columns: Vec<serde_json::Value> = (0..ds.n_cols())
        .map(|j| {
            let col = ds.column(j);
            let n = col.len().max(1) as f64;
            let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            json!({
                "name": ds.columns()[j],
                "min": if col.is_empty() { None } else { Some(min) },
                "max": if col.is_empty() { None } else { Some(max) },
                "mean": if col.is_empty() { None } else { Some(col.iter().sum::<f64>() / n) },
            })
        })
        .collect();
    let hist: Vec<serde_json::Value> = ds
        .label_histogram()
        .into_iter()
        .map(|(sf, n)| json!({"sf": sf.value(), "count": n}))
        .collect();
    eprintln!("source: {}", ing.source);
    eprintln!("rows: {}", ds.n_rows());
    if let Some(l) = &ing.load {
        eprintln!(
            "parsed {} records: {} rejected (non-numeric {}, bad SF {})",
            l.records,
            l.rejected(),
            l.rejected_non_numeric,
            l.rejected_sf
        );
    }
    eprintln!("cleaning dropped {} rows (NaN {}, infinite {})", ing.clean.dropped(), ing.clean.nan, ing.clean.infinite);
    for c in &columns {
        eprintln!("  {:<10} min {} max {} mean {}", c["name"].as_str().unwrap_or(""), c["min"], c["max"], c["mean"]);
    }
    for (sf, n) in ds.label_histogram() {
        eprintln!("  {sf}: {n}");
    }
    emit_json(
        json_out,
        &json!({
            "command": "ingest",
            "rows": ds.n_rows(),
            "ingest": ing,
            "columns": columns,
            "labels": hist,
            "dataset_hash": ds.content_hash(),
        }),
    );
    if ds.is_empty() {
        log::warn!("dataset has no rows");
        return Ok(EXIT_WARNING);
    }
    Ok(0)
}

fn cmd_synth(cfg: &RunConfig, g: &Global, output: Option<PathBuf>, sigma: Option<f64>, json_out: bool) -> Result<u8> {
    let mut s = cfg.synthetic.clone().unwrap_or_default();
    if let Some(seed) = g.seed {
        s.seed = seed;
    }
    if let Some(sigma) = sigma {
        s.shadowing_sigma_db = sigma;
    }
    if let Some(n) = g.rows {
        s.n_rows = n;
    }
    let ds = generate_synthetic(&s)?;
    let path = output.unwrap_or_else(|| cfg.out.join("synthetic.csv"));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_csv(&path, &ds)?;
    log::info!("wrote {} rows to {}", ds.n_rows(), path.display());
    emit_json(
        json_out,
        &json!({
            "command": "synth",
            "rows": ds.n_rows(),
            "path": path,
            "dataset_hash": ds.content_hash(),
            "config": s,
        }),
    );
    Ok(0)
}

/// One checkpoint line per finished run.
#[derive(Serialize, Deserialize)]
struct CheckpointLine {
    dataset_hash: String,
    config_hash: String,
    result: EvalResult,
}

fn read_checkpoint(path: &Path, dataset_hash: &str, config_hash: &str) -> Result<Vec<EvalResult>> {
    let Ok(f) = File::open(path) else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<CheckpointLine>(&line) {
            Ok(c) if c.dataset_hash == dataset_hash && c.config_hash == config_hash => out.push(c.result),
            Ok(_) => {}
            // a run killed mid-write leaves a torn last line
            Err(e) => log::warn!("{}:{}: skipping unreadable checkpoint line ({e})", path.display(), i + 1),
        }
    }
    Ok(out)
}

fn resume_state(out: &Path, dataset_hash: &str, config_hash: &str) -> Result<ResumeState> {
    let mut results = read_checkpoint(&out.join("runs.jsonl"), dataset_hash, config_hash)?;
    let prior = out.join("report.json");
    if prior.exists() {
        match SweepReport::read_json(&prior) {
            Ok(r) if r.metadata.dataset_hash == dataset_hash && r.metadata.config_hash == config_hash => {
                for res in r.results {
                    if !results.iter().any(|x| x.serial == res.serial && x.kind == res.kind) {
                        results.push(res);
                    }
                }
            }
            Ok(_) => log::warn!("{} was produced from different inputs; not reusing it", prior.display()),
            Err(e) => log::warn!("cannot read {}: {e}", prior.display()),
        }
    }
    log::info!("resume: {} completed runs available", results.len());
    Ok(ResumeState {
        dataset_hash: dataset_hash.to_string(),
        config_hash: config_hash.to_string(),
        results,
    })
}

fn write_bundle(report: &SweepReport, cfg: &RunConfig, mode: TableMode) -> Result<Vec<PathBuf>> {
    let mut bundle = ReportBundle::from_report(report, mode)?;
    if let serde_json::Value::Object(m) = &mut bundle.metadata {
        m.insert("effective_config".into(), serde_json::to_value(cfg)?);
        m.insert("report_hash".into(), report.canonical_hash()?.into());
    }
    Ok(bundle.write(&cfg.out)?)
}

fn cmd_sweep(cfg: &RunConfig, resume: bool, json_out: bool) -> Result<u8> {
    let (ds, _) = load_data(cfg)?;
    let plan = SweepPlan {
        serials: cfg.serials.clone().unwrap_or_else(sfselect::sweep::all_serials),
        kinds: cfg.kinds.clone().unwrap_or_else(|| sfselect::ModelKind::ALL.to_vec()),
        hyperparams: cfg.hyperparams.clone(),
        split: cfg.split,
        base_seed: cfg.base_seed,
        workers: cfg.workers.max(1),
        keep_going: cfg.keep_going,
    };
    plan.validate()?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;

    let dataset_hash = ds.content_hash();
    let config_hash = plan.config_hash();
    let checkpoint_path = cfg.out.join("runs.jsonl");
    let resume_state = if resume {
        Some(resume_state(&cfg.out, &dataset_hash, &config_hash)?)
    } else {
        None
    };
    let checkpoint = OpenOptions::new()
        .create(true)
        .append(resume)
        .write(true)
        .truncate(!resume)
        .open(&checkpoint_path)
        .with_context(|| format!("opening {}", checkpoint_path.display()))?;
    let checkpoint = Mutex::new(checkpoint);
    let on_result = |r: &EvalResult| {
        let line = CheckpointLine {
            dataset_hash: dataset_hash.clone(),
            config_hash: config_hash.clone(),
            result: r.clone(),
        };
        let mut f = checkpoint.lock().expect("checkpoint lock");
        let text = serde_json::to_string(&line).expect("serializable result");
        if let Err(e) = writeln!(f, "{text}").and_then(|_| f.flush()) {
            log::error!("checkpoint write failed: {e}");
        }
    };

    let n_runs = plan.runs()?.len();
    log::info!(
        "sweep: {} runs on {} rows with {} worker(s), output {}",
        n_runs,
        ds.n_rows(),
        plan.workers,
        cfg.out.display()
    );
    let report = run_sweep_with(
        &ds,
        &plan,
        SweepOptions {
            resume: resume_state,
            on_result: Some(&on_result),
            cancel: Some(&CANCEL),
        },
    )?;

    report.write_json(cfg.out.join("report.json"))?;
    report.write_runs_csv(cfg.out.join("runs.csv"))?;
    let mode = if report.is_complete() && n_runs == 124 {
        TableMode::Strict
    } else {
        TableMode::Partial
    };
    write_bundle(&report, cfg, mode)?;

    let hash = report.canonical_hash()?;
    for f in &report.failures {
        log::error!("serial {} {} failed: {}", f.serial, f.kind, f.error);
    }
    emit_json(
        json_out,
        &json!({
            "command": "sweep",
            "runs": report.results.len(),
            "planned": n_runs,
            "failures": report.failures,
            "cancelled": report.cancelled,
            "report_hash": hash,
            "out": cfg.out,
        }),
    );
    if report.cancelled {
        log::warn!("interrupted: wrote a partial report with {} of {} runs", report.results.len(), n_runs);
        return Ok(EXIT_CANCELLED);
    }
    if !report.failures.is_empty() {
        return Ok(1);
    }
    log::info!("done: {} runs, report hash {}", report.results.len(), &hash[..16]);
    Ok(0)
}

fn cmd_rank(cfg: &RunConfig, json_out: bool) -> Result<u8> {
    let (ds, _) = load_data(cfg)?;
    let cr = rank_features(&ds)?;
    report::emit_ranking(&cr, &cfg.out)?;
    for f in cr.ranked() {
        eprintln!(
            "{}. {:<10} r = {:+.4}{}",
            f.rank,
            f.feature.label(),
            f.r,
            if f.degenerate { " (constant)" } else { "" }
        );
    }
    emit_json(json_out, &json!({"command": "rank", "ranking": cr}));
    Ok(0)
}

fn cmd_report(cfg: &RunConfig, path: Option<PathBuf>, partial: bool, json_out: bool) -> Result<u8> {
    let path = path.unwrap_or_else(|| cfg.out.join("report.json"));
    let report = SweepReport::read_json(&path).with_context(|| format!("reading {}", path.display()))?;
    let mode = if partial { TableMode::Partial } else { TableMode::Strict };
    let written = write_bundle(&report, cfg, mode)?;
    for p in &written {
        log::info!("wrote {}", p.display());
    }
    emit_json(
        json_out,
        &json!({"command": "report", "files": written, "report_hash": report.canonical_hash()?}),
    );
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    let cfg = effective_config(&cli.global)?;
    let json_out = cli.global.json;
    match cli.command {
        Command::Ingest => cmd_ingest(&cfg, json_out),
        Command::Synth { output, sigma } => cmd_synth(&cfg, &cli.global, output, sigma, json_out),
        Command::Sweep => cmd_sweep(&cfg, cli.global.resume, json_out),
        Command::Rank => cmd_rank(&cfg, json_out),
        Command::Report { report, partial } => cmd_report(&cfg, report, partial, json_out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = cli
        .global
        .log_level
        .clone()
        .or_else(|| {
            cli.global
                .config
                .as_ref()
                .and_then(|p| RunConfig::from_file(p).ok())
                .map(|c| c.log_level)
        })
        .unwrap_or_else(|| "info".into());
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Err(e) = ctrlc::set_handler(|| {
        if CANCEL.swap(true, Ordering::SeqCst) {
            std::process::exit(i32::from(EXIT_CANCELLED));
        }
        eprintln!("interrupt: finishing running jobs, press Ctrl-C again to abort");
    }) {
        log::warn!("cannot install Ctrl-C handler: {e}");
    }

    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let mut msg = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !msg.ends_with(&cause) {
                    if !msg.is_empty() {
                        msg.push_str(": ");
                    }
                    msg.push_str(&cause);
                }
            }
            eprintln!("{}", json!({"error": msg}));
            ExitCode::from(1)
        }
    }
}

//! The `kanfraud` command line: assess, tune, train, evaluate, estimate.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::data::{self, Dataset, PipelineConfig, Prepared};
use crate::decision::{self, quick_decision};
use crate::error::{Error, Result};
use crate::kan::{KanConfig, KanModel};
use crate::metrics::{self, render_report, ReportFormat, CSV_HEADER};
use crate::pca::scatter_csv;
use crate::plot;
use crate::seed::{stage_seed, Stage};
use crate::tuner::{self, EstimateMode, TunerConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_SUITABLE: i32 = 10;
pub const EXIT_INVALID_CONFIG: i32 = 11;
pub const EXIT_IO: i32 = 12;
pub const EXIT_DATA: i32 = 13;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "kanfraud", version, about = "Kolmogorov-Arnold networks for fraud detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quick suitability check on the two leading principal components.
    Assess {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Minimum held-out balanced accuracy for a positive verdict.
        #[arg(long, default_value_t = decision::DEFAULT_THRESHOLD)]
        threshold: f64,
        /// Boundary interval counts to try.
        #[arg(long, value_delimiter = ',', default_values_t = decision::DEFAULT_GRIDS)]
        grids: Vec<usize>,
    },
    /// Choose a network configuration.
    Tune {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        mode: TuneMode,
        /// Training settings (epochs, learning rate, threshold) for every trial.
        #[arg(long)]
        kan_config: Option<PathBuf>,
        /// Search space and GA settings.
        #[arg(long)]
        tuner_config: Option<PathBuf>,
        /// Train at most this many grid configurations.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Train a network and save it.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Network configuration; the pyramid heuristic when omitted.
        #[arg(long)]
        kan_config: Option<PathBuf>,
        /// Model output path; `<out-dir>/model.json` when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score a saved model on the test split.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        model: PathBuf,
    },
    /// Estimate the cost of an exhaustive grid search.
    Estimate {
        /// Fastest observed training time in seconds.
        #[arg(long)]
        shortest: f64,
        /// Slowest observed training time in seconds.
        #[arg(long)]
        longest: f64,
        /// Number of configurations.
        #[arg(long, default_value_t = 14_112)]
        count: u64,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TuneMode {
    Heuristic,
    Ga,
    Grid,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Pipeline settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long)]
    pub positive_label: Option<String>,
    /// Per-class row cap used when balancing.
    #[arg(long)]
    pub cap: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Master seed; every stage seed is derived from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value = "kanfraud-out")]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "text")]
    pub format: ReportFormat,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_)
        | Error::InvalidParameter(_)
        | Error::InvalidRange { .. }
        | Error::UnsupportedDegree(_)
        | Error::InvalidTimes { .. } => EXIT_INVALID_CONFIG,
        Error::Io { .. } | Error::MissingFile(_) | Error::ModelFormat(_) => EXIT_IO,
        _ => EXIT_DATA,
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID_CONFIG } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Assess {
            data,
            run,
            threshold,
            grids,
        } => cmd_assess(&data, &run, threshold, &grids),
        Command::Tune {
            data,
            run,
            mode,
            kan_config,
            tuner_config,
            budget,
            epochs,
        } => cmd_tune(&data, &run, mode, kan_config.as_deref(), tuner_config.as_deref(), budget, epochs),
        Command::Train {
            data,
            run,
            kan_config,
            model,
            epochs,
        } => cmd_train(&data, &run, kan_config.as_deref(), model.as_deref(), epochs),
        Command::Evaluate { data, run, model } => cmd_evaluate(&data, &run, &model),
        Command::Estimate {
            shortest,
            longest,
            count,
            run,
        } => cmd_estimate(shortest, longest, count, &run),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the resolved settings.
    pub config_digest: String,
    pub seeds: BTreeMap<String, u64>,
    pub artifact_paths: Vec<PathBuf>,
    /// SHA-256 of each artifact, keyed by path.
    pub artifact_digests: BTreeMap<String, String>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects artifacts, seeds and stage timings for one invocation.
struct Run {
    out_dir: PathBuf,
    manifest: RunManifest,
    stage_start: Instant,
}

impl Run {
    fn start(command: &str, args: &RunArgs, settings: serde_json::Value, master_seed: Option<u64>) -> Result<Run> {
        if let Some(jobs) = args.jobs {
            if jobs == 0 {
                return Err(Error::InvalidParameter("--jobs must be >= 1".into()));
            }
            if rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().is_err() {
                log::warn!("thread pool already initialized; --jobs ignored");
            }
        }
        std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
        let seeds = master_seed
            .map(|m| {
                std::iter::once(("master".to_string(), m))
                    .chain(Stage::ALL.iter().map(|&s| (s.name().to_string(), stage_seed(m, s))))
                    .collect()
            })
            .unwrap_or_default();
        Ok(Run {
            out_dir: args.out_dir.clone(),
            manifest: RunManifest {
                command: command.into(),
                config_digest: sha256_hex(settings.to_string().as_bytes()),
                seeds,
                artifact_paths: Vec::new(),
                artifact_digests: BTreeMap::new(),
                timings: BTreeMap::new(),
            },
            stage_start: Instant::now(),
        })
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.manifest
            .timings
            .insert(stage.into(), (now - self.stage_start).as_secs_f64());
        self.stage_start = now;
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        self.write_to(self.out_dir.join(name), contents)
    }

    fn write_to(&mut self, path: PathBuf, contents: &str) -> Result<PathBuf> {
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.manifest
            .artifact_digests
            .insert(path.display().to_string(), sha256_hex(contents.as_bytes()));
        self.manifest.artifact_paths.push(path.clone());
        Ok(path)
    }

    fn finish(self) -> Result<()> {
        let path = self.out_dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Config file values, overridden by explicit flags.
fn resolve_pipeline(data: &DataArgs, seed: Option<u64>) -> Result<PipelineConfig> {
    let mut cfg = match &data.config {
        Some(path) => PipelineConfig::from_toml(&read_text(path)?)?,
        None => PipelineConfig::default(),
    };
    if let Some(l) = &data.label_column {
        cfg.label_column.clone_from(l);
    }
    if let Some(p) = &data.positive_label {
        cfg.positive_label.clone_from(p);
    }
    if let Some(c) = data.cap {
        cfg.cap = c;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn load(data: &DataArgs, cfg: &PipelineConfig) -> Result<Dataset> {
    data::load_numeric(&data.input, &cfg.label_column, &cfg.positive_label)
}

fn prepare(dataset: &Dataset, cfg: &PipelineConfig) -> Result<Prepared> {
    data::prepare(
        dataset,
        cfg.cap,
        cfg.fractions,
        stage_seed(cfg.seed, Stage::Balance),
        stage_seed(cfg.seed, Stage::Split),
    )
}

fn input_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn cmd_assess(data: &DataArgs, args: &RunArgs, threshold: f64, grids: &[usize]) -> Result<i32> {
    let cfg = resolve_pipeline(data, args.seed)?;
    let settings = json!({
        "pipeline": cfg, "threshold": threshold, "grids": grids, "input": input_digest(&data.input)?,
    });
    let mut run = Run::start("assess", args, settings, Some(cfg.seed))?;
    let dataset = load(data, &cfg)?;
    let (balanced, _) = data::balance(&dataset, cfg.cap, stage_seed(cfg.seed, Stage::Balance))?;
    run.lap("load");
    let outcome = quick_decision(&balanced, grids, threshold, stage_seed(cfg.seed, Stage::Assess))?;
    run.lap("assess");

    let report = &outcome.report;
    run.write("verdict.json", &report.to_json())?;
    run.write("verdict.txt", &report.to_text())?;
    run.write("pca.json", &(serde_json::to_string_pretty(&outcome.pca)? + "\n"))?;
    run.write("pca_scatter.csv", &scatter_csv(&outcome.points, &outcome.labels))?;
    run.write(
        "pca_scatter.svg",
        &plot::scatter_svg(&outcome.points, &outcome.labels, "Two-component projection"),
    )?;
    match args.format {
        ReportFormat::Json => print!("{}", report.to_json()),
        _ => print!("{}", report.to_text()),
    }
    run.finish()?;
    Ok(if report.suitable { EXIT_OK } else { EXIT_NOT_SUITABLE })
}

fn training_base(kan_config: Option<&Path>, epochs: Option<usize>, master: u64) -> Result<KanConfig> {
    let mut base = match kan_config {
        Some(path) => KanConfig::from_toml(&read_text(path)?)?,
        None => KanConfig::new(vec![2, 1], 3, 5),
    };
    if let Some(e) = epochs {
        base.epochs = e;
    }
    base.seed = stage_seed(master, Stage::ModelInit);
    Ok(base)
}

fn cmd_tune(
    data: &DataArgs,
    args: &RunArgs,
    mode: TuneMode,
    kan_config: Option<&Path>,
    tuner_config: Option<&Path>,
    budget: Option<usize>,
    epochs: Option<usize>,
) -> Result<i32> {
    let cfg = resolve_pipeline(data, args.seed)?;
    let mut tcfg = match tuner_config {
        Some(path) => TunerConfig::from_toml(&read_text(path)?)?,
        None => TunerConfig::default(),
    };
    tcfg.ga.seed = stage_seed(cfg.seed, Stage::Search);
    let base = training_base(kan_config, epochs, cfg.seed)?;
    base.validate()?;
    let settings = json!({
        "pipeline": cfg, "mode": mode, "tuner": tcfg, "training": base, "budget": budget,
        "input": input_digest(&data.input)?,
    });
    let mut run = Run::start("tune", args, settings, Some(cfg.seed))?;
    let dataset = load(data, &cfg)?;
    let prepared = prepare(&dataset, &cfg)?;
    let n_features = prepared.split.n_features();
    run.lap("prepare");

    let best = match mode {
        TuneMode::Heuristic => {
            let h = tuner::heuristic_config(n_features)?;
            KanConfig {
                width: h.width,
                k: h.k,
                grid: h.grid,
                ..base
            }
        }
        TuneMode::Grid | TuneMode::Ga => {
            let trials = if mode == TuneMode::Grid {
                tuner::grid_search(&tcfg.space, &base, &prepared.split, budget)?
            } else {
                let outcome = tuner::ga_search(&tcfg.space, &tcfg.ga, &base, &prepared.split)?;
                run.write("ga_history.json", &(serde_json::to_string_pretty(&outcome.history)? + "\n"))?;
                outcome.trials
            };
            run.lap("search");
            run.write("trials.csv", &tuner::trials_csv(&trials))?;
            run.write("trials.json", &(serde_json::to_string_pretty(&trials)? + "\n"))?;
            run.write("trial_timings.csv", &tuner::trial_timings_csv(&trials))?;
            match args.format {
                ReportFormat::Text => print!("{}", tuner::trials_table(&trials)),
                ReportFormat::Csv => print!("{}", tuner::trials_csv(&trials)),
                ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&trials)?),
            }
            let top = trials.first().ok_or_else(|| Error::InvalidConfig("search produced no trials".into()))?;
            top.genome.config(&base, n_features)
        }
    };
    let text = best.to_toml();
    run.write("best_config.toml", &text)?;
    if mode == TuneMode::Heuristic {
        print!("{text}");
    }
    run.finish()?;
    Ok(EXIT_OK)
}

fn training_log_csv(model: &KanModel) -> String {
    let mut out = String::from("epoch,loss,valid_f1\n");
    for r in &model.training_log {
        let f1 = r.valid_f1.map_or_else(|| "undefined".to_string(), |v| v.to_string());
        writeln!(out, "{},{},{}", r.epoch, r.loss, f1).unwrap();
    }
    out
}

fn check_width(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn cmd_train(
    data: &DataArgs,
    args: &RunArgs,
    kan_config: Option<&Path>,
    model_path: Option<&Path>,
    epochs: Option<usize>,
) -> Result<i32> {
    let cfg = resolve_pipeline(data, args.seed)?;
    let base = training_base(kan_config, epochs, cfg.seed)?;
    let settings = json!({
        "pipeline": cfg, "kan": kan_config.map(|_| &base), "epochs": epochs,
        "input": input_digest(&data.input)?,
    });
    let mut run = Run::start("train", args, settings, Some(cfg.seed))?;
    let dataset = load(data, &cfg)?;
    let prepared = prepare(&dataset, &cfg)?;
    let n_features = prepared.split.n_features();
    run.lap("prepare");

    let config = match kan_config {
        Some(_) => base,
        None => {
            let h = tuner::heuristic_config(n_features)?;
            KanConfig {
                width: h.width,
                k: h.k,
                grid: h.grid,
                ..base
            }
        }
    };
    check_width(config.input_dim(), n_features)?;
    let mut model = KanModel::new(config)?;
    model.train(&prepared.split.train, &prepared.split.valid)?;
    run.lap("train");

    let path = model_path.map_or_else(|| run.out_dir.join("model.json"), Path::to_path_buf);
    run.write_to(path, &model.to_json())?;
    run.write("training_log.csv", &training_log_csv(&model))?;
    run.write("kan_config.toml", &model.config.to_toml())?;
    let valid = model.evaluate(&prepared.split.valid)?;
    println!(
        "trained {} (k {}, grid {}); best epoch {}, validation F1 {}",
        metrics::format_width(&model.config.width),
        model.config.k,
        model.config.grid,
        model.best_epoch.map_or_else(|| "none".into(), |e| e.to_string()),
        valid.f1.map_or_else(|| metrics::UNDEFINED.to_string(), |f| format!("{f:.4}")),
    );
    run.finish()?;
    Ok(EXIT_OK)
}

fn cmd_evaluate(data: &DataArgs, args: &RunArgs, model_path: &Path) -> Result<i32> {
    let cfg = resolve_pipeline(data, args.seed)?;
    let settings = json!({
        "pipeline": cfg, "model": input_digest(model_path)?, "input": input_digest(&data.input)?,
    });
    let mut run = Run::start("evaluate", args, settings, Some(cfg.seed))?;
    let model = KanModel::load(model_path)?;
    let dataset = load(data, &cfg)?;
    let prepared = prepare(&dataset, &cfg)?;
    check_width(model.input_dim(), prepared.split.n_features())?;
    run.lap("prepare");

    let report = model.evaluate(&prepared.split.test)?;
    let baseline = metrics::logistic_baseline(&prepared.split, stage_seed(cfg.seed, Stage::Baseline))?;
    run.lap("evaluate");

    let summary = model.config.summary();
    for (name, format) in [("report.txt", ReportFormat::Text), ("report.json", ReportFormat::Json), ("report.csv", ReportFormat::Csv)] {
        run.write(name, &render_report(&report, Some(&summary), format))?;
    }
    run.write("confusion.csv", &metrics::confusion_csv(&report.counts))?;
    run.write("confusion.svg", &plot::confusion_svg(&report.counts, "Test confusion matrix"))?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = std::iter::once("Model").chain(CSV_HEADER).collect();
    w.write_record(&header)?;
    let mut kan_row = vec![
        "KAN".to_string(),
        metrics::format_width(&summary.width),
        summary.k.to_string(),
        summary.grid.to_string(),
    ];
    kan_row.extend(metrics::csv_metric_fields(&report));
    w.write_record(&kan_row)?;
    let mut base_row = vec!["Logistic regression".to_string(), String::new(), String::new(), String::new()];
    base_row.extend(metrics::csv_metric_fields(&baseline));
    w.write_record(&base_row)?;
    let comparison = String::from_utf8(w.into_inner().map_err(|e| Error::InvalidParameter(e.to_string()))?)
        .expect("csv output is utf8");
    run.write("comparison.csv", &comparison)?;

    print!("{}", render_report(&report, Some(&summary), args.format));
    run.finish()?;
    Ok(EXIT_OK)
}

fn cmd_estimate(shortest: f64, longest: f64, count: u64, args: &RunArgs) -> Result<i32> {
    let settings = json!({ "shortest": shortest, "longest": longest, "count": count });
    let mut run = Run::start("estimate", args, settings, None)?;
    let rounded = tuner::estimate_search_time(shortest, longest, count, EstimateMode::Rounded)?;
    let exact = tuner::estimate_search_time(shortest, longest, count, EstimateMode::Exact)?;
    let doc = json!({ "count": count, "rounded": rounded, "exact": exact });
    let json_text = serde_json::to_string_pretty(&doc)? + "\n";
    let mut text = String::new();
    for (label, e) in [("rounded", rounded), ("exact", exact)] {
        writeln!(
            text,
            "{label}: mean {} s x {count} = {} s = {} hours",
            e.mean_s, e.total_s, e.total_h
        )
        .unwrap();
    }
    run.write("estimate.json", &json_text)?;
    match args.format {
        ReportFormat::Json => print!("{json_text}"),
        ReportFormat::Csv => {
            println!("mode,mean_s,total_s,total_h");
            println!("rounded,{},{},{}", rounded.mean_s, rounded.total_s, rounded.total_h);
            println!("exact,{},{},{}", exact.mean_s, exact.total_s, exact.total_h);
        }
        ReportFormat::Text => print!("{text}"),
    }
    run.finish()?;
    Ok(EXIT_OK)
}

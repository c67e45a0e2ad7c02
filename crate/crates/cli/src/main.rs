//! `hids`: batch front end for training, tuning, evaluating and scoring the
//! hybrid intrusion detector.

mod report;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};

use hids_core::dataio::Dataset;
use hids_core::pipeline::{
    self, evaluate, load_data, optimize_pipeline, run_training, write_evaluation, ArtifactSink, PipelineConfig,
    TrainedBundle,
};
use hids_core::pso::write_trace_csv;
use hids_core::synth::{self, SynthKind};
use hids_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "hids", version, about = "Hybrid SOM + DBN + autoencoder intrusion detection")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; created if missing.
    #[arg(long, global = true, default_value = "hids-out")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Dotted-path override, e.g. `som.eta0=0.05`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, short, global = true, conflicts_with = "verbose")]
    quiet: bool,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse, label-map and normalize the training data.
    Prepare,
    /// Run the configured feature selection on the prepared data.
    SelectFeatures,
    /// Train the full pipeline and evaluate it on the held-out rows.
    Train,
    /// Search hyperparameters with PSO and write the best configuration.
    Optimize,
    /// Evaluate a trained bundle on a labeled file.
    Evaluate {
        #[arg(long)]
        bundle: PathBuf,
        /// Labeled test file; defaults to the configured test path.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Write one verdict per input record.
    Score {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Write a synthetic flow table in a builtin schema's file layout.
    Generate {
        /// nsl-kdd, unsw-nb15 or ciciot2023.
        #[arg(long, default_value = "nsl-kdd")]
        kind: String,
        #[arg(long, default_value_t = 10_000)]
        rows: usize,
        /// Raw labels to draw from; all when omitted.
        #[arg(long, value_delimiter = ',')]
        labels: Vec<String>,
    },
    /// Summarize the artifacts of a training run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Io { .. } | Error::Config(_) => 2,
        Error::Numerical(_) => 4,
        _ => 3,
    }
}

fn init_logging(c: &Common) {
    let level = if c.quiet {
        log::LevelFilter::Error
    } else if c.verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Info
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("HIDS_LOG")
        .format_timestamp(None)
        .init();
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("HIDS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("HIDS_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn load_config(c: &Common) -> Result<PipelineConfig> {
    let base = match &c.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let mut cfg = base.with_overrides(&c.overrides)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(c: &Common) -> Result<ArtifactSink> {
    ArtifactSink::new(Some(&c.out)).map_err(|e| Error::Config(format!("output directory is not writable: {e}")))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn cmd_prepare(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let sink = out_dir(c)?;
    let data = load_data(&cfg)?;
    let (encoder, norm, normalized) = pipeline::preprocess(&cfg, &data.train)?;
    normalized.write_csv(c.out.join("prepared.csv"))?;
    sink.json("norm_params.json", &norm)?;
    sink.json("encoder.json", &encoder)?;
    sink.json(
        "prepare_report.json",
        &serde_json::json!({
            "schema": data.schema.id,
            "rows": data.train.n_rows(),
            "malformed_rows": data.malformed,
            "raw_columns": data.train.n_features(),
            "encoded_columns": normalized.n_features(),
            "class_counts": data.train.label_histogram(),
        }),
    )?;
    info!("prepared {} rows x {} columns", normalized.n_rows(), normalized.n_features());
    Ok(())
}

fn cmd_select(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let sink = out_dir(c)?;
    let data = load_data(&cfg)?;
    let (_, norm, normalized) = pipeline::preprocess(&cfg, &data.train)?;
    let (subset, trace) = pipeline::select_features(&cfg, &normalized)?;
    sink.json("norm_params.json", &norm)?;
    sink.json("feature_subset.json", &subset)?;
    if !trace.is_empty() {
        sink.json("wrapper_trace.json", &trace)?;
    }
    println!("{}", subset.names.join(","));
    Ok(())
}

fn cmd_train(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    out_dir(c)?;
    let run = run_training(&cfg, Some(&c.out))?;
    let r = &run.evaluation.report;
    println!(
        "accuracy {:.4}  macro-f1 {}  bundle {}",
        r.accuracy,
        r.macro_avg.metrics.f1.map_or("n/a".into(), |v| format!("{v:.4}")),
        c.out.join("bundle.hids").display()
    );
    Ok(())
}

fn cmd_optimize(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let sink = out_dir(c)?;
    let data = load_data(&cfg)?;
    let outcome = optimize_pipeline(&cfg, &data)?;
    sink.text("best_config.toml", &outcome.config.to_toml()?)?;
    if let Some(res) = &outcome.result {
        sink.csv("pso_trace.csv", |w| write_trace_csv(w, &res.trace))?;
        sink.json(
            "optimize.json",
            &serde_json::json!({
                "best_fitness": res.best_fitness,
                "best_params": res.best_params,
                "evaluations": outcome.evaluations,
            }),
        )?;
        println!("best fitness {:.5} after {} evaluations", res.best_fitness, outcome.evaluations);
    }
    Ok(())
}

fn load_bundle(path: &Path) -> Result<TrainedBundle> {
    TrainedBundle::load(path)
}

fn cmd_evaluate(c: &Common, bundle: &Path, input: Option<&Path>) -> Result<()> {
    let b = load_bundle(bundle)?;
    let input = match input {
        Some(p) => p.to_path_buf(),
        None => load_config(c)?
            .data
            .test
            .ok_or_else(|| Error::Config("no --input given and data.test is not set".into()))?,
    };
    let sink = out_dir(c)?;
    let test: Dataset = b.load_records(&input, false)?;
    let eval = evaluate(&b, &test)?;
    write_evaluation(&sink, &b, &eval)?;
    println!("accuracy {:.4} on {} rows", eval.report.accuracy, eval.report.samples);
    Ok(())
}

fn cmd_score(c: &Common, bundle: &Path, input: &Path) -> Result<()> {
    let b = load_bundle(bundle)?;
    let sink = out_dir(c)?;
    let ds = b.load_records(input, true)?;
    let verdicts = b.score(&ds)?;
    let path = sink.path("verdicts.csv").expect("sink has a directory");
    let file = fs::File::create(&path).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    b.write_verdicts(BufWriter::new(file), &verdicts)?;
    let flagged = verdicts.iter().filter(|v| v.anomaly_flag).count();
    info!("scored {} records, {flagged} flagged anomalous", verdicts.len());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    init_threads()?;
    let c = &cli.common;
    match &cli.command {
        Command::Prepare => cmd_prepare(c),
        Command::SelectFeatures => cmd_select(c),
        Command::Train => cmd_train(c),
        Command::Optimize => cmd_optimize(c),
        Command::Evaluate { bundle, input } => cmd_evaluate(c, bundle, input.as_deref()),
        Command::Score { bundle, input } => cmd_score(c, bundle, input),
        Command::Generate { kind, rows, labels } => {
            let kind = SynthKind::parse(kind).ok_or_else(|| Error::Config(format!("unknown synthetic kind '{kind}'")))?;
            out_dir(c)?;
            let seed = c.seed.unwrap_or(42);
            let labels: Vec<&str> = labels.iter().map(String::as_str).collect();
            let path = c.out.join(format!("{}.csv", kind.schema_id()));
            synth::write_csv(kind, *rows, seed, (!labels.is_empty()).then_some(&labels[..]), &path)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Report { run } => {
            out_dir(c)?;
            let summary = report::summarize(run, &c.out)?;
            for w in &summary.missing {
                warn!("no artifacts for stage {w}");
            }
            write_file(&c.out.join("summary.md"), &summary.markdown)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli.common);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

//! End-to-end orchestration: preprocessing, feature selection, autoencoder
//! compression, SOM anomaly flagging, DBN classification, verdict
//! integration, evaluation and PSO search over the whole chain.

mod artifacts;
mod bundle;
mod config;
mod optimize;

pub use artifacts::{write_evaluation, write_training_artifacts, ArtifactSink};
pub use bundle::{bundle_digest, TrainedBundle, FORMAT_MAJOR, FORMAT_MINOR, MAGIC, TIMESTAMP_RANGE};
pub use config::{
    default_space, AeConfig, DataConfig, DbnConfig, FeatureConfig, FitnessWeights, IntegrationConfig,
    PipelineConfig, Policy, PreprocessConfig, PsoConfig, SearchDim, SomConfig, ThresholdOn,
};
pub use optimize::{apply_params, optimize_pipeline, pipeline_fitness, reduced_budget, FitnessEval, OptimizeOutcome};

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::autoenc::{AeTrace, AeTrainConfig, Autoencoder};
use crate::dataio::{
    map_labels, normalize, apply_norm, parse_dataset_with, split, stratified_subsample, AttackTaxonomy,
    CategoricalEncoder, Dataset, NormParams, ParseOptions, Schema,
};
use crate::dbn::{self, DbnModel};
use crate::featsel::{self, FeatureSubset, SelectMethod, WrapperRound};
use crate::metrics::{auc_roc, basic_metrics, confusion, multiclass_report, roc_curve, MetricsReport, RocPoint};
use crate::som::{AnomalyModel, SomGrid, SomSchedule};
use crate::{Error, Result};

pub const UNKNOWN_ATTACK: &str = "unknown-attack";

/// Parsed, label-mapped data ready for training.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub schema: Schema,
    pub taxonomy: Option<AttackTaxonomy>,
    pub train: Dataset,
    pub test: Option<Dataset>,
    pub malformed: usize,
}

fn stage<T>(name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| match e {
        Error::Stage { .. } => e,
        other => Error::Stage {
            stage: name,
            source: Box::new(other),
        },
    })
}

pub fn resolve_taxonomy(data: &DataConfig, schema: &Schema) -> Result<Option<AttackTaxonomy>> {
    match data.taxonomy.as_deref() {
        Some("none") => Ok(None),
        Some(id) => AttackTaxonomy::resolve(id).map(Some),
        None => {
            let id = if schema.id.starts_with("nsl-kdd") { "nsl-kdd" } else { schema.id.as_str() };
            Ok(AttackTaxonomy::builtin(id).ok())
        }
    }
}

/// Maps raw labels through the taxonomy and applies the category filter.
pub fn label_dataset(ds: &Dataset, data: &DataConfig, taxonomy: Option<&AttackTaxonomy>) -> Result<Dataset> {
    let mapped = match taxonomy {
        Some(t) => map_labels(ds, t, data.label_mode)?,
        None => ds.clone(),
    };
    if data.keep_labels.is_empty() {
        return Ok(mapped);
    }
    let keep: Vec<&str> = data.keep_labels.iter().map(String::as_str).collect();
    mapped.filter_labels(&keep)
}

/// Parses one labeled file with the configured schema and taxonomy.
pub fn load_labeled(path: &Path, data: &DataConfig, schema: &Schema, taxonomy: Option<&AttackTaxonomy>) -> Result<(Dataset, usize)> {
    let (ds, report) = parse_dataset_with(path, schema, &ParseOptions::default())?;
    for issue in report.malformed.iter().take(5) {
        warn!("{}: skipped line {}: {}", path.display(), issue.line, issue.message);
    }
    Ok((label_dataset(&ds, data, taxonomy)?, report.malformed.len()))
}

/// Loads the training file (and test file if configured), subsampling the
/// training rows when requested.
pub fn load_data(cfg: &PipelineConfig) -> Result<PreparedData> {
    stage("load", || {
        let schema = Schema::resolve(&cfg.data.schema)?;
        let taxonomy = resolve_taxonomy(&cfg.data, &schema)?;
        let train_path = cfg
            .data
            .train
            .as_ref()
            .ok_or_else(|| Error::Config("data.train is not set".into()))?;
        let (mut train, mut malformed) = load_labeled(train_path, &cfg.data, &schema, taxonomy.as_ref())?;
        if cfg.data.subsample > 0 && cfg.data.subsample < train.n_rows() {
            train = stratified_subsample(&train, cfg.data.subsample, cfg.seed)?;
        }
        let test = match &cfg.data.test {
            Some(p) => {
                let (t, m) = load_labeled(p, &cfg.data, &schema, taxonomy.as_ref())?;
                malformed += m;
                Some(t)
            }
            None => None,
        };
        Ok(PreparedData {
            schema,
            taxonomy,
            train,
            test,
            malformed,
        })
    })
}

/// Per-stage diagnostics of one training run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageReports {
    pub train_rows: usize,
    pub class_counts: BTreeMap<String, usize>,
    pub encoded_columns: usize,
    pub subset: Option<FeatureSubset>,
    pub wrapper_trace: Vec<WrapperRound>,
    pub ae_trace: AeTrace,
    pub som_trace: Vec<f64>,
    pub som_u_matrix: Vec<Vec<f64>>,
    pub som_hits: Vec<Vec<u64>>,
    pub som_threshold: f64,
    pub dbn_pretrain: Vec<Vec<f64>>,
    pub dbn_finetune: Vec<f64>,
    /// Wall-clock seconds per stage; not part of any determinism contract.
    pub timings: Vec<(String, f64)>,
}

fn timed<T>(reports: &mut StageReports, name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = stage(name, f)?;
    let secs = start.elapsed().as_secs_f64();
    info!("stage {name} finished in {secs:.2}s");
    reports.timings.push((name.to_string(), secs));
    Ok(out)
}

fn to_rows<T: Copy>(a: &Array2<T>) -> Vec<Vec<T>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

/// Fits the categorical encoder and normalization on `train`.
pub fn preprocess(cfg: &PipelineConfig, train: &Dataset) -> Result<(CategoricalEncoder, NormParams, Dataset)> {
    let encoder = CategoricalEncoder::fit(train, cfg.preprocess.encoding);
    let (encoded, _) = encoder.transform(train)?;
    let (normalized, norm) = normalize(&encoded, cfg.preprocess.norm)?;
    Ok((encoder, norm, normalized))
}

/// Runs the configured feature selection on normalized data.
pub fn select_features(cfg: &PipelineConfig, normalized: &Dataset) -> Result<(FeatureSubset, Vec<WrapperRound>)> {
    let f = &cfg.features;
    let out = match f.method {
        SelectMethod::None => (FeatureSubset::all(normalized)?, Vec::new()),
        SelectMethod::Corr => (featsel::correlation_filter(normalized, f.theta)?, Vec::new()),
        SelectMethod::Lasso => (featsel::lasso_select(normalized, &f.lasso)?, Vec::new()),
        SelectMethod::Forward | SelectMethod::Backward => {
            let mut opts = f.wrapper.clone();
            opts.direction = if f.method == SelectMethod::Forward {
                featsel::Direction::Forward
            } else {
                featsel::Direction::Backward
            };
            opts.seed = cfg.seed;
            featsel::wrapper_select(normalized, &opts, &f.scorer)?
        }
    };
    info!("feature selection kept {} of {} columns", out.0.len(), normalized.n_features());
    Ok(out)
}

/// Fits every component on `train` (labels already mapped).
pub fn fit_bundle(
    cfg: &PipelineConfig,
    schema: &Schema,
    taxonomy: Option<&AttackTaxonomy>,
    train: &Dataset,
    sink: &ArtifactSink,
) -> Result<(TrainedBundle, StageReports)> {
    cfg.validate()?;
    if train.n_rows() < 2 {
        return Err(Error::EmptyInput("training data needs at least two rows".into()));
    }
    let mut rep = StageReports {
        train_rows: train.n_rows(),
        class_counts: train.label_histogram(),
        ..Default::default()
    };
    let seed = cfg.seed;

    let (encoder, norm, normalized) = timed(&mut rep, "preprocess", || {
        let out = preprocess(cfg, train)?;
        sink.json("norm_params.json", &out.1)?;
        Ok(out)
    })?;
    rep.encoded_columns = normalized.n_features();

    let (subset, wrapper_trace) = timed(&mut rep, "features", || {
        let out = select_features(cfg, &normalized)?;
        sink.json("feature_subset.json", &out.0)?;
        Ok(out)
    })?;
    rep.subset = Some(subset.clone());
    rep.wrapper_trace = wrapper_trace;
    let selected = subset.apply(&normalized)?;

    let ae_cfg = &cfg.autoencoder;
    let autoencoder = timed(&mut rep, "autoencoder", || {
        let mut ae = Autoencoder::new(selected.n_features(), &ae_cfg.hidden, ae_cfg.latent, ae_cfg.activation, seed)?;
        let trace = ae.train(
            selected.features.view(),
            &AeTrainConfig {
                lr: ae_cfg.lr,
                lr_decay: ae_cfg.lr_decay,
                lambda: ae_cfg.lambda,
                epochs: ae_cfg.epochs,
                batch_size: ae_cfg.batch_size,
                seed,
                stop_loss: ae_cfg.stop_loss,
            },
        )?;
        sink.csv("ae_trace.csv", |w| trace.write_csv(w))?;
        Ok((ae, trace))
    })
    .map(|(ae, trace)| {
        rep.ae_trace = trace;
        ae
    })?;

    let (latent_norm, latent) = timed(&mut rep, "compress", || {
        let compressed = autoencoder.compress(&selected)?;
        let (scaled, params) = normalize(&compressed, crate::dataio::NormMethod::Minmax)?;
        Ok((params, scaled))
    })?;

    let anomaly = timed(&mut rep, "som", || {
        let s = &cfg.som;
        let mut grid = SomGrid::init(s.width, s.height, latent.n_features(), seed, (0.0, 1.0))?;
        let sched = SomSchedule {
            eta0: s.eta0,
            sigma0: s.sigma0,
            tau_eta: s.tau_eta,
            tau_sigma: s.tau_sigma,
            epochs: s.epochs,
            neighborhood: s.neighborhood,
        };
        let trace = grid.train(latent.features.view(), &sched, seed)?;
        sink.csv("som_trace.csv", |w| {
            writeln!(w, "epoch,mean_qe")?;
            trace.iter().enumerate().try_for_each(|(i, q)| writeln!(w, "{i},{q}"))
        })?;
        let normal_rows: Vec<usize> = match (s.threshold_on, latent.label_id(&cfg.data.normal_label)) {
            (ThresholdOn::Normal, Some(n)) => (0..latent.n_rows()).filter(|&r| latent.labels[r] == n).collect(),
            (ThresholdOn::Normal, None) => {
                warn!("no '{}' rows in training data; SOM threshold fitted on all rows", cfg.data.normal_label);
                (0..latent.n_rows()).collect()
            }
            (ThresholdOn::All, _) => (0..latent.n_rows()).collect(),
        };
        let fit_rows = latent.features.select(Axis(0), &normal_rows);
        let model = AnomalyModel::fit(grid, fit_rows.view(), s.threshold_percentile)?;
        let u = model.grid.u_matrix();
        let hits = model.grid.hit_map(latent.features.view())?;
        sink.csv("u_matrix.csv", |w| crate::som::write_grid_csv(w, &u))?;
        sink.csv("hit_map.csv", |w| crate::som::write_grid_csv(w, &hits))?;
        Ok((model, trace, u, hits))
    })
    .map(|(model, trace, u, hits)| {
        rep.som_trace = trace;
        rep.som_u_matrix = to_rows(&u);
        rep.som_hits = to_rows(&hits);
        rep.som_threshold = model.threshold;
        model
    })?;

    let dbn_model = timed(&mut rep, "dbn", || {
        let mut sizes = vec![latent.n_features()];
        sizes.extend_from_slice(&cfg.dbn.hidden);
        let pre_cfg = dbn::TrainConfig {
            seed,
            ..cfg.dbn.pretrain.clone()
        };
        let (rbms, pre_trace) = dbn::pretrain(&sizes, latent.features.view(), &pre_cfg)?;
        let mut model = DbnModel::from_pretrained(rbms, latent.n_classes(), seed)?;
        let ft_cfg = dbn::TrainConfig {
            seed,
            ..cfg.dbn.finetune.clone()
        };
        let ft_trace = dbn::finetune(&mut model, latent.features.view(), &latent.labels, &ft_cfg)?;
        sink.csv("dbn_pretrain_trace.csv", |w| {
            writeln!(w, "layer,epoch,reconstruction_error")?;
            for (l, t) in pre_trace.iter().enumerate() {
                for (e, v) in t.iter().enumerate() {
                    writeln!(w, "{l},{},{v}", e + 1)?;
                }
            }
            Ok(())
        })?;
        sink.csv("dbn_finetune_trace.csv", |w| {
            writeln!(w, "epoch,loss")?;
            ft_trace.iter().enumerate().try_for_each(|(i, v)| writeln!(w, "{i},{v}"))
        })?;
        Ok((model, pre_trace, ft_trace))
    })
    .map(|(model, pre, ft)| {
        rep.dbn_pretrain = pre;
        rep.dbn_finetune = ft;
        model
    })?;

    let bundle = TrainedBundle {
        version: env!("CARGO_PKG_VERSION").to_string(),
        schema: schema.clone(),
        taxonomy: taxonomy.cloned(),
        encoder,
        norm,
        subset,
        autoencoder,
        latent_norm,
        anomaly,
        dbn: dbn_model,
        label_names: train.label_names.clone(),
        normal_id: train.label_id(&cfg.data.normal_label),
        policy: cfg.integration.policy,
        config: cfg.clone(),
    };
    bundle.validate()?;
    Ok((bundle, rep))
}

/// Final verdict id under `policy`. `unknown_id` is the reserved
/// "unknown-attack" id; without a known normal class the DBN class stands.
pub fn integrate(dbn_class: usize, anomaly: bool, policy: Policy, normal_id: Option<usize>, unknown_id: usize) -> usize {
    match (policy, normal_id) {
        (Policy::DbnOnly, _) | (_, None) => dbn_class,
        (Policy::Escalate, Some(n)) => {
            if dbn_class == n && anomaly {
                unknown_id
            } else {
                dbn_class
            }
        }
        (Policy::SomOnly, Some(n)) => {
            if anomaly {
                unknown_id
            } else {
                n
            }
        }
    }
}

/// Per-record scoring output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub record_id: usize,
    pub dbn_class: usize,
    pub dbn_confidence: f64,
    pub som_qe: f64,
    pub anomaly_flag: bool,
    pub final_label: usize,
    /// Autoencoder reconstruction error, a diagnostic only.
    pub recon_error: f64,
    /// Probability the DBN assigns to the normal class, if there is one.
    #[serde(skip)]
    pub p_normal: Option<f64>,
}

impl TrainedBundle {
    /// Verdict label text for an id from [`Verdict::final_label`] or `dbn_class`.
    pub fn label_name(&self, id: usize) -> &str {
        self.label_names.get(id).map_or(UNKNOWN_ATTACK, String::as_str)
    }

    /// Normalized, selected features of `ds`.
    pub fn features_of(&self, ds: &Dataset) -> Result<Dataset> {
        let (encoded, report) = self.encoder.transform(ds)?;
        if report.unseen > 0 {
            warn!("{} categorical cells hold levels unseen in training", report.unseen);
        }
        let normalized = apply_norm(&encoded, &self.norm)?;
        self.subset.apply(&normalized)
    }

    /// Scaled latent codes of `ds` and per-row reconstruction errors.
    pub fn latent_of(&self, ds: &Dataset) -> Result<(Array2<f64>, Vec<f64>)> {
        let selected = self.features_of(ds)?;
        let recon = self.autoencoder.reconstruction_errors(selected.features.view())?;
        let compressed = self.autoencoder.compress(&selected)?;
        let scaled = apply_norm(&compressed, &self.latent_norm)?;
        Ok((scaled.features, recon))
    }

    pub fn score(&self, ds: &Dataset) -> Result<Vec<Verdict>> {
        if ds.n_rows() == 0 {
            return Err(Error::EmptyInput("no records to score".into()));
        }
        let (latent, recon) = self.latent_of(ds)?;
        let probs = self.dbn.predict_proba(latent.view())?;
        let som = self.anomaly.score_batch(latent.view())?;
        let unknown = self.unknown_id();
        Ok(probs
            .outer_iter()
            .zip(som)
            .zip(recon)
            .enumerate()
            .map(|(i, ((p, (qe, flag)), rec))| {
                let (class, conf) = dbn::argmax(p);
                Verdict {
                    record_id: i,
                    dbn_class: class,
                    dbn_confidence: conf,
                    som_qe: qe,
                    anomaly_flag: flag,
                    final_label: integrate(class, flag, self.policy, self.normal_id, unknown),
                    recon_error: rec,
                    p_normal: self.normal_id.map(|n| p[n]),
                }
            })
            .collect())
    }

    pub fn write_verdicts<W: std::io::Write>(&self, w: W, verdicts: &[Verdict]) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["record_id", "dbn_class", "dbn_confidence", "som_qe", "anomaly_flag", "final_label"])?;
        for v in verdicts {
            out.write_record([
                v.record_id.to_string(),
                self.label_name(v.dbn_class).to_string(),
                v.dbn_confidence.to_string(),
                v.som_qe.to_string(),
                v.anomaly_flag.to_string(),
                self.label_name(v.final_label).to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<verdicts>", e))?;
        Ok(())
    }

    /// Parses a file with the bundle's schema and label mapping.
    pub fn load_records(&self, path: &Path, allow_unlabeled: bool) -> Result<Dataset> {
        let opts = ParseOptions {
            allow_unlabeled,
            ..Default::default()
        };
        let (ds, report) = parse_dataset_with(path, &self.schema, &opts)?;
        if !report.malformed.is_empty() {
            warn!("{}: {} malformed rows skipped", path.display(), report.malformed.len());
        }
        if allow_unlabeled {
            return Ok(ds);
        }
        let data = DataConfig {
            label_mode: crate::dataio::LabelMode::Lenient,
            ..self.config.data.clone()
        };
        label_dataset(&ds, &data, self.taxonomy.as_ref())
    }
}

/// Metrics plus the per-row verdicts they were computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub verdicts: Vec<Verdict>,
    /// True class id per row in `report.classes`.
    pub labels: Vec<usize>,
    /// Normal-vs-attack ROC from the attack score, when a normal class exists.
    pub roc: Option<Vec<RocPoint>>,
}

/// Scores `test` and compares the final verdicts with its labels. The class
/// list is the training label map, then "unknown-attack", then any test-only
/// labels.
pub fn evaluate(bundle: &TrainedBundle, test: &Dataset) -> Result<Evaluation> {
    if test.n_rows() == 0 {
        return Err(Error::EmptyInput("test set is empty".into()));
    }
    let mut reference = bundle.label_names.clone();
    reference.push(UNKNOWN_ATTACK.to_string());
    let aligned = test.align_labels(&reference);
    let verdicts = bundle.score(&aligned)?;
    let preds: Vec<usize> = verdicts.iter().map(|v| v.final_label).collect();
    let mut report = multiclass_report(&preds, &aligned.labels, &aligned.label_names)?;
    let mut roc = None;
    if let Some(n) = bundle.normal_id {
        let is_attack = |c: usize| usize::from(c != n);
        let bp: Vec<usize> = preds.iter().map(|&c| is_attack(c)).collect();
        let bl: Vec<usize> = aligned.labels.iter().map(|&c| is_attack(c)).collect();
        report.binary = Some(basic_metrics(&confusion(&bp, &bl, 1)?));
        let scores: Vec<f64> = verdicts
            .iter()
            .map(|v| match bundle.policy {
                Policy::SomOnly => v.som_qe,
                Policy::DbnOnly => 1.0 - v.p_normal.unwrap_or(0.0),
                Policy::Escalate => 1.0 - v.p_normal.unwrap_or(0.0) + f64::from(u8::from(v.anomaly_flag)),
            })
            .collect();
        let truth: Vec<bool> = bl.iter().map(|&b| b == 1).collect();
        report.auc_roc = auc_roc(&scores, &truth);
        roc = roc_curve(&scores, &truth);
    }
    Ok(Evaluation {
        report,
        labels: aligned.labels,
        verdicts,
        roc,
    })
}

/// A complete training run with its held-out evaluation.
#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub bundle: TrainedBundle,
    pub reports: StageReports,
    pub test: Dataset,
    pub evaluation: Evaluation,
    pub malformed: usize,
}

/// Loads data, fits the bundle and evaluates it on the test file or a
/// stratified held-out split. Artifacts go to `out` as stages complete.
pub fn run_training(cfg: &PipelineConfig, out: Option<&Path>) -> Result<TrainingRun> {
    let sink = ArtifactSink::new(out)?;
    sink.text("config.toml", &cfg.to_toml()?)?;
    let data = load_data(cfg)?;
    run_training_on(cfg, data, &sink)
}

/// As [`run_training`] for already loaded data.
pub fn run_training_on(cfg: &PipelineConfig, data: PreparedData, sink: &ArtifactSink) -> Result<TrainingRun> {
    let (train, test) = match data.test {
        Some(t) => (data.train, t),
        None => stage("split", || split(&data.train, cfg.data.test_fraction, cfg.seed, true))?,
    };
    info!("training on {} rows, testing on {} rows", train.n_rows(), test.n_rows());
    let (bundle, reports) = fit_bundle(cfg, &data.schema, data.taxonomy.as_ref(), &train, sink)?;
    sink.bytes("bundle.hids", &bundle.to_bytes()?)?;
    let evaluation = stage("evaluate", || evaluate(&bundle, &test))?;
    write_training_artifacts(sink, &bundle, &reports, &test, &evaluation)?;
    Ok(TrainingRun {
        bundle,
        reports,
        test,
        evaluation,
        malformed: data.malformed,
    })
}

use std::sync::atomic::{AtomicUsize, Ordering};

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use super::{evaluate, fit_bundle, ArtifactSink, PipelineConfig, PreparedData};
use crate::dataio::{split, Dataset};
use crate::pso::{composite_cost, optimize_seeded, NamedDimension, OptimizeResult, ParamValue, SearchSpace};
use crate::{Error, Result};

/// One fitness evaluation of a candidate configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessEval {
    /// Negated weighted score; lower is better.
    pub fitness: f64,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    /// Reconstruction, clustering and classification losses on the
    /// validation rows, weighted by `pso.composite`. Logged, not optimised.
    pub composite: f64,
}

/// Epoch count under a budget fraction, at least one.
pub fn reduced_budget(epochs: usize, fraction: f64) -> usize {
    ((epochs as f64 * fraction).ceil() as usize).max(1)
}

fn budgeted(cfg: &PipelineConfig) -> PipelineConfig {
    let f = cfg.pso.budget_fraction;
    let mut c = cfg.clone();
    c.autoencoder.epochs = reduced_budget(c.autoencoder.epochs, f);
    c.som.epochs = reduced_budget(c.som.epochs, f);
    c.dbn.pretrain.epochs = reduced_budget(c.dbn.pretrain.epochs, f);
    c.dbn.finetune.epochs = reduced_budget(c.dbn.finetune.epochs, f);
    c
}

/// Trains `cfg` with a reduced epoch budget on 80% of `train` and scores the
/// remaining 20%.
pub fn pipeline_fitness(cfg: &PipelineConfig, data: &PreparedData) -> Result<FitnessEval> {
    let (fit, val) = split(&data.train, 0.2, cfg.seed.wrapping_add(0xF17), true)?;
    let small = budgeted(cfg);
    let (bundle, _) = fit_bundle(&small, &data.schema, data.taxonomy.as_ref(), &fit, &ArtifactSink::discard())?;
    let eval = evaluate(&bundle, &val)?;
    let r = &eval.report;
    let w = &cfg.pso.weights;
    let precision = r.macro_avg.metrics.precision.unwrap_or(0.0);
    let recall = r.macro_avg.metrics.recall.unwrap_or(0.0);
    let score = w.accuracy * r.accuracy + w.precision * precision + w.recall * recall;
    let composite = composite_losses(&bundle, &val, cfg)?;
    Ok(FitnessEval {
        fitness: -score,
        accuracy: r.accuracy,
        macro_precision: precision,
        macro_recall: recall,
        composite,
    })
}

fn composite_losses(bundle: &super::TrainedBundle, val: &Dataset, cfg: &PipelineConfig) -> Result<f64> {
    let selected = bundle.features_of(val)?;
    let l_rec = bundle.autoencoder.reconstruction_loss(selected.features.view())?;
    let (latent, _) = bundle.latent_of(val)?;
    let l_clus = bundle.anomaly.grid.mean_quantization_error(latent.view())?;
    let l_hier = bundle.dbn.loss(latent.view(), &val.labels)?;
    Ok(composite_cost(l_rec, l_clus, l_hier, &cfg.pso.composite))
}

fn to_param(v: &toml::Value) -> Option<ParamValue> {
    match v {
        toml::Value::Float(f) => Some(ParamValue::Real(*f)),
        toml::Value::Integer(i) => Some(ParamValue::Int(*i)),
        toml::Value::String(s) => Some(ParamValue::Choice(s.clone())),
        _ => None,
    }
}

fn to_toml(p: &ParamValue, existing: Option<&toml::Value>) -> toml::Value {
    match (p, existing) {
        (ParamValue::Real(x), Some(toml::Value::Integer(_))) => toml::Value::Integer(x.round() as i64),
        (ParamValue::Int(i), Some(toml::Value::Float(_))) => toml::Value::Float(*i as f64),
        (ParamValue::Real(x), _) => toml::Value::Float(*x),
        (ParamValue::Int(i), _) => toml::Value::Integer(*i),
        (ParamValue::Choice(s), _) => toml::Value::String(s.clone()),
    }
}

/// Writes decoded parameters into every target path of their dimension.
pub fn apply_params(cfg: &PipelineConfig, params: &[ParamValue]) -> Result<PipelineConfig> {
    let mut values = Vec::new();
    for (dim, p) in cfg.pso.space.iter().zip(params) {
        for t in &dim.targets {
            let existing = cfg.value_at(t).ok();
            values.push((t.clone(), to_toml(p, existing.as_ref())));
        }
    }
    cfg.with_values(&values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOutcome {
    pub config: PipelineConfig,
    /// `None` when the search was skipped.
    pub result: Option<OptimizeResult>,
    pub evaluations: usize,
}

/// PSO over `cfg.pso.space`. The unmodified configuration is the first
/// particle, so the result is never worse than the defaults on the
/// validation split. `pso.iterations` counts the initial evaluation.
pub fn optimize_pipeline(cfg: &PipelineConfig, data: &PreparedData) -> Result<OptimizeOutcome> {
    let p = &cfg.pso;
    if p.particles == 0 || p.iterations == 0 || p.space.is_empty() {
        warn!("PSO budget or search space is empty; keeping the configured hyperparameters");
        return Ok(OptimizeOutcome {
            config: cfg.clone(),
            result: None,
            evaluations: 0,
        });
    }
    let space = SearchSpace::new(
        p.space
            .iter()
            .map(|d| NamedDimension {
                name: d.name.clone(),
                dim: d.dim.clone(),
            })
            .collect(),
    )?;
    for d in &p.space {
        for t in &d.targets {
            cfg.value_at(t)
                .map_err(|_| Error::Config(format!("search dimension '{}' targets unknown key '{t}'", d.name)))?;
        }
    }
    let start: Option<Vec<f64>> = p
        .space
        .iter()
        .map(|d| {
            let v = cfg.value_at(&d.targets[0]).ok()?;
            d.dim.encode(&to_param(&v)?)
        })
        .collect();
    if start.is_none() {
        warn!("configured values fall outside the search space; no particle starts at the defaults");
    }
    let seeds: Vec<Vec<f64>> = start.into_iter().collect();

    let counter = AtomicUsize::new(0);
    let fitness = |x: &[f64]| -> f64 {
        let n = counter.fetch_add(1, Ordering::Relaxed);
        let eval = apply_params(cfg, &space.decode(x)).and_then(|c| pipeline_fitness(&c, data));
        match eval {
            Ok(e) => {
                debug!("evaluation {n}: fitness {:.5} (composite {:.5})", e.fitness, e.composite);
                e.fitness
            }
            Err(e) => {
                warn!("evaluation {n} failed: {e}");
                f64::INFINITY
            }
        }
    };
    let result = optimize_seeded(&space, fitness, p.particles, p.iterations - 1, cfg.seed, p.params(), &seeds)?;
    info!("PSO best fitness {:.5} after {} evaluations", result.best_fitness, counter.load(Ordering::Relaxed));
    let config = apply_params(cfg, &result.best_params)?;
    Ok(OptimizeOutcome {
        config,
        result: Some(result),
        evaluations: counter.into_inner(),
    })
}

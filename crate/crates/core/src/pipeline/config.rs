use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataio::{EncodingMode, LabelMode, NormMethod};
use crate::dbn::TrainConfig;
use crate::featsel::{LassoOptions, LogisticScorer, SelectMethod, WrapperOptions};
use crate::nn::Activation;
use crate::pso::{CompositeCostWeights, Dimension, PsoParams};
use crate::som::NeighborhoodMode;
use crate::{Error, Result};

/// How the SOM anomaly flag and the DBN class are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    #[default]
    Escalate,
    DbnOnly,
    SomOnly,
}

/// Rows used to fit the SOM anomaly threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdOn {
    #[default]
    Normal,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Builtin schema id or path to a schema CSV.
    pub schema: String,
    /// Builtin taxonomy id, path, or "none" to keep raw labels.
    pub taxonomy: Option<String>,
    pub label_mode: LabelMode,
    /// Categories to keep after mapping; empty keeps all.
    pub keep_labels: Vec<String>,
    /// Stratified row cap applied to the training file; 0 keeps all rows.
    pub subsample: usize,
    /// Held-out fraction when no test file is given.
    pub test_fraction: f64,
    pub normal_label: String,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            train: None,
            test: None,
            schema: "nsl-kdd".into(),
            taxonomy: None,
            label_mode: LabelMode::Strict,
            keep_labels: Vec::new(),
            subsample: 0,
            test_fraction: 0.2,
            normal_label: "Normal".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub encoding: EncodingMode,
    pub norm: NormMethod,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            encoding: EncodingMode::Onehot,
            norm: NormMethod::Minmax,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub method: SelectMethod,
    pub theta: f64,
    pub lasso: LassoOptions,
    pub wrapper: WrapperOptions,
    pub scorer: LogisticScorer,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            method: SelectMethod::Corr,
            theta: 0.95,
            lasso: LassoOptions::default(),
            wrapper: WrapperOptions::default(),
            scorer: LogisticScorer::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AeConfig {
    pub hidden: Vec<usize>,
    pub latent: usize,
    pub activation: Activation,
    pub lr: f64,
    pub lr_decay: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub stop_loss: Option<f64>,
}

impl Default for AeConfig {
    fn default() -> Self {
        AeConfig {
            hidden: vec![128, 64],
            latent: 64,
            activation: Activation::Relu,
            lr: 0.001,
            lr_decay: 0.0,
            lambda: 1e-5,
            epochs: 20,
            batch_size: 64,
            stop_loss: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SomConfig {
    pub width: usize,
    pub height: usize,
    pub eta0: f64,
    pub sigma0: f64,
    pub tau_eta: Option<f64>,
    pub tau_sigma: Option<f64>,
    pub epochs: usize,
    pub neighborhood: NeighborhoodMode,
    pub threshold_percentile: f64,
    pub threshold_on: ThresholdOn,
}

impl Default for SomConfig {
    fn default() -> Self {
        SomConfig {
            width: 10,
            height: 10,
            eta0: 0.1,
            sigma0: 3.0,
            tau_eta: None,
            tau_sigma: None,
            epochs: 10,
            neighborhood: NeighborhoodMode::Lattice,
            threshold_percentile: 95.0,
            threshold_on: ThresholdOn::Normal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DbnConfig {
    pub hidden: Vec<usize>,
    pub pretrain: TrainConfig,
    pub finetune: TrainConfig,
}

impl Default for DbnConfig {
    fn default() -> Self {
        DbnConfig {
            hidden: vec![128, 64, 32],
            pretrain: TrainConfig::default(),
            finetune: TrainConfig {
                lr: 0.5,
                epochs: 30,
                ..TrainConfig::default()
            },
        }
    }
}

/// A searched hyperparameter written to one or more config paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchDim {
    pub name: String,
    pub targets: Vec<String>,
    #[serde(flatten)]
    pub dim: Dimension,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitnessWeights {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

impl Default for FitnessWeights {
    fn default() -> Self {
        FitnessWeights {
            accuracy: 0.5,
            precision: 0.25,
            recall: 0.25,
        }
    }
}

impl FitnessWeights {
    pub fn sum(&self) -> f64 {
        self.accuracy + self.precision + self.recall
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsoConfig {
    pub particles: usize,
    pub iterations: usize,
    pub omega: f64,
    pub c1: f64,
    pub c2: f64,
    pub vmax_fraction: f64,
    /// Fraction of every epoch count used when scoring a candidate.
    pub budget_fraction: f64,
    pub weights: FitnessWeights,
    pub composite: CompositeCostWeights,
    pub space: Vec<SearchDim>,
}

impl Default for PsoConfig {
    fn default() -> Self {
        let p = PsoParams::default();
        PsoConfig {
            particles: 30,
            iterations: 100,
            omega: p.omega,
            c1: p.c1,
            c2: p.c2,
            vmax_fraction: p.vmax_fraction,
            budget_fraction: 0.2,
            weights: FitnessWeights::default(),
            composite: CompositeCostWeights::default(),
            space: default_space(),
        }
    }
}

impl PsoConfig {
    pub fn params(&self) -> PsoParams {
        PsoParams {
            omega: self.omega,
            c1: self.c1,
            c2: self.c2,
            vmax_fraction: self.vmax_fraction,
        }
    }
}

/// Learning rate, hidden units, SOM neighbourhood radius and activation.
pub fn default_space() -> Vec<SearchDim> {
    let dim = |name: &str, targets: &[&str], dim: Dimension| SearchDim {
        name: name.into(),
        targets: targets.iter().map(|t| t.to_string()).collect(),
        dim,
    };
    vec![
        dim("learning_rate", &["autoencoder.lr", "dbn.pretrain.lr"], Dimension::Continuous { lo: 0.0001, hi: 0.01 }),
        dim("hidden_units", &["autoencoder.hidden.0", "dbn.hidden.0"], Dimension::Integer { lo: 32, hi: 128 }),
        dim("neighborhood", &["som.sigma0"], Dimension::Continuous { lo: 1.0, hi: 5.0 }),
        dim(
            "activation",
            &["autoencoder.activation"],
            Dimension::Categorical {
                options: vec!["relu".into(), "sigmoid".into()],
            },
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrationConfig {
    pub policy: Policy,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig { policy: Policy::Escalate }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub preprocess: PreprocessConfig,
    pub features: FeatureConfig,
    pub autoencoder: AeConfig,
    pub som: SomConfig,
    pub dbn: DbnConfig,
    pub pso: PsoConfig,
    pub integration: IntegrationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            data: DataConfig::default(),
            preprocess: PreprocessConfig::default(),
            features: FeatureConfig::default(),
            autoencoder: AeConfig::default(),
            som: SomConfig::default(),
            dbn: DbnConfig::default(),
            pso: PsoConfig::default(),
            integration: IntegrationConfig::default(),
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_path(root: &mut toml::Value, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed config key '{key}'")));
    }
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            toml::Value::Table(t) => {
                if last {
                    t.insert(part.to_string(), value);
                    return Ok(());
                }
                t.entry(part.to_string()).or_insert_with(|| toml::Value::Table(Default::default()))
            }
            toml::Value::Array(a) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::Config(format!("config key '{key}': '{part}' is not an array index")))?;
                let len = a.len();
                let slot = a
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("config key '{key}': index {idx} out of range (length {len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::Config(format!("config key '{key}': '{part}' is not a table"))),
        };
    }
    unreachable!("loop returns on the last segment")
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative data paths are resolved against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data.train, &mut cfg.data.test].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn to_value(&self) -> Result<toml::Value> {
        toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn from_value(v: toml::Value) -> Result<Self> {
        let cfg: PipelineConfig = v.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `key=value` overrides with dotted keys; array elements are
    /// addressed by index (`dbn.hidden.0=64`).
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut v = self.to_value()?;
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
            set_path(&mut v, key.trim(), parse_value(raw.trim()))?;
        }
        Self::from_value(v)
    }

    /// Sets typed values at dotted paths.
    pub fn with_values(&self, values: &[(String, toml::Value)]) -> Result<Self> {
        let mut v = self.to_value()?;
        for (key, value) in values {
            set_path(&mut v, key, value.clone())?;
        }
        Self::from_value(v)
    }

    /// Reads the value at a dotted path.
    pub fn value_at(&self, key: &str) -> Result<toml::Value> {
        let mut cur = self.to_value()?;
        for part in key.split('.') {
            cur = match cur {
                toml::Value::Table(mut t) => t.remove(part),
                toml::Value::Array(a) => part.parse::<usize>().ok().and_then(|i| a.into_iter().nth(i)),
                _ => None,
            }
            .ok_or_else(|| Error::Config(format!("unknown config key '{key}'")))?;
        }
        Ok(cur)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        if !(self.data.test_fraction > 0.0 && self.data.test_fraction < 1.0) {
            return cfg_err(format!("data.test_fraction must lie in (0, 1), got {}", self.data.test_fraction));
        }
        if self.features.method == SelectMethod::Corr && !(self.features.theta > 0.0 && self.features.theta <= 1.0) {
            return cfg_err(format!("features.theta must lie in (0, 1], got {}", self.features.theta));
        }
        if self.autoencoder.latent == 0 || self.autoencoder.hidden.contains(&0) {
            return cfg_err("autoencoder layer sizes must be positive".into());
        }
        if self.autoencoder.activation == Activation::Linear {
            return cfg_err("autoencoder.activation must be relu or sigmoid".into());
        }
        if !(self.autoencoder.lr > 0.0) || self.autoencoder.batch_size == 0 || !(self.autoencoder.lambda >= 0.0) {
            return cfg_err("autoencoder lr and batch_size must be positive, lambda non-negative".into());
        }
        if self.som.width == 0 || self.som.height == 0 {
            return cfg_err("som grid must be at least 1x1".into());
        }
        if !(self.som.threshold_percentile > 0.0 && self.som.threshold_percentile <= 100.0) {
            return cfg_err(format!("som.threshold_percentile must lie in (0, 100], got {}", self.som.threshold_percentile));
        }
        if self.dbn.hidden.is_empty() || self.dbn.hidden.contains(&0) {
            return cfg_err("dbn.hidden needs at least one positive layer size".into());
        }
        self.dbn.pretrain.validate().map_err(|e| Error::Config(format!("dbn.pretrain: {e}")))?;
        self.dbn.finetune.validate().map_err(|e| Error::Config(format!("dbn.finetune: {e}")))?;
        if !(self.pso.budget_fraction > 0.0 && self.pso.budget_fraction <= 1.0) {
            return cfg_err(format!("pso.budget_fraction must lie in (0, 1], got {}", self.pso.budget_fraction));
        }
        let w = &self.pso.weights;
        if [w.accuracy, w.precision, w.recall].iter().any(|v| !(*v >= 0.0)) {
            return cfg_err("pso.weights must be non-negative".into());
        }
        self.pso.composite.validate()?;
        for d in &self.pso.space {
            if d.targets.is_empty() {
                return cfg_err(format!("search dimension '{}' has no targets", d.name));
            }
            crate::pso::SearchSpace::new(vec![crate::pso::NamedDimension {
                name: d.name.clone(),
                dim: d.dim.clone(),
            }])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_toml() {
        let cfg = PipelineConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(PipelineConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn overrides_set_nested_and_indexed_values() {
        let cfg = PipelineConfig::default()
            .with_overrides(&["som.eta0=0.05", "dbn.hidden.0=64", "autoencoder.activation=sigmoid", "autoencoder.stop_loss=0.01", "data.keep_labels=[\"Normal\",\"DoS\"]"])
            .unwrap();
        assert_eq!(cfg.som.eta0, 0.05);
        assert_eq!(cfg.dbn.hidden, vec![64, 64, 32]);
        assert_eq!(cfg.autoencoder.activation, Activation::Sigmoid);
        assert_eq!(cfg.autoencoder.stop_loss, Some(0.01));
        assert_eq!(cfg.data.keep_labels, vec!["Normal", "DoS"]);
        assert_eq!(cfg.value_at("dbn.hidden.0").unwrap(), toml::Value::Integer(64));
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = PipelineConfig::default().with_overrides(&["som.bogus=1"]).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
        let err = PipelineConfig::from_toml_str("[som]\nwidht = 3\n").unwrap_err().to_string();
        assert!(err.contains("widht"), "{err}");
        assert!(PipelineConfig::default().with_overrides(&["integration.policy=\"nope\""]).is_err());
        assert!(PipelineConfig::default().with_overrides(&["dbn.hidden.9=3"]).is_err());
    }
}

//! Deep belief network: stacked RBMs with a softmax classifier on top.

mod rbm;

pub use rbm::{CdGradient, CdStats, Rbm, EXACT_UNIT_LIMIT};

use log::{debug, warn};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::nn::{Dense, DenseGrad};
use crate::pso::adaptive_lr;
use crate::{exec, seeded_rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub lr_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub cd_steps: usize,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            lr_decay: 0.0,
            epochs: 10,
            batch_size: 64,
            cd_steps: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.lr_decay.is_finite() && self.lr_decay >= 0.0) {
            return Err(Error::Config(format!("lr_decay must be non-negative, got {}", self.lr_decay)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.cd_steps == 0 {
            return Err(Error::Config("cd_steps must be positive".into()));
        }
        Ok(())
    }

    fn effective_batch(&self, n: usize) -> usize {
        if self.batch_size > n {
            debug!("batch size {} clamped to dataset size {n}", self.batch_size);
        }
        self.batch_size.min(n).max(1)
    }
}

fn batches(n: usize, batch: usize, rng: &mut crate::Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch).map(|c| c.to_vec()).collect()
}

fn check_layer_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::Config("a DBN needs at least a visible and one hidden layer".into()));
    }
    if sizes.contains(&0) {
        return Err(Error::Config(format!("layer sizes must be positive: {sizes:?}")));
    }
    Ok(())
}

/// Greedy layer-wise CD-k pretraining. Layer `l` sees the mean-field hidden
/// probabilities of layer `l-1`. Returns the RBMs and, per layer, the mean
/// reconstruction error of each epoch.
pub fn pretrain(layer_sizes: &[usize], data: ArrayView2<f64>, cfg: &TrainConfig) -> Result<(Vec<Rbm>, Vec<Vec<f64>>)> {
    check_layer_sizes(layer_sizes)?;
    cfg.validate()?;
    if data.ncols() != layer_sizes[0] {
        return Err(Error::dims("dbn visible layer", layer_sizes[0], data.ncols()));
    }
    if data.nrows() == 0 {
        return Err(Error::EmptyInput("dbn pretraining data".into()));
    }
    if data.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        warn!("pretraining data outside [0, 1]; values are treated as Bernoulli means");
    }
    let mut init_rng = seeded_rng(cfg.seed, 0xDB00);
    let mut input = data.to_owned();
    let mut rbms = Vec::with_capacity(layer_sizes.len() - 1);
    let mut traces = Vec::with_capacity(layer_sizes.len() - 1);
    let batch = cfg.effective_batch(data.nrows());
    for (l, pair) in layer_sizes.windows(2).enumerate() {
        let mut rbm = Rbm::new(pair[0], pair[1], &mut init_rng);
        let mut rng = seeded_rng(cfg.seed, 0xDB10 + l as u64);
        let mut trace = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            let eta = adaptive_lr(cfg.lr, cfg.lr_decay, epoch as u64);
            let mut err = 0.0;
            for idx in batches(input.nrows(), batch, &mut rng) {
                let b = input.select(Axis(0), &idx);
                let stats = rbm
                    .cd_update(b.view(), eta, cfg.cd_steps, &mut rng)
                    .map_err(|e| Error::Numerical(format!("pretraining layer {l}, epoch {epoch}: {e}")))?;
                err += stats.reconstruction_error * idx.len() as f64;
            }
            let err = err / input.nrows() as f64;
            if !err.is_finite() || !rbm.is_finite() {
                return Err(Error::Numerical(format!("pretraining layer {l} diverged at epoch {epoch}")));
            }
            debug!("rbm {l} epoch {epoch}: reconstruction error {err:.6}");
            trace.push(err);
        }
        input = rbm.hidden_probs_batch(input.view());
        rbms.push(rbm);
        traces.push(trace);
    }
    Ok((rbms, traces))
}

/// Pretrained sigmoid stack with an affine + softmax output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbnModel {
    pub rbm_layers: Vec<Rbm>,
    pub output_layer: Dense,
    pub layer_sizes: Vec<usize>,
}

/// Fine-tuning gradient: one entry per hidden layer (weights, hidden bias), then the output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DbnGrad {
    pub hidden: Vec<DenseGrad>,
    pub output: DenseGrad,
}

impl DbnModel {
    /// Randomly initialized, untrained model.
    pub fn new(layer_sizes: &[usize], n_classes: usize, seed: u64) -> Result<Self> {
        check_layer_sizes(layer_sizes)?;
        let mut rng = seeded_rng(seed, 0xDB00);
        let rbms = layer_sizes.windows(2).map(|p| Rbm::new(p[0], p[1], &mut rng)).collect();
        Self::from_pretrained(rbms, n_classes, seed)
    }

    pub fn from_pretrained(rbm_layers: Vec<Rbm>, n_classes: usize, seed: u64) -> Result<Self> {
        if rbm_layers.is_empty() {
            return Err(Error::Config("a DBN needs at least one RBM".into()));
        }
        if n_classes == 0 {
            return Err(Error::Config("a DBN needs at least one class".into()));
        }
        let mut sizes = vec![rbm_layers[0].n_visible()];
        for (l, r) in rbm_layers.iter().enumerate() {
            if r.n_visible() != *sizes.last().unwrap() {
                return Err(Error::Config(format!(
                    "RBM {l} expects {} inputs but the layer below has {}",
                    r.n_visible(),
                    sizes.last().unwrap()
                )));
            }
            sizes.push(r.n_hidden());
        }
        let mut rng = seeded_rng(seed, 0xDB01);
        let output_layer = Dense::glorot(*sizes.last().unwrap(), n_classes, &mut rng);
        Ok(DbnModel {
            rbm_layers,
            output_layer,
            layer_sizes: sizes,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_classes(&self) -> usize {
        self.output_layer.outputs()
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev = self.n_inputs();
        for (l, r) in self.rbm_layers.iter().enumerate() {
            if r.n_visible() != prev || self.layer_sizes.get(l + 1) != Some(&r.n_hidden()) {
                return Err(Error::Bundle(format!("DBN layer {l} shape does not chain")));
            }
            prev = r.n_hidden();
        }
        if self.output_layer.inputs() != prev {
            return Err(Error::Bundle("DBN output layer shape does not chain".into()));
        }
        if !self.is_finite() {
            return Err(Error::Bundle("DBN has non-finite parameters".into()));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.rbm_layers.iter().all(Rbm::is_finite) && self.output_layer.is_finite()
    }

    /// Hidden activations of every layer (input first) and the output log-probabilities.
    fn forward(&self, x: ArrayView2<f64>) -> (Vec<Array2<f64>>, Array2<f64>) {
        let mut acts = vec![x.to_owned()];
        for r in &self.rbm_layers {
            let a = r.hidden_probs_batch(acts.last().unwrap().view());
            acts.push(a);
        }
        let logits = self.output_layer.forward(acts.last().unwrap().view());
        (acts, log_softmax_rows(logits))
    }

    fn check_input(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.n_inputs() {
            return Err(Error::dims("dbn input", self.n_inputs(), x.ncols()));
        }
        Ok(())
    }

    /// Class probabilities for a batch; each row sums to 1.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        Ok(exec::map_row_chunks(x, 4096, |rows| self.forward(rows).1.mapv_into(f64::exp)))
    }

    /// Probabilities for one record.
    pub fn predict(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        let p = self.predict_proba(x.insert_axis(Axis(0)))?;
        Ok(p.row(0).to_owned())
    }

    /// Argmax class and its probability per row.
    pub fn predict_class(&self, x: ArrayView2<f64>) -> Result<Vec<(usize, f64)>> {
        let p = self.predict_proba(x)?;
        Ok(p.outer_iter().map(|row| argmax(row)).collect())
    }

    /// Mean cross-entropy of `labels` under the model.
    pub fn loss(&self, x: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
        self.check_targets(x, labels)?;
        let (_, logp) = self.forward(x);
        Ok(mean_nll(&logp, labels))
    }

    fn check_targets(&self, x: ArrayView2<f64>, labels: &[usize]) -> Result<()> {
        self.check_input(x)?;
        if labels.len() != x.nrows() {
            return Err(Error::dims("dbn labels", x.nrows(), labels.len()));
        }
        if x.nrows() == 0 {
            return Err(Error::EmptyInput("dbn batch".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= self.n_classes()) {
            return Err(Error::pre(format!("label {bad} outside {} classes", self.n_classes())));
        }
        Ok(())
    }

    /// Mean cross-entropy and its gradient by backpropagation.
    pub fn loss_and_grad(&self, x: ArrayView2<f64>, labels: &[usize]) -> Result<(f64, DbnGrad)> {
        self.check_targets(x, labels)?;
        let n = x.nrows() as f64;
        let (acts, logp) = self.forward(x);
        let loss = mean_nll(&logp, labels);
        let mut delta = logp.mapv(f64::exp);
        for (i, &y) in labels.iter().enumerate() {
            delta[[i, y]] -= 1.0;
        }
        delta /= n;
        let top = acts.last().unwrap();
        let output = DenseGrad::from_delta(top.view(), &delta);
        let mut back = delta.dot(&self.output_layer.weights.t());
        let mut hidden = Vec::with_capacity(self.rbm_layers.len());
        for l in (0..self.rbm_layers.len()).rev() {
            let a = &acts[l + 1];
            let d = &back * &a.mapv(|v| v * (1.0 - v));
            hidden.push(DenseGrad::from_delta(acts[l].view(), &d));
            if l > 0 {
                back = d.dot(&self.rbm_layers[l].weights.t());
            }
        }
        hidden.reverse();
        Ok((loss, DbnGrad { hidden, output }))
    }

    /// Fine-tuned parameters as one vector: per hidden layer weights then
    /// hidden bias, then output weights and bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for r in &self.rbm_layers {
            out.extend(r.weights.iter());
            out.extend(r.hidden_bias.iter());
        }
        out.extend(self.output_layer.weights.iter());
        out.extend(self.output_layer.bias.iter());
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.params().len();
        if flat.len() != expected {
            return Err(Error::dims("dbn parameter vector", expected, flat.len()));
        }
        let mut it = flat.iter().copied();
        for r in &mut self.rbm_layers {
            r.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            r.hidden_bias.iter_mut().for_each(|w| *w = it.next().unwrap());
        }
        self.output_layer.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
        self.output_layer.bias.iter_mut().for_each(|w| *w = it.next().unwrap());
        Ok(())
    }

    fn apply(&mut self, g: &DbnGrad, lr: f64) {
        for (r, gl) in self.rbm_layers.iter_mut().zip(&g.hidden) {
            r.weights.scaled_add(-lr, &gl.weights);
            r.hidden_bias.scaled_add(-lr, &gl.bias);
        }
        self.output_layer.weights.scaled_add(-lr, &g.output.weights);
        self.output_layer.bias.scaled_add(-lr, &g.output.bias);
    }
}

impl DbnGrad {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.hidden {
            out.extend(g.weights.iter());
            out.extend(g.bias.iter());
        }
        out.extend(self.output.weights.iter());
        out.extend(self.output.bias.iter());
        out
    }
}

/// Mini-batch gradient descent on mean cross-entropy, learning rate decayed
/// per epoch. The trace holds the full-data loss before training and after
/// every epoch.
pub fn finetune(model: &mut DbnModel, data: ArrayView2<f64>, labels: &[usize], cfg: &TrainConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let initial = model.loss(data, labels)?;
    let mut trace = Vec::with_capacity(cfg.epochs + 1);
    trace.push(initial);
    let batch = cfg.effective_batch(data.nrows());
    let mut rng = seeded_rng(cfg.seed, 0xDB20);
    for epoch in 0..cfg.epochs {
        let lr = adaptive_lr(cfg.lr, cfg.lr_decay, epoch as u64);
        for idx in batches(data.nrows(), batch, &mut rng) {
            let xb = data.select(Axis(0), &idx);
            let yb: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let (_, g) = model.loss_and_grad(xb.view(), &yb)?;
            model.apply(&g, lr);
        }
        let loss = model.loss(data, labels)?;
        if !loss.is_finite() || !model.is_finite() {
            return Err(Error::Numerical(format!("fine-tuning loss became non-finite at epoch {epoch}")));
        }
        debug!("dbn finetune epoch {epoch}: loss {loss:.6}");
        trace.push(loss);
    }
    Ok(trace)
}

/// Argmax with the lowest index winning ties.
pub fn argmax(row: ArrayView1<f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in row.iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

fn log_softmax_rows(mut z: Array2<f64>) -> Array2<f64> {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    z
}

fn mean_nll(logp: &Array2<f64>, labels: &[usize]) -> f64 {
    -labels.iter().enumerate().map(|(i, &y)| logp[[i, y]]).sum::<f64>() / labels.len() as f64
}

/// Exact gradient of the mean log-likelihood for a tiny RBM, by enumeration.
/// Returned as (dW, db, dc).
pub fn exact_loglik_grad(rbm: &Rbm, data: ArrayView2<f64>) -> Result<(Array2<f64>, Array1<f64>, Array1<f64>)> {
    let (v, h) = (rbm.n_visible(), rbm.n_hidden());
    if v + h > EXACT_UNIT_LIMIT {
        return Err(Error::pre("exact gradient limited to tiny machines"));
    }
    if data.ncols() != v || data.nrows() == 0 {
        return Err(Error::dims("exact gradient data", v, data.ncols()));
    }
    // model expectations via the visible marginal: p(x) ∝ exp(-F(x))
    let states: Vec<Array1<f64>> = (0..1usize << v)
        .map(|s| Array1::from_iter((0..v).map(|i| ((s >> i) & 1) as f64)))
        .collect();
    let neg_f: Vec<f64> = states.iter().map(|x| -rbm.free_energy(x.view())).collect();
    let max = neg_f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = neg_f.iter().map(|f| (f - max).exp()).collect();
    let z: f64 = weights.iter().sum();
    let mut model_w = Array2::<f64>::zeros((v, h));
    let mut model_b = Array1::<f64>::zeros(v);
    let mut model_c = Array1::<f64>::zeros(h);
    for (x, w) in states.iter().zip(&weights) {
        let p = w / z;
        let ph = rbm.hidden_probs(x.view());
        model_w.scaled_add(p, &outer(x, &ph));
        model_b.scaled_add(p, x);
        model_c.scaled_add(p, &ph);
    }
    let n = data.nrows() as f64;
    let mut data_w = Array2::<f64>::zeros((v, h));
    let mut data_b = Array1::<f64>::zeros(v);
    let mut data_c = Array1::<f64>::zeros(h);
    for x in data.outer_iter() {
        let ph = rbm.hidden_probs(x);
        let xo = x.to_owned();
        data_w.scaled_add(1.0 / n, &outer(&xo, &ph));
        data_b.scaled_add(1.0 / n, &xo);
        data_c.scaled_add(1.0 / n, &ph);
    }
    Ok((data_w - model_w, data_b - model_b, data_c - model_c))
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let a2 = a.view().insert_axis(Axis(1));
    let b2 = b.view().insert_axis(Axis(0));
    a2.dot(&b2)
}

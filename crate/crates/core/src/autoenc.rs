//! Fully connected autoencoder used to compress features before the SOM and DBN.

use log::{debug, info};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::nn::{Activation, AdamState, Dense, DenseGrad};
use crate::pso::adaptive_lr;
use crate::{exec, seeded_rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AeTrainConfig {
    pub lr: f64,
    pub lr_decay: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop once the mean training loss falls to this value.
    pub stop_loss: Option<f64>,
}

impl Default for AeTrainConfig {
    fn default() -> Self {
        AeTrainConfig {
            lr: 0.001,
            lr_decay: 0.0,
            lambda: 1e-5,
            epochs: 20,
            batch_size: 64,
            seed: 0,
            stop_loss: None,
        }
    }
}

impl AeTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("autoencoder lr must be positive, got {}", self.lr)));
        }
        if !(self.lr_decay.is_finite() && self.lr_decay >= 0.0) {
            return Err(Error::Config("autoencoder lr_decay must be non-negative".into()));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("autoencoder batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Per-epoch training record; index 0 is the state before training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AeTrace {
    pub loss: Vec<f64>,
    pub encoder_norm: Vec<f64>,
}

impl AeTrace {
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "epoch,loss,encoder_norm")?;
        for (i, (l, n)) in self.loss.iter().zip(&self.encoder_norm).enumerate() {
            writeln!(w, "{i},{l},{n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    pub encoder: Vec<Dense>,
    pub decoder: Vec<Dense>,
    pub activation: Activation,
}

struct Pass {
    /// Inputs to each layer, encoder then decoder, plus the final output.
    acts: Vec<Array2<f64>>,
    /// Pre-activations of each layer.
    pre: Vec<Array2<f64>>,
}

impl Autoencoder {
    /// Encoder `input → hidden… → latent`, decoder mirrored with a linear output layer.
    pub fn new(input: usize, hidden: &[usize], latent: usize, activation: Activation, seed: u64) -> Result<Self> {
        if input == 0 || latent == 0 || hidden.contains(&0) {
            return Err(Error::Config("autoencoder layer sizes must be positive".into()));
        }
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(latent);
        let mut rng = seeded_rng(seed, 0xAE);
        let encoder = sizes.windows(2).map(|p| Dense::glorot(p[0], p[1], &mut rng)).collect();
        let decoder = sizes.iter().rev().collect::<Vec<_>>().windows(2).map(|p| Dense::glorot(*p[0], *p[1], &mut rng)).collect();
        Ok(Autoencoder {
            encoder,
            decoder,
            activation,
        })
    }

    pub fn from_layers(encoder: Vec<Dense>, decoder: Vec<Dense>, activation: Activation) -> Result<Self> {
        let ae = Autoencoder {
            encoder,
            decoder,
            activation,
        };
        ae.validate()?;
        Ok(ae)
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder.is_empty() || self.decoder.is_empty() {
            return Err(Error::Config("autoencoder needs encoder and decoder layers".into()));
        }
        let chain = self.encoder.iter().chain(&self.decoder).collect::<Vec<_>>();
        for pair in chain.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::dims("autoencoder layer chain", pair[0].outputs(), pair[1].inputs()));
            }
        }
        if self.decoder.last().unwrap().outputs() != self.input_dim() {
            return Err(Error::dims("autoencoder output", self.input_dim(), self.decoder.last().unwrap().outputs()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].inputs()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.last().unwrap().outputs()
    }

    pub fn is_finite(&self) -> bool {
        self.encoder.iter().chain(&self.decoder).all(Dense::is_finite)
    }

    /// Squared L2 norm of the encoder weight matrices.
    pub fn encoder_norm(&self) -> f64 {
        self.encoder.iter().map(|l| l.weights.iter().map(|w| w * w).sum::<f64>()).sum()
    }

    fn layer_activation(&self, layer: usize) -> Activation {
        if layer == self.encoder.len() + self.decoder.len() - 1 {
            Activation::Linear
        } else {
            self.activation
        }
    }

    fn run(&self, layers: &[Dense], offset: usize, x: ArrayView2<f64>) -> Array2<f64> {
        let mut a = x.to_owned();
        for (i, l) in layers.iter().enumerate() {
            let act = self.layer_activation(offset + i);
            a = l.forward(a.view()).mapv_into(|z| act.apply(z));
        }
        a
    }

    pub fn encode_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::dims("autoencoder input", self.input_dim(), x.ncols()));
        }
        Ok(exec::map_row_chunks(x, 4096, |rows| self.run(&self.encoder, 0, rows)))
    }

    pub fn decode_batch(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        if z.ncols() != self.latent_dim() {
            return Err(Error::dims("autoencoder latent", self.latent_dim(), z.ncols()));
        }
        let off = self.encoder.len();
        Ok(exec::map_row_chunks(z, 4096, |rows| self.run(&self.decoder, off, rows)))
    }

    pub fn encode(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        Ok(self.encode_batch(x.insert_axis(Axis(0)))?.row(0).to_owned())
    }

    pub fn decode(&self, z: ArrayView1<f64>) -> Result<Array1<f64>> {
        Ok(self.decode_batch(z.insert_axis(Axis(0)))?.row(0).to_owned())
    }

    pub fn reconstruct(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let z = self.encode_batch(x)?;
        self.decode_batch(z.view())
    }

    /// Squared reconstruction error of every row.
    pub fn reconstruction_errors(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        let r = self.reconstruct(x)?;
        Ok(x.outer_iter()
            .zip(r.outer_iter())
            .map(|(a, b)| a.iter().zip(b.iter()).map(|(u, v)| (u - v) * (u - v)).sum())
            .collect())
    }

    /// `(1/N) Σ ‖x − x̂‖²`.
    pub fn reconstruction_loss(&self, x: ArrayView2<f64>) -> Result<f64> {
        if x.nrows() == 0 {
            return Err(Error::EmptyInput("reconstruction loss data".into()));
        }
        let errs = self.reconstruction_errors(x)?;
        Ok(errs.iter().sum::<f64>() / errs.len() as f64)
    }

    /// Reconstruction loss plus `lambda` times the encoder weight norm.
    pub fn regularized_loss(&self, x: ArrayView2<f64>, lambda: f64) -> Result<f64> {
        Ok(self.reconstruction_loss(x)? + lambda * self.encoder_norm())
    }

    fn forward_pass(&self, x: ArrayView2<f64>) -> Pass {
        let mut acts = vec![x.to_owned()];
        let mut pre = Vec::new();
        for (i, l) in self.encoder.iter().chain(&self.decoder).enumerate() {
            let act = self.layer_activation(i);
            let z = l.forward(acts.last().unwrap().view());
            acts.push(z.mapv(|v| act.apply(v)));
            pre.push(z);
        }
        Pass { acts, pre }
    }

    /// Regularized loss and its gradient, one [`DenseGrad`] per layer (encoder first).
    pub fn loss_and_grad(&self, x: ArrayView2<f64>, lambda: f64) -> Result<(f64, Vec<DenseGrad>)> {
        if x.ncols() != self.input_dim() {
            return Err(Error::dims("autoencoder input", self.input_dim(), x.ncols()));
        }
        if x.nrows() == 0 {
            return Err(Error::EmptyInput("autoencoder batch".into()));
        }
        let n = x.nrows() as f64;
        let pass = self.forward_pass(x);
        let out = pass.acts.last().unwrap();
        let diff = out - &x;
        let loss = diff.iter().map(|d| d * d).sum::<f64>() / n + lambda * self.encoder_norm();
        let layers: Vec<&Dense> = self.encoder.iter().chain(&self.decoder).collect();
        let mut grads = Vec::with_capacity(layers.len());
        let mut upstream = diff * (2.0 / n);
        for i in (0..layers.len()).rev() {
            let act = self.layer_activation(i);
            let mut delta = upstream;
            ndarray::Zip::from(&mut delta)
                .and(&pass.pre[i])
                .and(&pass.acts[i + 1])
                .for_each(|d, &z, &a| *d *= act.derivative(z, a));
            let mut g = DenseGrad::from_delta(pass.acts[i].view(), &delta);
            if i < self.encoder.len() && lambda != 0.0 {
                g.weights.scaled_add(2.0 * lambda, &layers[i].weights);
            }
            upstream = delta.dot(&layers[i].weights.t());
            grads.push(g);
        }
        grads.reverse();
        Ok((loss, grads))
    }

    /// All parameters, layer by layer (weights then bias), encoder first.
    pub fn params(&self) -> Vec<f64> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        let expected: usize = self.encoder.iter().chain(&self.decoder).map(Dense::n_params).sum();
        if flat.len() != expected {
            return Err(Error::dims("autoencoder parameter vector", expected, flat.len()));
        }
        let mut it = flat.iter().copied();
        for l in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|w| *w = it.next().unwrap());
        }
        Ok(())
    }

    /// Mini-batch Adam on the regularized loss with an epoch-decayed base rate.
    pub fn train(&mut self, x: ArrayView2<f64>, cfg: &AeTrainConfig) -> Result<AeTrace> {
        cfg.validate()?;
        if x.ncols() != self.input_dim() {
            return Err(Error::dims("autoencoder training data", self.input_dim(), x.ncols()));
        }
        if x.nrows() == 0 {
            return Err(Error::EmptyInput("autoencoder training data".into()));
        }
        let mut trace = AeTrace::default();
        trace.loss.push(self.regularized_loss(x, cfg.lambda)?);
        trace.encoder_norm.push(self.encoder_norm());
        let mut states: Vec<AdamState> = self.encoder.iter().chain(&self.decoder).map(AdamState::new).collect();
        let batch = cfg.batch_size.min(x.nrows());
        let mut rng = seeded_rng(cfg.seed, 0xAE1);
        let mut order: Vec<usize> = (0..x.nrows()).collect();
        let mut t = 0u64;
        for epoch in 0..cfg.epochs {
            if cfg.stop_loss.is_some_and(|s| *trace.loss.last().unwrap() <= s) {
                info!("autoencoder reached stop loss after {epoch} epochs");
                break;
            }
            let lr = adaptive_lr(cfg.lr, cfg.lr_decay, epoch as u64);
            order.shuffle(&mut rng);
            for idx in order.chunks(batch) {
                let xb = x.select(Axis(0), idx);
                let (_, grads) = self.loss_and_grad(xb.view(), cfg.lambda)?;
                t += 1;
                for ((layer, state), g) in self
                    .encoder
                    .iter_mut()
                    .chain(self.decoder.iter_mut())
                    .zip(states.iter_mut())
                    .zip(&grads)
                {
                    state.step(layer, g, lr, t);
                }
            }
            let loss = self.regularized_loss(x, cfg.lambda)?;
            if !loss.is_finite() || !self.is_finite() {
                return Err(Error::Numerical(format!(
                    "autoencoder loss became non-finite at epoch {epoch} (trace {:?})",
                    trace.loss
                )));
            }
            debug!("autoencoder epoch {epoch}: loss {loss:.6}");
            trace.loss.push(loss);
            trace.encoder_norm.push(self.encoder_norm());
        }
        Ok(trace)
    }

    /// Replaces the features of `ds` with latent codes `z0..`.
    pub fn compress(&self, ds: &Dataset) -> Result<Dataset> {
        let z = self.encode_batch(ds.features.view())?;
        ds.with_features(z, "z")
    }
}

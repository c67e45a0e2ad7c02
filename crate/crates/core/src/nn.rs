//! Dense-layer building blocks shared by the autoencoder and the DBN.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Linear => 1.0,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "sigmoid" => Some(Activation::Sigmoid),
            "linear" => Some(Activation::Linear),
            _ => None,
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Row-wise softmax, max-shifted.
pub fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Uniform Glorot initialisation in ±sqrt(6 / (fan_in + fan_out)).
pub fn glorot(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Array2<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-limit..=limit))
}

/// Affine layer `y = x W + b` with `W` stored as (inputs × outputs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>) -> Self {
        assert_eq!(weights.ncols(), bias.len(), "bias length must match outputs");
        Dense { weights, bias }
    }

    pub fn glorot(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        Dense {
            weights: glorot(fan_in, fan_out, rng),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense {
            weights: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }

    /// Pre-activations for a batch of rows.
    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights);
        z += &self.bias;
        z
    }

    pub fn sum_squares(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>() + self.bias.iter().map(|b| b * b).sum::<f64>()
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

/// Gradient of a [`Dense`] layer for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseGrad {
    /// Gradient given the layer input `x` and the error `delta` at its pre-activation.
    pub fn from_delta(x: ArrayView2<f64>, delta: &Array2<f64>) -> Self {
        DenseGrad {
            weights: x.t().dot(delta),
            bias: delta.sum_axis(Axis(0)),
        }
    }
}

/// Adam moment estimates for one layer.
#[derive(Debug, Clone)]
pub struct AdamState {
    m_w: Array2<f64>,
    v_w: Array2<f64>,
    m_b: Array1<f64>,
    v_b: Array1<f64>,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(layer: &Dense) -> Self {
        AdamState {
            m_w: Array2::zeros(layer.weights.raw_dim()),
            v_w: Array2::zeros(layer.weights.raw_dim()),
            m_b: Array1::zeros(layer.bias.len()),
            v_b: Array1::zeros(layer.bias.len()),
        }
    }

    /// One bias-corrected Adam step; `t` counts steps from 1.
    pub fn step(&mut self, layer: &mut Dense, grad: &DenseGrad, lr: f64, t: u64) {
        let c1 = 1.0 - ADAM_BETA1.powi(t as i32);
        let c2 = 1.0 - ADAM_BETA2.powi(t as i32);
        ndarray::Zip::from(&mut layer.weights)
            .and(&mut self.m_w)
            .and(&mut self.v_w)
            .and(&grad.weights)
            .for_each(|w, m, v, &g| {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
            });
        ndarray::Zip::from(&mut layer.bias)
            .and(&mut self.m_b)
            .and(&mut self.v_b)
            .and(&grad.bias)
            .for_each(|b, m, v, &g| {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                *b -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
            });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) == 1.0);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!((softplus(-800.0)).abs() < 1e-300);
        assert!((softplus(800.0) - 800.0).abs() < 1e-9);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let mut l = array![[3.0, 3.0, 3.0, 3.0]];
        softmax_rows(&mut l);
        for v in l.iter() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn dense_forward_matches_hand_arithmetic() {
        let d = Dense::new(array![[1.0, 2.0], [3.0, 4.0]], array![0.5, -0.5]);
        let y = d.forward(array![[1.0, 1.0]].view());
        assert_eq!(y, array![[4.5, 5.5]]);
    }
}

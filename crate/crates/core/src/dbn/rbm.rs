use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::nn::{glorot, sigmoid, softplus};
use crate::{Error, Result, Rng};

/// Largest visible + hidden size accepted by [`Rbm::exact_loglik`].
pub const EXACT_UNIT_LIMIT: usize = 20;

/// Bernoulli restricted Boltzmann machine. `weights` is visible × hidden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rbm {
    pub weights: Array2<f64>,
    pub visible_bias: Array1<f64>,
    pub hidden_bias: Array1<f64>,
}

/// Phase statistics of one contrastive-divergence update, averaged over the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct CdStats {
    pub positive: Array2<f64>,
    pub negative: Array2<f64>,
    pub reconstruction_error: f64,
}

/// Un-scaled CD parameter direction.
#[derive(Debug, Clone, PartialEq)]
pub struct CdGradient {
    pub weights: Array2<f64>,
    pub visible_bias: Array1<f64>,
    pub hidden_bias: Array1<f64>,
    pub stats: CdStats,
}

fn bernoulli(p: &Array2<f64>, rng: &mut Rng) -> Array2<f64> {
    p.mapv(|q| if rng.random::<f64>() < q { 1.0 } else { 0.0 })
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl Rbm {
    pub fn new(visible: usize, hidden: usize, rng: &mut Rng) -> Self {
        Rbm {
            weights: glorot(visible, hidden, rng),
            visible_bias: Array1::zeros(visible),
            hidden_bias: Array1::zeros(hidden),
        }
    }

    pub fn from_parts(weights: Array2<f64>, visible_bias: Array1<f64>, hidden_bias: Array1<f64>) -> Result<Self> {
        if weights.nrows() != visible_bias.len() {
            return Err(Error::dims("rbm visible bias", weights.nrows(), visible_bias.len()));
        }
        if weights.ncols() != hidden_bias.len() {
            return Err(Error::dims("rbm hidden bias", weights.ncols(), hidden_bias.len()));
        }
        Ok(Rbm {
            weights,
            visible_bias,
            hidden_bias,
        })
    }

    pub fn n_visible(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_hidden(&self) -> usize {
        self.weights.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.visible_bias)
            .chain(&self.hidden_bias)
            .all(|v| v.is_finite())
    }

    /// `E(x, h) = -b·x - c·h - xᵀ W h`.
    pub fn energy(&self, x: ArrayView1<f64>, h: ArrayView1<f64>) -> Result<f64> {
        if x.len() != self.n_visible() {
            return Err(Error::dims("rbm energy visible", self.n_visible(), x.len()));
        }
        if h.len() != self.n_hidden() {
            return Err(Error::dims("rbm energy hidden", self.n_hidden(), h.len()));
        }
        Ok(self.energy_unchecked(x, h))
    }

    fn energy_unchecked(&self, x: ArrayView1<f64>, h: ArrayView1<f64>) -> f64 {
        -self.visible_bias.dot(&x) - self.hidden_bias.dot(&h) - x.dot(&self.weights.dot(&h))
    }

    pub fn hidden_probs(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let mut z = x.dot(&self.weights);
        z += &self.hidden_bias;
        z.mapv_into(sigmoid)
    }

    pub fn visible_probs(&self, h: ArrayView1<f64>) -> Array1<f64> {
        let mut z = self.weights.dot(&h);
        z += &self.visible_bias;
        z.mapv_into(sigmoid)
    }

    pub fn hidden_probs_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights);
        z += &self.hidden_bias;
        z.mapv_into(sigmoid)
    }

    pub fn visible_probs_batch(&self, h: ArrayView2<f64>) -> Array2<f64> {
        let mut z = h.dot(&self.weights.t());
        z += &self.visible_bias;
        z.mapv_into(sigmoid)
    }

    /// `-log Σ_h exp(-E(x, h))`, summed over hidden units in closed form.
    pub fn free_energy(&self, x: ArrayView1<f64>) -> f64 {
        let pre = x.dot(&self.weights) + &self.hidden_bias;
        -self.visible_bias.dot(&x) - pre.iter().map(|&z| softplus(z)).sum::<f64>()
    }

    /// CD-k direction: positive statistics from hidden probabilities on the
    /// data, negative statistics after `k` Gibbs steps with sampled hidden
    /// states and mean-field visible reconstructions.
    pub fn cd_gradient(&self, batch: ArrayView2<f64>, k: usize, rng: &mut Rng) -> Result<CdGradient> {
        if batch.ncols() != self.n_visible() {
            return Err(Error::dims("rbm batch", self.n_visible(), batch.ncols()));
        }
        if batch.nrows() == 0 {
            return Err(Error::EmptyInput("rbm batch".into()));
        }
        let k = k.max(1);
        let n = batch.nrows() as f64;
        let ph0 = self.hidden_probs_batch(batch);
        let mut h = bernoulli(&ph0, rng);
        let mut pv = Array2::zeros(batch.raw_dim());
        let mut ph = ph0.clone();
        for step in 1..=k {
            pv = self.visible_probs_batch(h.view());
            ph = self.hidden_probs_batch(pv.view());
            if step < k {
                h = bernoulli(&ph, rng);
            }
        }
        let positive = batch.t().dot(&ph0) / n;
        let negative = pv.t().dot(&ph) / n;
        let diff_v = &batch - &pv;
        let reconstruction_error = diff_v.iter().map(|d| d * d).sum::<f64>() / n;
        Ok(CdGradient {
            weights: &positive - &negative,
            visible_bias: diff_v.sum_axis(Axis(0)) / n,
            hidden_bias: (&ph0 - &ph).sum_axis(Axis(0)) / n,
            stats: CdStats {
                positive,
                negative,
                reconstruction_error,
            },
        })
    }

    /// Applies one CD-k step with learning rate `eta`.
    pub fn cd_update(&mut self, batch: ArrayView2<f64>, eta: f64, k: usize, rng: &mut Rng) -> Result<CdStats> {
        let g = self.cd_gradient(batch, k, rng)?;
        let finite = g
            .weights
            .iter()
            .chain(&g.visible_bias)
            .chain(&g.hidden_bias)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Numerical(format!(
                "non-finite CD update (reconstruction error {})",
                g.stats.reconstruction_error
            )));
        }
        if eta != 0.0 {
            self.weights.scaled_add(eta, &g.weights);
            self.visible_bias.scaled_add(eta, &g.visible_bias);
            self.hidden_bias.scaled_add(eta, &g.hidden_bias);
        }
        Ok(g.stats)
    }

    /// Exact `Σ_n log P(x⁽ⁿ⁾)` with the partition function enumerated over
    /// every joint binary state. Only for tiny machines and binary data.
    pub fn exact_loglik(&self, data: ArrayView2<f64>) -> Result<f64> {
        let (v, h) = (self.n_visible(), self.n_hidden());
        if v + h > EXACT_UNIT_LIMIT {
            return Err(Error::pre(format!(
                "exact likelihood limited to {EXACT_UNIT_LIMIT} units, machine has {}",
                v + h
            )));
        }
        if data.ncols() != v {
            return Err(Error::dims("exact_loglik data", v, data.ncols()));
        }
        if data.iter().any(|&x| x != 0.0 && x != 1.0) {
            return Err(Error::pre("exact likelihood requires binary data"));
        }
        let states = |bits: usize, n: usize| -> Array1<f64> {
            Array1::from_iter((0..n).map(|i| ((bits >> i) & 1) as f64))
        };
        let hidden_states: Vec<Array1<f64>> = (0..1usize << h).map(|s| states(s, h)).collect();
        let visible_states: Vec<Array1<f64>> = (0..1usize << v).map(|s| states(s, v)).collect();
        let neg_energies = visible_states.iter().flat_map(|xs| {
            hidden_states
                .iter()
                .map(move |hs| -self.energy_unchecked(xs.view(), hs.view()))
        });
        let log_z = log_sum_exp(neg_energies.collect::<Vec<_>>().into_iter());
        let mut total = 0.0;
        for x in data.outer_iter() {
            let terms: Vec<f64> = hidden_states
                .iter()
                .map(|hs| -self.energy_unchecked(x, hs.view()))
                .collect();
            total += log_sum_exp(terms.into_iter()) - log_z;
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use ndarray::array;

    fn fixture() -> Rbm {
        Rbm::from_parts(
            array![[0.5, -1.0], [0.25, 0.75], [-0.5, 2.0]],
            array![0.1, -0.2, 0.3],
            array![-0.4, 0.6],
        )
        .unwrap()
    }

    #[test]
    fn energy_special_cases() {
        let r = fixture();
        assert_eq!(r.energy(array![0.0, 0.0, 0.0].view(), array![0.0, 0.0].view()).unwrap(), 0.0);
        let one = Rbm::from_parts(array![[0.0]], array![0.5], array![0.0]).unwrap();
        assert_eq!(one.energy(array![1.0].view(), array![0.0].view()).unwrap(), -0.5);
        assert!(r.energy(array![1.0].view(), array![0.0, 0.0].view()).is_err());
    }

    #[test]
    fn energy_matches_direct_summation() {
        let r = fixture();
        let x = [1.0, 0.0, 1.0];
        let h = [1.0, 1.0];
        let w = [[0.5, -1.0], [0.25, 0.75], [-0.5, 2.0]];
        let b = [0.1, -0.2, 0.3];
        let c = [-0.4, 0.6];
        let mut e = 0.0;
        for i in 0..3 {
            e -= b[i] * x[i];
        }
        for j in 0..2 {
            e -= c[j] * h[j];
        }
        for i in 0..3 {
            for j in 0..2 {
                e -= w[i][j] * x[i] * h[j];
            }
        }
        let got = r.energy(array![1.0, 0.0, 1.0].view(), array![1.0, 1.0].view()).unwrap();
        assert!((got - e).abs() < 1e-14);
        // with x scaled by 0 only the hidden-bias term survives
        let zero_x = r.energy(array![0.0, 0.0, 0.0].view(), array![1.0, 1.0].view()).unwrap();
        assert_eq!(zero_x, -(c[0] + c[1]));
    }

    #[test]
    fn conditionals() {
        let zero = Rbm::from_parts(Array2::zeros((2, 2)), Array1::zeros(2), Array1::zeros(2)).unwrap();
        assert_eq!(zero.hidden_probs(array![1.0, 0.0].view()), array![0.5, 0.5]);
        assert_eq!(zero.visible_probs(array![1.0, 1.0].view()), array![0.5, 0.5]);
        let sat = Rbm::from_parts(Array2::zeros((1, 1)), Array1::zeros(1), array![50.0]).unwrap();
        assert!(sat.hidden_probs(array![0.0].view())[0] > 1.0 - 1e-15);

        let r = Rbm::from_parts(array![[1.0, -2.0], [0.5, 0.25]], array![0.0, 0.1], array![0.2, -0.3]).unwrap();
        let p = r.hidden_probs(array![1.0, 1.0].view());
        assert!((p[0] - 1.0 / (1.0 + (-(0.2 + 1.0 + 0.5f64)).exp())).abs() < 1e-15);
        assert!((p[1] - 1.0 / (1.0 + (-(-0.3 - 2.0 + 0.25f64)).exp())).abs() < 1e-15);
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut r = fixture();
        let before = r.clone();
        let mut rng = seeded_rng(1, 0);
        r.cd_update(array![[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]].view(), 0.0, 1, &mut rng).unwrap();
        assert_eq!(r, before);
    }

    #[test]
    fn positive_phase_is_closed_form() {
        let mut rng = seeded_rng(3, 0);
        let r = Rbm::new(6, 4, &mut rng);
        let batch = array![
            [1.0, 0.0, 1.0, 1.0, 0.0, 0.0],
            [0.0, 1.0, 1.0, 0.0, 1.0, 0.0],
            [0.2, 0.9, 0.0, 0.4, 1.0, 1.0]
        ];
        let g = r.cd_gradient(batch.view(), 1, &mut rng).unwrap();
        let mut expected = Array2::<f64>::zeros((6, 4));
        for x in batch.outer_iter() {
            let p = r.hidden_probs(x);
            for i in 0..6 {
                for j in 0..4 {
                    expected[[i, j]] += x[i] * p[j] / 3.0;
                }
            }
        }
        for (a, b) in g.stats.positive.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_fixture_has_zero_expected_update() {
        // uniform data against a machine whose visible marginal is uniform
        let r = Rbm::from_parts(Array2::zeros((3, 2)), Array1::zeros(3), array![0.7, -0.3]).unwrap();
        let data = Array2::from_shape_fn((8, 3), |(s, i)| ((s >> i) & 1) as f64);
        let mut rng = seeded_rng(11, 0);
        let draws = 400;
        let mut sum = Array2::<f64>::zeros((3, 2));
        let mut sum_sq = Array2::<f64>::zeros((3, 2));
        for _ in 0..draws {
            let g = r.cd_gradient(data.view(), 1, &mut rng).unwrap();
            sum += &g.weights;
            sum_sq += &g.weights.mapv(|v| v * v);
        }
        for (s, sq) in sum.iter().zip(sum_sq.iter()) {
            let mean = s / draws as f64;
            let var = (sq / draws as f64 - mean * mean).max(0.0);
            let se = (var / draws as f64).sqrt();
            assert!(mean.abs() <= 3.0 * se + 1e-12, "mean {mean} se {se}");
        }
    }

    #[test]
    fn exact_loglik_trivial_cases() {
        let r = Rbm::from_parts(Array2::zeros((1, 1)), Array1::zeros(1), Array1::zeros(1)).unwrap();
        let ll = r.exact_loglik(array![[0.0], [1.0]].view()).unwrap();
        assert!((ll - 2.0 * -(2.0f64.ln())).abs() < 1e-14);

        let big = Rbm::from_parts(Array2::zeros((15, 6)), Array1::zeros(15), Array1::zeros(6)).unwrap();
        assert!(big.exact_loglik(Array2::zeros((1, 15)).view()).is_err());
        assert!(r.exact_loglik(array![[0.5]].view()).is_err());
    }
}

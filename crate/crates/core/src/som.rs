//! Self-organizing map on a rectangular lattice, with quantization-error
//! anomaly scoring and U-matrix export.

use std::io::Write;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::{exec, seeded_rng, Error, Result};

/// Weight vectors of a `height × width` lattice. Node `i` sits at
/// row `i / width`, column `i % width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomGrid {
    pub width: usize,
    pub height: usize,
    pub weights: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NeighborhoodMode {
    /// Gaussian of the lattice distance between node and BMU.
    #[default]
    Lattice,
    /// Gaussian of the input-to-weight distance, as the update rule is printed.
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SomSchedule {
    pub eta0: f64,
    pub sigma0: f64,
    /// Learning-rate decay constant in presentations; `None` uses the default.
    pub tau_eta: Option<f64>,
    pub tau_sigma: Option<f64>,
    pub epochs: usize,
    pub neighborhood: NeighborhoodMode,
}

impl Default for SomSchedule {
    fn default() -> Self {
        SomSchedule {
            eta0: 0.1,
            sigma0: 3.0,
            tau_eta: None,
            tau_sigma: None,
            epochs: 10,
            neighborhood: NeighborhoodMode::Lattice,
        }
    }
}

const SIGMA_FLOOR: f64 = 1e-6;

impl SomSchedule {
    pub fn validate(&self) -> Result<()> {
        // eta0 = 0 is accepted as a frozen map.
        if !(self.eta0 >= 0.0 && self.eta0 <= 1.0) {
            return Err(Error::pre(format!("eta0 must lie in (0, 1], got {}", self.eta0)));
        }
        if !(self.sigma0 >= 0.5) {
            return Err(Error::pre(format!("sigma0 must be at least 0.5, got {}", self.sigma0)));
        }
        for tau in [self.tau_eta, self.tau_sigma].into_iter().flatten() {
            if !(tau > 0.0) {
                return Err(Error::pre("decay constants must be positive"));
            }
        }
        Ok(())
    }

    /// Default decay constant: total presentations over `ln(sigma0)`, so the
    /// radius shrinks to about 1 by the end of training.
    pub fn default_tau(&self, total: usize) -> f64 {
        let total = total.max(1) as f64;
        let l = self.sigma0.ln();
        if l > 1e-3 {
            total / l
        } else {
            total
        }
    }

    pub fn eta(&self, t: usize, total: usize) -> f64 {
        let tau = self.tau_eta.unwrap_or_else(|| self.default_tau(total));
        self.eta0 * (-(t as f64) / tau).exp()
    }

    pub fn sigma(&self, t: usize, total: usize) -> f64 {
        let tau = self.tau_sigma.unwrap_or_else(|| self.default_tau(total));
        self.sigma0 * (-(t as f64) / tau).exp()
    }
}

#[inline]
fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl SomGrid {
    /// Weights drawn i.i.d. uniform in `[lo, hi]`. `lo == hi` gives a constant grid.
    pub fn init(width: usize, height: usize, dim: usize, seed: u64, range: (f64, f64)) -> Result<Self> {
        if width == 0 || height == 0 || dim == 0 {
            return Err(Error::pre("grid width, height and dim must be positive"));
        }
        let (lo, hi) = range;
        if !(lo <= hi) {
            return Err(Error::pre(format!("init range needs lo <= hi, got ({lo}, {hi})")));
        }
        let mut rng = seeded_rng(seed, 0x50);
        let weights = if lo == hi {
            Array2::from_elem((width * height, dim), lo)
        } else {
            Array2::from_shape_simple_fn((width * height, dim), || rng.random_range(lo..=hi))
        };
        Ok(SomGrid {
            width,
            height,
            weights,
        })
    }

    pub fn from_weights(width: usize, height: usize, weights: Array2<f64>) -> Result<Self> {
        if weights.nrows() != width * height {
            return Err(Error::dims("som weights", width * height, weights.nrows()));
        }
        Ok(SomGrid {
            width,
            height,
            weights,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.width * self.height
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn coords(&self, node: usize) -> (usize, usize) {
        (node / self.width, node % self.width)
    }

    fn check_input(&self, x: ArrayView1<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::dims("som input", self.dim(), x.len()));
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::Numerical("NaN in SOM input".into()));
        }
        Ok(())
    }

    fn bmu_unchecked(&self, x: ArrayView1<f64>) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, w) in self.weights.outer_iter().enumerate() {
            let d = sq_dist(x, w);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    /// Node nearest to `x`; ties go to the lowest index.
    pub fn find_bmu(&self, x: ArrayView1<f64>) -> Result<usize> {
        self.check_input(x)?;
        Ok(self.bmu_unchecked(x).0)
    }

    /// Euclidean distance from `x` to its BMU weight vector.
    pub fn quantization_error(&self, x: ArrayView1<f64>) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.bmu_unchecked(x).1.sqrt())
    }

    /// BMU index and quantization error for every row.
    pub fn bmu_batch(&self, data: ArrayView2<f64>) -> Result<Vec<(usize, f64)>> {
        if data.ncols() != self.dim() {
            return Err(Error::dims("som input", self.dim(), data.ncols()));
        }
        if data.iter().any(|v| v.is_nan()) {
            return Err(Error::Numerical("NaN in SOM input".into()));
        }
        let rows: Vec<usize> = (0..data.nrows()).collect();
        Ok(exec::map(&rows, |&r| {
            let (i, d) = self.bmu_unchecked(data.row(r));
            (i, d.sqrt())
        }))
    }

    pub fn mean_quantization_error(&self, data: ArrayView2<f64>) -> Result<f64> {
        let qe = self.bmu_batch(data)?;
        Ok(qe.iter().map(|(_, q)| q).sum::<f64>() / qe.len().max(1) as f64)
    }

    /// Trains in place and returns the mean quantization error before
    /// training followed by one value per epoch.
    pub fn train(&mut self, data: ArrayView2<f64>, sched: &SomSchedule, seed: u64) -> Result<Vec<f64>> {
        sched.validate()?;
        if data.nrows() == 0 {
            return Err(Error::EmptyInput("SOM training data".into()));
        }
        let mut trace = vec![self.mean_quantization_error(data)?];
        let total = sched.epochs * data.nrows();
        let mut rng = seeded_rng(seed, 0x51);
        let mut order: Vec<usize> = (0..data.nrows()).collect();
        let mut coords: Vec<(f64, f64)> = Vec::with_capacity(self.n_nodes());
        for i in 0..self.n_nodes() {
            let (r, c) = self.coords(i);
            coords.push((r as f64, c as f64));
        }
        let mut warned = false;
        let mut h = vec![0.0; self.n_nodes()];
        let mut t = 0usize;
        for _ in 0..sched.epochs {
            order.shuffle(&mut rng);
            for &s in &order {
                let x = data.row(s);
                let eta = sched.eta(t, total);
                let mut sigma = sched.sigma(t, total);
                if sigma < SIGMA_FLOOR {
                    if !warned {
                        log::warn!("neighborhood width underflow at t={t}; clamped to {SIGMA_FLOOR}");
                        warned = true;
                    }
                    sigma = SIGMA_FLOOR;
                }
                let denom = 2.0 * sigma * sigma;
                let (bmu, _) = self.bmu_unchecked(x);
                match sched.neighborhood {
                    NeighborhoodMode::Lattice => {
                        let (br, bc) = coords[bmu];
                        for (i, &(r, c)) in coords.iter().enumerate() {
                            let d2 = (r - br) * (r - br) + (c - bc) * (c - bc);
                            h[i] = (-d2 / denom).exp();
                        }
                    }
                    NeighborhoodMode::PaperLiteral => {
                        for (i, w) in self.weights.outer_iter().enumerate() {
                            h[i] = (-sq_dist(x, w) / denom).exp();
                        }
                    }
                }
                for (i, mut w) in self.weights.outer_iter_mut().enumerate() {
                    let step = eta * h[i];
                    if step == 0.0 {
                        continue;
                    }
                    w.zip_mut_with(&x, |wv, &xv| *wv += step * (xv - *wv));
                }
                t += 1;
            }
            if self.weights.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical("SOM weights diverged".into()));
            }
            trace.push(self.mean_quantization_error(data)?);
        }
        Ok(trace)
    }

    /// Mean distance from each node to its 4-neighbours, as a height × width grid.
    pub fn u_matrix(&self) -> Array2<f64> {
        let mut u = Array2::zeros((self.height, self.width));
        for r in 0..self.height {
            for c in 0..self.width {
                let me = self.weights.row(r * self.width + c);
                let mut sum = 0.0;
                let mut n = 0;
                let mut visit = |rr: usize, cc: usize| {
                    sum += sq_dist(me, self.weights.row(rr * self.width + cc)).sqrt();
                    n += 1;
                };
                if r > 0 {
                    visit(r - 1, c);
                }
                if r + 1 < self.height {
                    visit(r + 1, c);
                }
                if c > 0 {
                    visit(r, c - 1);
                }
                if c + 1 < self.width {
                    visit(r, c + 1);
                }
                u[[r, c]] = if n > 0 { sum / n as f64 } else { 0.0 };
            }
        }
        u
    }

    /// BMU hit counts as a height × width grid.
    pub fn hit_map(&self, data: ArrayView2<f64>) -> Result<Array2<u64>> {
        let mut hits = Array2::zeros((self.height, self.width));
        for (bmu, _) in self.bmu_batch(data)? {
            let (r, c) = self.coords(bmu);
            hits[[r, c]] += 1;
        }
        Ok(hits)
    }
}

/// Writes a 2-D grid as CSV, one lattice row per line.
pub fn write_grid_csv<W: Write, T: std::fmt::Display>(w: &mut W, grid: &Array2<T>) -> std::io::Result<()> {
    for row in grid.outer_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Nearest-rank percentile of `values` (`p` in (0, 100]).
pub fn nearest_rank(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("percentile input".into()));
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(Error::pre(format!("percentile must lie in (0, 100], got {p}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// A trained grid plus a quantization-error threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyModel {
    pub grid: SomGrid,
    pub threshold: f64,
    pub threshold_percentile: f64,
}

impl AnomalyModel {
    /// Threshold at the nearest-rank `percentile` of the quantization errors of `data`.
    pub fn fit(grid: SomGrid, data: ArrayView2<f64>, percentile: f64) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::EmptyInput("anomaly threshold data".into()));
        }
        let qe: Vec<f64> = grid.bmu_batch(data)?.into_iter().map(|(_, q)| q).collect();
        let threshold = nearest_rank(&qe, percentile)?;
        Ok(AnomalyModel {
            grid,
            threshold,
            threshold_percentile: percentile,
        })
    }

    pub fn is_anomaly(&self, x: ArrayView1<f64>) -> Result<bool> {
        Ok(self.grid.quantization_error(x)? > self.threshold)
    }

    /// Quantization error and anomaly flag per row.
    pub fn score_batch(&self, data: ArrayView2<f64>) -> Result<Vec<(f64, bool)>> {
        Ok(self
            .grid
            .bmu_batch(data)?
            .into_iter()
            .map(|(_, q)| (q, q > self.threshold))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn degenerate_range_gives_zero_grid() {
        let g = SomGrid::init(3, 2, 4, 1, (0.0, 0.0)).unwrap();
        assert!(g.weights.iter().all(|v| *v == 0.0));
        assert!(SomGrid::init(3, 2, 4, 1, (1.0, 0.0)).is_err());
    }

    #[test]
    fn init_is_deterministic_and_shaped() {
        let a = SomGrid::init(10, 10, 41, 5, (0.0, 1.0)).unwrap();
        let b = SomGrid::init(10, 10, 41, 5, (0.0, 1.0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.weights.dim(), (100, 41));
    }

    #[test]
    fn exact_match_and_ties() {
        let g = SomGrid::from_weights(2, 2, array![[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [5.0, 5.0]]).unwrap();
        assert_eq!(g.find_bmu(array![5.0, 5.0].view()).unwrap(), 3);
        assert_eq!(g.quantization_error(array![5.0, 5.0].view()).unwrap(), 0.0);
        assert_eq!(g.find_bmu(array![0.0, 0.0].view()).unwrap(), 0);
        let tie = SomGrid::from_weights(2, 1, array![[1.0], [-1.0]]).unwrap();
        assert_eq!(tie.find_bmu(array![0.0].view()).unwrap(), 0);
        assert!(g.find_bmu(array![f64::NAN, 0.0].view()).is_err());
        assert!(g.find_bmu(array![0.0].view()).is_err());
    }

    #[test]
    fn zero_grid_qe_is_input_norm() {
        let g = SomGrid::init(2, 2, 2, 0, (0.0, 0.0)).unwrap();
        let q = g.quantization_error(array![0.6, 0.8].view()).unwrap();
        assert!((q - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_learning_rate_leaves_grid_unchanged() {
        let mut g = SomGrid::init(3, 3, 2, 2, (0.0, 1.0)).unwrap();
        let before = g.clone();
        let sched = SomSchedule {
            eta0: 0.0,
            epochs: 3,
            ..Default::default()
        };
        g.train(array![[0.1, 0.2], [0.9, 0.3]].view(), &sched, 1).unwrap();
        assert_eq!(g, before);
    }

    #[test]
    fn repeated_sample_contracts_bmu_monotonically() {
        let mut g = SomGrid::init(3, 3, 2, 4, (0.0, 1.0)).unwrap();
        let x = array![[0.25, 0.75]];
        let sched = SomSchedule {
            epochs: 1,
            ..Default::default()
        };
        let mut prev = g.quantization_error(x.row(0)).unwrap();
        for step in 0..20 {
            g.train(x.view(), &sched, step).unwrap();
            let now = g.quantization_error(x.row(0)).unwrap();
            assert!(now < prev, "step {step}: {now} >= {prev}");
            prev = now;
        }
    }

    #[test]
    fn u_matrix_edge_cases() {
        let flat = SomGrid::init(4, 3, 2, 0, (0.5, 0.5)).unwrap();
        assert!(flat.u_matrix().iter().all(|v| *v == 0.0));
        let pair = SomGrid::from_weights(2, 1, array![[0.0, 0.0], [3.0, 4.0]]).unwrap();
        assert_eq!(pair.u_matrix(), array![[5.0, 5.0]]);
    }

    #[test]
    fn nearest_rank_examples() {
        assert_eq!(nearest_rank(&[1.0, 2.0, 3.0, 4.0], 50.0).unwrap(), 2.0);
        assert_eq!(nearest_rank(&[3.0, 1.0, 2.0], 100.0).unwrap(), 3.0);
        assert!(nearest_rank(&[], 50.0).is_err());
        assert!(nearest_rank(&[1.0], 0.0).is_err());
    }

    #[test]
    fn threshold_uses_strict_inequality() {
        let g = SomGrid::from_weights(1, 1, array![[0.0]]).unwrap();
        let data = array![[1.0], [2.0], [3.0], [4.0]];
        let m = AnomalyModel::fit(g, data.view(), 100.0).unwrap();
        assert_eq!(m.threshold, 4.0);
        assert!(!m.is_anomaly(array![4.0].view()).unwrap());
        assert!(m.is_anomaly(array![4.0 + 1e-9].view()).unwrap());
        assert!(m.score_batch(data.view()).unwrap().iter().all(|(_, f)| !f));
    }
}

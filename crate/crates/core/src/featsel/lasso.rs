use log::warn;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{FeatureSubset, SelectMethod};
use crate::dataio::Dataset;
use crate::{Error, Result};

/// L1-penalized least squares `(1/2n)‖y − ŷ‖² + λ‖β‖₁` on standardized columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    /// Coefficients on the standardized columns (the penalized ones).
    pub beta: Vec<f64>,
    /// The same coefficients in the original column units.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl LassoModel {
    pub fn selected(&self) -> Vec<usize> {
        (0..self.beta.len()).filter(|&j| self.beta[j] != 0.0).collect()
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.coefficients.len() {
            return Err(Error::dims("lasso input", self.coefficients.len(), x.ncols()));
        }
        Ok(x.dot(&ArrayView1::from(&self.coefficients)) + self.intercept)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LassoOptions {
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            lambda: 0.01,
            tol: 1e-6,
            max_iter: 1000,
        }
    }
}

struct Standardized {
    /// Columns as rows (d × n), centered and scaled to unit population variance.
    z: Array2<f64>,
    yc: Array1<f64>,
    y_mean: f64,
    means: Array1<f64>,
    scales: Array1<f64>,
}

fn standardize(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Standardized> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptyInput("lasso data".into()));
    }
    if y.len() != n {
        return Err(Error::dims("lasso targets", n, y.len()));
    }
    let means = x.mean_axis(Axis(0)).expect("non-empty");
    let mut z = (&x - &means).reversed_axes().as_standard_layout().into_owned();
    let mut scales = Array1::zeros(x.ncols());
    for (j, mut row) in z.outer_iter_mut().enumerate() {
        let s = (row.dot(&row) / n as f64).sqrt();
        if s > 1e-12 * means[j].abs().max(1.0) {
            row /= s;
            scales[j] = s;
        } else {
            row.fill(0.0);
        }
    }
    let y_mean = y.mean().expect("non-empty");
    Ok(Standardized {
        z,
        yc: y.mapv(|v| v - y_mean),
        y_mean,
        means,
        scales,
    })
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Smallest `λ` at which every standardized coefficient is zero: `(1/n)·max|Zᵀy|`.
pub fn lasso_lambda_max(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<f64> {
    let s = standardize(x, y)?;
    let n = x.nrows() as f64;
    Ok(s.z.outer_iter().map(|c| (c.dot(&s.yc) / n).abs()).fold(0.0, f64::max))
}

/// Cyclic coordinate descent in ascending column order. Converged when the
/// largest coefficient change of a sweep is below `tol`.
pub fn lasso_fit(x: ArrayView2<f64>, y: ArrayView1<f64>, lambda: f64, tol: f64, max_iter: usize) -> Result<LassoModel> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::pre(format!("lambda must be non-negative, got {lambda}")));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::pre("lasso inputs must be finite"));
    }
    let s = standardize(x, y)?;
    let n = x.nrows() as f64;
    let d = x.ncols();
    let mut beta = vec![0.0; d];
    let mut resid = s.yc.clone();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut max_delta: f64 = 0.0;
        for j in 0..d {
            if s.scales[j] == 0.0 {
                continue;
            }
            let col = s.z.row(j);
            let rho = col.dot(&resid) / n + beta[j];
            let new = soft_threshold(rho, lambda);
            let delta = new - beta[j];
            if delta != 0.0 {
                resid.scaled_add(-delta, &col);
                beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < tol {
            converged = true;
            break;
        }
    }
    let coefficients: Vec<f64> = (0..d)
        .map(|j| if s.scales[j] == 0.0 { 0.0 } else { beta[j] / s.scales[j] })
        .collect();
    let intercept = s.y_mean - coefficients.iter().zip(&s.means).map(|(c, m)| c * m).sum::<f64>();
    Ok(LassoModel {
        beta,
        coefficients,
        intercept,
        lambda,
        means: s.means.to_vec(),
        scales: s.scales.to_vec(),
        converged,
        iterations,
    })
}

/// LASSO on ±1-coded labels (binary) or the union of one-vs-rest supports
/// (multiclass). The score is the mean training R².
pub fn lasso_select(ds: &Dataset, opts: &LassoOptions) -> Result<FeatureSubset> {
    let k = ds.n_classes();
    let targets: Vec<usize> = if k <= 2 { vec![1.min(k.saturating_sub(1))] } else { (0..k).collect() };
    let mut keep = vec![false; ds.n_features()];
    let mut r2_sum = 0.0;
    for &c in &targets {
        let y = Array1::from_iter(ds.labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }));
        let m = lasso_fit(ds.features.view(), y.view(), opts.lambda, opts.tol, opts.max_iter)?;
        if !m.converged {
            warn!("lasso for class {c} stopped after {} sweeps without converging", m.iterations);
        }
        for j in m.selected() {
            keep[j] = true;
        }
        let pred = m.predict(ds.features.view())?;
        let mean = y.mean().unwrap_or(0.0);
        let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        let ss_res: f64 = y.iter().zip(&pred).map(|(a, b)| (a - b).powi(2)).sum();
        r2_sum += if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };
    }
    let kept: Vec<usize> = (0..keep.len()).filter(|&j| keep[j]).collect();
    let mut subset = FeatureSubset::new(SelectMethod::Lasso, kept, ds, r2_sum / targets.len() as f64)?;
    subset.lambda = Some(opts.lambda);
    Ok(subset)
}

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMethod {
    Minmax,
    Zscore,
}

/// Per-column statistics of a training set. Mean and standard deviation
/// (population) are recorded for both methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub schema_id: String,
    pub method: NormMethod,
    pub columns: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormParams {
    pub fn fit(ds: &Dataset, method: NormMethod) -> Result<Self> {
        if ds.n_rows() == 0 {
            return Err(Error::EmptyInput("normalization input".into()));
        }
        if ds.has_categoricals() {
            return Err(Error::pre("normalize requires all-numeric features; encode categoricals first"));
        }
        let n = ds.n_rows() as f64;
        let d = ds.n_features();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        let mut mean = vec![0.0; d];
        let mut std = vec![0.0; d];
        for (j, col) in ds.features.columns().into_iter().enumerate() {
            let mut sum = 0.0;
            for &v in col {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
                sum += v;
            }
            let m = sum / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            mean[j] = m;
            std[j] = var.sqrt();
        }
        Ok(NormParams {
            schema_id: ds.schema_id.clone(),
            method,
            columns: ds.column_names(),
            min,
            max,
            mean,
            std,
        })
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// Transforms one value of column `j`.
    #[inline]
    pub fn scale(&self, j: usize, v: f64) -> f64 {
        match self.method {
            NormMethod::Minmax => {
                let range = self.max[j] - self.min[j];
                if range > 0.0 {
                    (v - self.min[j]) / range
                } else {
                    0.0
                }
            }
            NormMethod::Zscore => {
                if self.std[j] > 0.0 {
                    (v - self.mean[j]) / self.std[j]
                } else {
                    0.0
                }
            }
        }
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Fits normalization statistics on `ds` and applies them.
pub fn normalize(ds: &Dataset, method: NormMethod) -> Result<(Dataset, NormParams)> {
    let params = NormParams::fit(ds, method)?;
    let out = apply_norm(ds, &params)?;
    Ok((out, params))
}

/// Applies stored statistics. Values outside the training range are not clipped.
pub fn apply_norm(ds: &Dataset, params: &NormParams) -> Result<Dataset> {
    if ds.n_features() != params.dim() {
        return Err(Error::dims("normalization columns", params.dim(), ds.n_features()));
    }
    if ds.has_categoricals() {
        return Err(Error::pre("apply_norm requires all-numeric features"));
    }
    let mut out = ds.clone();
    for mut row in out.features.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = params.scale(j, *v);
        }
    }
    out.norm_params = Some(params.clone());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn col(values: &[f64]) -> Dataset {
        let n = values.len();
        Dataset::from_parts(
            "t",
            vec!["x".into()],
            Array2::from_shape_vec((n, 1), values.to_vec()).unwrap(),
            vec![0; n],
            vec!["a".into()],
        )
        .unwrap()
    }

    #[test]
    fn minmax_maps_endpoints() {
        let (out, p) = normalize(&col(&[0.0, 5.0, 10.0]), NormMethod::Minmax).unwrap();
        assert_eq!(out.features.column(0).to_vec(), vec![0.0, 0.5, 1.0]);
        assert_eq!((p.min[0], p.max[0]), (0.0, 10.0));
    }

    #[test]
    fn constant_column_maps_to_zero_under_both_methods() {
        for m in [NormMethod::Minmax, NormMethod::Zscore] {
            let (out, _) = normalize(&col(&[7.0, 7.0, 7.0]), m).unwrap();
            assert_eq!(out.features.column(0).to_vec(), vec![0.0; 3]);
        }
    }

    #[test]
    fn zscore_has_zero_mean_unit_population_std() {
        let (out, _) = normalize(&col(&[2.0, 4.0, 6.0]), NormMethod::Zscore).unwrap();
        let v = out.features.column(0).to_vec();
        let m = v.iter().sum::<f64>() / 3.0;
        let s = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert!(m.abs() < 1e-12);
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn apply_norm_extends_formula_without_clipping() {
        let (_, p) = normalize(&col(&[0.0, 10.0]), NormMethod::Minmax).unwrap();
        let out = apply_norm(&col(&[5.0, 20.0]), &p).unwrap();
        assert_eq!(out.features.column(0).to_vec(), vec![0.5, 2.0]);

        let (_, flat) = normalize(&col(&[3.0, 3.0]), NormMethod::Minmax).unwrap();
        let out = apply_norm(&col(&[-100.0, 42.0]), &flat).unwrap();
        assert_eq!(out.features.column(0).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn apply_norm_rejects_column_mismatch() {
        let (_, p) = normalize(&col(&[0.0, 1.0]), NormMethod::Minmax).unwrap();
        let two = Dataset::from_parts(
            "t",
            vec!["x".into(), "y".into()],
            Array2::zeros((1, 2)),
            vec![0],
            vec!["a".into()],
        )
        .unwrap();
        assert!(matches!(apply_norm(&two, &p), Err(Error::DimensionMismatch { .. })));
    }
}

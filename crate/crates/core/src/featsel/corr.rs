use log::debug;
use ndarray::{Array2, ArrayView2, Axis};

use super::{FeatureSubset, SelectMethod};
use crate::dataio::Dataset;
use crate::{exec, Error, Result};

/// Pearson correlation of every column pair. Constant columns correlate 0
/// with everything else; the diagonal is 1.
pub fn correlation_matrix(x: ArrayView2<f64>) -> Result<Array2<f64>> {
    correlation_matrix_with(x, exec::is_parallel())
}

/// As [`correlation_matrix`], choosing the execution path explicitly.
pub fn correlation_matrix_with(x: ArrayView2<f64>, parallel: bool) -> Result<Array2<f64>> {
    let (n, d) = x.dim();
    if n < 2 {
        return Err(Error::pre("correlation needs at least two rows"));
    }
    let means = x.mean_axis(Axis(0)).expect("non-empty");
    // centered, unit-norm columns stored as rows for contiguous dot products
    let mut z = (&x - &means).reversed_axes().as_standard_layout().into_owned();
    let mut constant = vec![false; d];
    for (j, mut row) in z.outer_iter_mut().enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm <= f64::EPSILON * (n as f64).sqrt() * means[j].abs().max(1.0) {
            constant[j] = true;
            row.fill(0.0);
        } else {
            row /= norm;
        }
    }
    let row_of = |i: &usize| -> Vec<f64> {
        (0..d)
            .map(|j| {
                if i == &j {
                    1.0
                } else if j < *i {
                    0.0
                } else {
                    z.row(*i).dot(&z.row(j)).clamp(-1.0, 1.0)
                }
            })
            .collect()
    };
    let idx: Vec<usize> = (0..d).collect();
    let rows = if parallel {
        exec::map_par(&idx, row_of)
    } else {
        exec::map_seq(&idx, row_of)
    };
    let mut rho = Array2::zeros((d, d));
    for (i, r) in rows.into_iter().enumerate() {
        for j in i..d {
            rho[[i, j]] = r[j];
            rho[[j, i]] = r[j];
        }
    }
    let constant: Vec<usize> = (0..d).filter(|&j| constant[j]).collect();
    if !constant.is_empty() {
        debug!("constant columns in correlation matrix: {constant:?}");
    }
    Ok(rho)
}

/// Drops the higher-indexed feature of every pair whose `|ρ|` exceeds `theta`,
/// scanning pairs in ascending order and ignoring already-dropped features.
pub fn correlation_filter(ds: &Dataset, theta: f64) -> Result<FeatureSubset> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::pre(format!("theta must lie in (0, 1], got {theta}")));
    }
    let rho = correlation_matrix(ds.features.view())?;
    let d = ds.n_features();
    let mut dropped = vec![false; d];
    for i in 0..d {
        if dropped[i] {
            continue;
        }
        for j in i + 1..d {
            if !dropped[j] && rho[[i, j]].abs() > theta {
                dropped[j] = true;
            }
        }
    }
    let kept: Vec<usize> = (0..d).filter(|&j| !dropped[j]).collect();
    let max_kept = kept
        .iter()
        .flat_map(|&i| kept.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
        .map(|(i, j)| rho[[i, j]].abs())
        .fold(0.0, f64::max);
    let mut subset = FeatureSubset::new(SelectMethod::Corr, kept, ds, max_kept)?;
    subset.theta = Some(theta);
    Ok(subset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn self_and_negated_correlation() {
        let x = array![[1.0, -1.0, 3.0], [2.0, -2.0, 3.0], [4.0, -4.0, 3.0], [0.5, -0.5, 3.0]];
        let r = correlation_matrix(x.view()).unwrap();
        assert!((r[[0, 0]] - 1.0).abs() < 1e-15);
        assert!((r[[0, 1]] + 1.0).abs() < 1e-12);
        assert_eq!(r[[0, 2]], 0.0);
        assert_eq!(r[[2, 1]], 0.0);
        assert!(correlation_matrix(x.slice(ndarray::s![..1, ..])).is_err());
    }

    #[test]
    fn parallel_matches_sequential() {
        let x = Array2::from_shape_fn((50, 7), |(i, j)| ((i * 31 + j * 17) % 23) as f64 + (i * j) as f64 * 0.1);
        assert_eq!(
            correlation_matrix_with(x.view(), true).unwrap(),
            correlation_matrix_with(x.view(), false).unwrap()
        );
    }
}

use rand::seq::SliceRandom;

use super::dataset::Dataset;
use crate::{seeded_rng, Error, Result};

/// Row indices of a train/test partition, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_indices(
    labels: &[usize],
    n_classes: usize,
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<SplitIndices> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::pre(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = labels.len();
    if n < 2 {
        return Err(Error::pre("need at least two rows to split"));
    }
    let mut rng = seeded_rng(seed, 0x5011);
    let mut train = Vec::new();
    let mut test = Vec::new();
    if stratified {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
        for (i, &l) in labels.iter().enumerate() {
            by_class[l].push(i);
        }
        for (c, mut rows) in by_class.into_iter().enumerate() {
            match rows.len() {
                0 => continue,
                1 => {
                    log::warn!("class {c} has a single row; it goes to the training split");
                    train.extend(rows);
                    continue;
                }
                len => {
                    rows.shuffle(&mut rng);
                    let k = ((test_fraction * len as f64).round() as usize).min(len - 1);
                    test.extend_from_slice(&rows[..k]);
                    train.extend_from_slice(&rows[k..]);
                }
            }
        }
    } else {
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        let k = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
        test.extend_from_slice(&rows[..k]);
        train.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

/// Splits `ds` into disjoint train and test partitions, deterministically per seed.
pub fn split(
    ds: &Dataset,
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Dataset, Dataset)> {
    let idx = split_indices(&ds.labels, ds.n_classes(), test_fraction, seed, stratified)?;
    Ok((ds.select_rows(&idx.train), ds.select_rows(&idx.test)))
}

/// Draws a stratified subsample of about `rows` records.
pub fn stratified_subsample(ds: &Dataset, rows: usize, seed: u64) -> Result<Dataset> {
    if rows >= ds.n_rows() {
        return Ok(ds.clone());
    }
    let idx = split_indices(
        &ds.labels,
        ds.n_classes(),
        rows as f64 / ds.n_rows() as f64,
        seed,
        true,
    )?;
    Ok(ds.select_rows(&idx.test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_split_is_disjoint_exhaustive_and_deterministic() {
        let labels = vec![0; 100];
        let a = split_indices(&labels, 1, 0.2, 7, false).unwrap();
        let b = split_indices(&labels, 1, 0.2, 7, false).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.train.len(), a.test.len()), (80, 20));
        let mut all: Vec<usize> = a.train.iter().chain(&a.test).copied().collect();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        let c = split_indices(&labels, 1, 0.2, 8, false).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn stratified_keeps_class_proportions() {
        let mut labels = vec![0; 90];
        labels.extend(vec![1; 10]);
        let s = split_indices(&labels, 2, 0.2, 3, true).unwrap();
        let test_pos = s.test.iter().filter(|&&i| labels[i] == 1).count();
        assert_eq!(s.test.len() - test_pos, 18);
        assert_eq!(test_pos, 2);
    }

    #[test]
    fn singleton_class_goes_to_train() {
        let labels = vec![0, 0, 0, 0, 1];
        let s = split_indices(&labels, 2, 0.5, 1, true).unwrap();
        assert!(s.train.contains(&4));
    }

    #[test]
    fn fraction_bounds_are_enforced() {
        let labels = vec![0; 10];
        assert!(split_indices(&labels, 1, 0.0, 1, false).is_err());
        assert!(split_indices(&labels, 1, 1.0, 1, false).is_err());
    }
}

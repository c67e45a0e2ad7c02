use ndarray::{Array2, ArrayView2};
use rand::Rng as _;

use hids_core::dataio::Dataset;
use hids_core::featsel::{
    correlation_filter, correlation_matrix_with, lasso_select, wrapper_select, Direction, LassoOptions, LogisticScorer,
    SelectMethod, SubsetScorer, WrapperOptions,
};
use hids_core::{seeded_rng, Error, Result};

/// Column j of every row holds j + 1, so a scorer can see which columns it got.
fn tagged(d: usize, n: usize) -> Dataset {
    let x = Array2::from_shape_fn((n, d), |(_, j)| (j + 1) as f64);
    let labels = (0..n).map(|i| i % 2).collect();
    Dataset::from_parts("t", (0..d).map(|j| format!("f{j}")).collect(), x, labels, vec!["a".into(), "b".into()]).unwrap()
}

struct Additive(Vec<f64>);

impl SubsetScorer for Additive {
    fn score(&self, x: ArrayView2<f64>, _: &[usize], _: ArrayView2<f64>, _: &[usize], _: usize) -> Result<f64> {
        Ok(x.row(0).iter().map(|&t| self.0[t as usize - 1]).sum())
    }
}

struct Failing;

impl SubsetScorer for Failing {
    fn score(&self, _: ArrayView2<f64>, _: &[usize], _: ArrayView2<f64>, _: &[usize], _: usize) -> Result<f64> {
        Err(Error::Numerical("boom".into()))
    }
}

fn opts(direction: Direction, patience: usize) -> WrapperOptions {
    WrapperOptions {
        direction,
        patience,
        sample_rows: 0,
        ..WrapperOptions::default()
    }
}

#[test]
fn forward_adds_best_feature_and_stops_after_patience() {
    let ds = tagged(4, 40);
    let scorer = Additive(vec![3.0, -1.0, 2.0, -2.0]);
    let (subset, trace) = wrapper_select(&ds, &opts(Direction::Forward, 1), &scorer).unwrap();
    assert_eq!(subset.indices, vec![0, 2]);
    assert_eq!(subset.method, SelectMethod::Forward);
    assert_eq!(subset.score, 5.0);
    let picks: Vec<(usize, bool)> = trace.iter().map(|r| (r.feature, r.improved)).collect();
    assert_eq!(picks, vec![(0, true), (2, true), (1, false)]);

    let (subset, trace) = wrapper_select(&ds, &opts(Direction::Forward, 2), &scorer).unwrap();
    assert_eq!(subset.indices, vec![0, 2]);
    assert_eq!(trace.len(), 4);
}

#[test]
fn forward_respects_feature_cap() {
    let ds = tagged(4, 40);
    let scorer = Additive(vec![1.0, 1.0, 1.0, 1.0]);
    let o = WrapperOptions {
        max_features: 2,
        ..opts(Direction::Forward, 5)
    };
    let (subset, trace) = wrapper_select(&ds, &o, &scorer).unwrap();
    assert_eq!(subset.indices, vec![0, 1]);
    assert_eq!(trace.len(), 2);
}

#[test]
fn backward_removes_harmful_features() {
    let ds = tagged(4, 40);
    let scorer = Additive(vec![3.0, -1.0, 2.0, -2.0]);
    let (subset, trace) = wrapper_select(&ds, &opts(Direction::Backward, 1), &scorer).unwrap();
    assert_eq!(subset.indices, vec![0, 2]);
    let removed: Vec<usize> = trace.iter().map(|r| r.feature).collect();
    assert_eq!(removed, vec![3, 1, 2]);
}

#[test]
fn scorer_failure_is_numerical() {
    let ds = tagged(3, 20);
    let err = wrapper_select(&ds, &opts(Direction::Forward, 1), &Failing).unwrap_err();
    assert!(matches!(err, Error::Numerical(_)), "{err}");
}

fn informative(n: usize, noise_cols: usize, seed: u64) -> Dataset {
    let mut rng = seeded_rng(seed, 0);
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let x = Array2::from_shape_fn((n, noise_cols + 1), |(i, j)| {
        let u: f64 = rng.random();
        if j == 0 {
            labels[i] as f64 * 0.6 + 0.4 * u
        } else {
            u
        }
    });
    let names = (0..=noise_cols).map(|j| format!("f{j}")).collect();
    Dataset::from_parts("t", names, x, labels, vec!["a".into(), "b".into()]).unwrap()
}

#[test]
fn logistic_wrapper_finds_the_informative_column() {
    let ds = informative(400, 4, 1);
    let (subset, trace) = wrapper_select(&ds, &opts(Direction::Forward, 1), &LogisticScorer::default()).unwrap();
    assert_eq!(trace[0].feature, 0);
    assert!(subset.indices.contains(&0));
}

#[test]
fn lasso_keeps_the_informative_column() {
    let ds = informative(400, 4, 2);
    let subset = lasso_select(&ds, &LassoOptions { lambda: 0.05, ..LassoOptions::default() }).unwrap();
    assert_eq!(subset.indices, vec![0]);
}

#[test]
fn correlation_filter_drops_later_duplicate() {
    let mut rng = seeded_rng(3, 0);
    let base: Vec<f64> = (0..100).map(|_| rng.random()).collect();
    let other: Vec<f64> = (0..100).map(|_| rng.random()).collect();
    let x = Array2::from_shape_fn((100, 3), |(i, j)| match j {
        0 => base[i],
        1 => other[i],
        _ => -2.0 * base[i] + 1.0,
    });
    let ds = Dataset::from_parts("t", vec!["a".into(), "b".into(), "c".into()], x.clone(), vec![0; 100], vec!["n".into()])
        .unwrap();
    let subset = correlation_filter(&ds, 0.95).unwrap();
    assert_eq!(subset.indices, vec![0, 1]);
    assert_eq!(subset.theta, Some(0.95));
    let keep_all = correlation_filter(&ds, 1.0).unwrap();
    assert_eq!(keep_all.indices, vec![0, 1, 2]);
    assert_eq!(correlation_matrix_with(x.view(), true).unwrap(), correlation_matrix_with(x.view(), false).unwrap());
}

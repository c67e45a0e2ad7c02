use log::{debug, info};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{FeatureSubset, SelectMethod};
use crate::dataio::{split_indices, stratified_subsample, Dataset};
use crate::nn::softmax_rows;
use crate::{exec, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// Scores a candidate feature subset; higher is better.
pub trait SubsetScorer: Sync {
    fn score(
        &self,
        train_x: ArrayView2<f64>,
        train_y: &[usize],
        val_x: ArrayView2<f64>,
        val_y: &[usize],
        n_classes: usize,
    ) -> Result<f64>;
}

/// Softmax regression fitted by full-batch gradient descent; the score is the
/// negative validation log-loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogisticScorer {
    pub epochs: usize,
    pub lr: f64,
}

impl Default for LogisticScorer {
    fn default() -> Self {
        LogisticScorer { epochs: 100, lr: 1.0 }
    }
}

impl SubsetScorer for LogisticScorer {
    fn score(
        &self,
        train_x: ArrayView2<f64>,
        train_y: &[usize],
        val_x: ArrayView2<f64>,
        val_y: &[usize],
        n_classes: usize,
    ) -> Result<f64> {
        let (n, d) = train_x.dim();
        let mut w = Array2::<f64>::zeros((d, n_classes));
        let mut b = Array1::<f64>::zeros(n_classes);
        for _ in 0..self.epochs {
            let mut p = train_x.dot(&w) + &b;
            softmax_rows(&mut p);
            for (i, &y) in train_y.iter().enumerate() {
                p[[i, y]] -= 1.0;
            }
            p /= n as f64;
            w.scaled_add(-self.lr, &train_x.t().dot(&p));
            b.scaled_add(-self.lr, &p.sum_axis(Axis(0)));
        }
        let mut p = val_x.dot(&w) + &b;
        softmax_rows(&mut p);
        let loss = val_y
            .iter()
            .enumerate()
            .map(|(i, &y)| -p[[i, y]].max(1e-300).ln())
            .sum::<f64>()
            / val_y.len() as f64;
        if !loss.is_finite() {
            return Err(Error::Numerical("logistic scorer produced a non-finite loss".into()));
        }
        Ok(-loss)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WrapperOptions {
    pub direction: Direction,
    /// Cap on the forward subset size.
    pub max_features: usize,
    pub max_rounds: usize,
    /// Rounds without improvement tolerated before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    /// Rows drawn (stratified) before splitting; 0 uses every row.
    pub sample_rows: usize,
    pub seed: u64,
}

impl Default for WrapperOptions {
    fn default() -> Self {
        WrapperOptions {
            direction: Direction::Forward,
            max_features: 20,
            max_rounds: 200,
            patience: 1,
            validation_fraction: 0.3,
            sample_rows: 4000,
            seed: 0,
        }
    }
}

/// One search round: the feature added or removed and the resulting score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrapperRound {
    pub round: usize,
    pub feature: usize,
    pub score: f64,
    pub improved: bool,
}

/// Greedy forward selection or backward elimination. Each round applies the
/// best single change (ties to the lower feature index); the best subset seen
/// is returned once `patience` rounds pass without improvement. Forward
/// improvement is a strict increase, backward accepts equal scores.
pub fn wrapper_select(
    ds: &Dataset,
    opts: &WrapperOptions,
    scorer: &dyn SubsetScorer,
) -> Result<(FeatureSubset, Vec<WrapperRound>)> {
    let d = ds.n_features();
    if d == 0 {
        return Err(Error::pre("wrapper selection needs at least one feature"));
    }
    let sample = if opts.sample_rows > 0 {
        stratified_subsample(ds, opts.sample_rows, opts.seed)?
    } else {
        ds.clone()
    };
    let split = split_indices(&sample.labels, sample.n_classes(), opts.validation_fraction, opts.seed, true)?;
    let tr = sample.select_rows(&split.train);
    let va = sample.select_rows(&split.test);
    let k = sample.n_classes();
    let eval = |cols: &[usize]| -> Result<f64> {
        let tx = tr.features.select(Axis(1), cols);
        let vx = va.features.select(Axis(1), cols);
        scorer.score(tx.view(), &tr.labels, vx.view(), &va.labels, k)
    };
    let patience = opts.patience.max(1);
    let mut trace = Vec::new();
    let abort = |e: Error, trace: &[WrapperRound]| {
        Error::Numerical(format!("wrapper scorer failed after {} rounds ({trace:?}): {e}", trace.len()))
    };

    let (mut current, mut best_score): (Vec<usize>, f64) = match opts.direction {
        Direction::Forward => (Vec::new(), f64::NEG_INFINITY),
        Direction::Backward => {
            let all: Vec<usize> = (0..d).collect();
            let s = eval(&all).map_err(|e| abort(e, &trace))?;
            (all, s)
        }
    };
    let mut best = current.clone();
    let mut stale = 0;
    for round in 0..opts.max_rounds {
        let candidates: Vec<usize> = match opts.direction {
            Direction::Forward if current.len() < opts.max_features => (0..d).filter(|j| !current.contains(j)).collect(),
            Direction::Backward if current.len() > 1 => current.clone(),
            _ => Vec::new(),
        };
        if candidates.is_empty() {
            break;
        }
        let scores = exec::map(&candidates, |&j| {
            let mut cols = current.clone();
            match opts.direction {
                Direction::Forward => cols.push(j),
                Direction::Backward => cols.retain(|&c| c != j),
            }
            cols.sort_unstable();
            eval(&cols)
        });
        let mut pick: Option<(usize, f64)> = None;
        for (&j, s) in candidates.iter().zip(scores) {
            let s = s.map_err(|e| abort(e, &trace))?;
            if pick.is_none_or(|(_, bs)| s > bs) {
                pick = Some((j, s));
            }
        }
        let (feature, score) = pick.expect("non-empty candidates");
        match opts.direction {
            Direction::Forward => current.push(feature),
            Direction::Backward => current.retain(|&c| c != feature),
        }
        current.sort_unstable();
        let improved = match opts.direction {
            Direction::Forward => score > best_score,
            Direction::Backward => score >= best_score,
        };
        debug!("wrapper round {round}: feature {feature} score {score:.6} improved {improved}");
        trace.push(WrapperRound {
            round,
            feature,
            score,
            improved,
        });
        if improved {
            best_score = score;
            best = current.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= patience {
                break;
            }
        }
    }
    info!("wrapper selection kept {} of {d} features", best.len());
    let method = match opts.direction {
        Direction::Forward => SelectMethod::Forward,
        Direction::Backward => SelectMethod::Backward,
    };
    Ok((FeatureSubset::new(method, best, ds, best_score)?, trace))
}

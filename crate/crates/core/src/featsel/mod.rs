//! Feature selection: correlation filter, forward/backward wrapper search and LASSO.

mod corr;
mod lasso;
mod wrapper;

pub use corr::{correlation_filter, correlation_matrix, correlation_matrix_with};
pub use lasso::{lasso_fit, lasso_lambda_max, lasso_select, LassoModel, LassoOptions};
pub use wrapper::{
    wrapper_select, Direction, LogisticScorer, SubsetScorer, WrapperOptions, WrapperRound,
};

use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectMethod {
    None,
    Corr,
    Forward,
    Backward,
    Lasso,
}

impl SelectMethod {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(SelectMethod::None),
            "corr" => Some(SelectMethod::Corr),
            "forward" => Some(SelectMethod::Forward),
            "backward" => Some(SelectMethod::Backward),
            "lasso" => Some(SelectMethod::Lasso),
            _ => None,
        }
    }
}

/// Kept feature columns, sorted, with the method that chose them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSubset {
    pub method: SelectMethod,
    pub indices: Vec<usize>,
    pub names: Vec<String>,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl FeatureSubset {
    pub fn new(method: SelectMethod, mut indices: Vec<usize>, ds: &Dataset, score: f64) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::pre(format!("{method:?} selection kept no features")));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= ds.n_features()) {
            return Err(Error::pre(format!("feature index {bad} out of range")));
        }
        let names = indices.iter().map(|&i| ds.columns[i].name.clone()).collect();
        Ok(FeatureSubset {
            method,
            indices,
            names,
            score,
            theta: None,
            lambda: None,
        })
    }

    /// Every column of `ds`.
    pub fn all(ds: &Dataset) -> Result<Self> {
        Self::new(SelectMethod::None, (0..ds.n_features()).collect(), ds, 0.0)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Restricts `ds` to the kept columns, checking names still line up.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        for (&i, name) in self.indices.iter().zip(&self.names) {
            match ds.columns.get(i) {
                Some(c) if &c.name == name => {}
                Some(c) => {
                    return Err(Error::Schema(format!(
                        "feature {i} is '{}' but the subset expects '{name}'",
                        c.name
                    )))
                }
                None => return Err(Error::dims("feature subset", self.indices.len(), ds.n_features())),
            }
        }
        ds.select_features(&self.indices)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

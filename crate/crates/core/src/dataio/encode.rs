use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, FeatureColumn, FeatureKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingMode {
    /// Integer codes assigned lexicographically from 0.
    Label,
    /// One binary column per level, named `column=level`.
    #[serde(alias = "one-hot")]
    Onehot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ColumnPlan {
    Numeric { name: String },
    Categorical { name: String, levels: Vec<String> },
}

/// Categorical encoding fitted on a training set and replayable on test data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalEncoder {
    pub mode: EncodingMode,
    plan: Vec<ColumnPlan>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EncodeReport {
    /// Cells whose level was not seen when the encoder was fitted.
    pub unseen: usize,
}

/// Encodes every categorical column of `ds` and returns the fitted encoder.
pub fn encode_categoricals(ds: &Dataset, mode: EncodingMode) -> Result<(Dataset, CategoricalEncoder)> {
    let enc = CategoricalEncoder::fit(ds, mode);
    let (out, _) = enc.transform(ds)?;
    Ok((out, enc))
}

impl CategoricalEncoder {
    pub fn fit(ds: &Dataset, mode: EncodingMode) -> Self {
        let plan = ds
            .columns
            .iter()
            .map(|c| match &c.kind {
                FeatureKind::Numeric => ColumnPlan::Numeric {
                    name: c.name.clone(),
                },
                FeatureKind::Categorical { levels } => ColumnPlan::Categorical {
                    name: c.name.clone(),
                    levels: levels.clone(),
                },
            })
            .collect();
        CategoricalEncoder { mode, plan }
    }

    pub fn input_dim(&self) -> usize {
        self.plan.len()
    }

    pub fn output_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for p in &self.plan {
            match p {
                ColumnPlan::Numeric { name } => names.push(name.clone()),
                ColumnPlan::Categorical { name, levels } => match self.mode {
                    EncodingMode::Label => names.push(name.clone()),
                    EncodingMode::Onehot => {
                        names.extend(levels.iter().map(|l| format!("{name}={l}")))
                    }
                },
            }
        }
        names
    }

    /// Applies the fitted encoding. Levels unseen at fit time become an
    /// all-zero block (onehot) or the reserved code `levels.len()` (label).
    pub fn transform(&self, ds: &Dataset) -> Result<(Dataset, EncodeReport)> {
        if ds.columns.len() != self.plan.len() {
            return Err(Error::dims("categorical encoder input", self.plan.len(), ds.columns.len()));
        }
        // Map each input column's local codes onto the fitted level order.
        let mut lookups: Vec<Option<Vec<Option<usize>>>> = Vec::with_capacity(self.plan.len());
        for (p, c) in self.plan.iter().zip(&ds.columns) {
            match (p, &c.kind) {
                (ColumnPlan::Numeric { name }, FeatureKind::Numeric) if *name == c.name => {
                    lookups.push(None)
                }
                (ColumnPlan::Categorical { name, levels }, FeatureKind::Categorical { levels: local })
                    if *name == c.name =>
                {
                    lookups.push(Some(
                        local.iter().map(|l| levels.binary_search(l).ok()).collect(),
                    ))
                }
                _ => {
                    return Err(Error::Schema(format!(
                        "column `{}` does not match the fitted encoding",
                        c.name
                    )))
                }
            }
        }

        let names = self.output_names();
        let n = ds.n_rows();
        let mut out = Array2::<f64>::zeros((n, names.len()));
        let mut report = EncodeReport::default();
        for r in 0..n {
            let mut o = 0;
            for (ci, p) in self.plan.iter().enumerate() {
                let v = ds.features[[r, ci]];
                match (p, &lookups[ci]) {
                    (ColumnPlan::Numeric { .. }, _) => {
                        out[[r, o]] = v;
                        o += 1;
                    }
                    (ColumnPlan::Categorical { levels, .. }, Some(lookup)) => {
                        let code = lookup.get(v as usize).copied().flatten();
                        if code.is_none() {
                            report.unseen += 1;
                        }
                        match self.mode {
                            EncodingMode::Label => {
                                out[[r, o]] = code.unwrap_or(levels.len()) as f64;
                                o += 1;
                            }
                            EncodingMode::Onehot => {
                                if let Some(k) = code {
                                    out[[r, o + k]] = 1.0;
                                }
                                o += levels.len();
                            }
                        }
                    }
                    (ColumnPlan::Categorical { .. }, None) => unreachable!(),
                }
            }
        }
        if report.unseen > 0 {
            log::warn!("{} categorical cells had levels unseen at fit time", report.unseen);
        }
        let encoded = Dataset {
            schema_id: ds.schema_id.clone(),
            columns: names.into_iter().map(FeatureColumn::numeric).collect(),
            features: out,
            labels: ds.labels.clone(),
            label_names: ds.label_names.clone(),
            norm_params: None,
        };
        Ok((encoded, report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::parse::{parse_reader, ParseOptions};
    use crate::dataio::schema::Schema;

    fn ds(text: &str) -> Dataset {
        let schema = Schema::from_csv_str(
            "mini",
            "index,name,kind\n0,proto,categorical\n1,bytes,numeric\n2,class,label\n",
        )
        .unwrap();
        parse_reader(text.as_bytes(), "mem", &schema, &ParseOptions::default())
            .unwrap()
            .0
    }

    #[test]
    fn onehot_follows_lexicographic_order() {
        let train = ds("udp,1,a\ntcp,2,a\nicmp,3,b\n");
        let (enc, e) = encode_categoricals(&train, EncodingMode::Onehot).unwrap();
        assert_eq!(
            enc.column_names(),
            vec!["proto=icmp", "proto=tcp", "proto=udp", "bytes"]
        );
        // "tcp" -> (0, 1, 0)
        assert_eq!(enc.features.row(1).to_vec(), vec![0.0, 1.0, 0.0, 2.0]);
        assert_eq!(e.output_names().len(), 4);
    }

    #[test]
    fn single_level_onehot_is_constant_one() {
        let (enc, _) = encode_categoricals(&ds("tcp,1,a\ntcp,2,b\n"), EncodingMode::Onehot).unwrap();
        assert_eq!(enc.features.column(0).to_vec(), vec![1.0, 1.0]);
    }

    #[test]
    fn label_mode_codes_from_zero() {
        let (enc, _) = encode_categoricals(&ds("udp,1,a\ntcp,2,a\n"), EncodingMode::Label).unwrap();
        assert_eq!(enc.features.column(0).to_vec(), vec![1.0, 0.0]);
    }

    #[test]
    fn unseen_levels_follow_policy() {
        let train = ds("udp,1,a\ntcp,2,a\n");
        let test = ds("sctp,5,a\ntcp,1,a\n");
        let onehot = CategoricalEncoder::fit(&train, EncodingMode::Onehot);
        let (out, rep) = onehot.transform(&test).unwrap();
        assert_eq!(rep.unseen, 1);
        assert_eq!(out.features.row(0).to_vec(), vec![0.0, 0.0, 5.0]);
        assert_eq!(out.features.row(1).to_vec(), vec![1.0, 0.0, 1.0]);

        let label = CategoricalEncoder::fit(&train, EncodingMode::Label);
        let (out, _) = label.transform(&test).unwrap();
        assert_eq!(out.features[[0, 0]], 2.0);
        assert_eq!(out.features[[1, 0]], 0.0);
    }
}

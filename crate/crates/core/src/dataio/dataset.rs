use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::norm::NormParams;
use super::schema::{ColumnKind, Schema};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureKind {
    Numeric,
    /// Values are stored as codes into `levels`, which are sorted lexicographically.
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: FeatureKind,
}

impl FeatureColumn {
    pub fn numeric(name: impl Into<String>) -> Self {
        FeatureColumn {
            name: name.into(),
            kind: FeatureKind::Numeric,
        }
    }
}

/// A labelled feature table. Rows are records, columns are features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema_id: String,
    pub columns: Vec<FeatureColumn>,
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub label_names: Vec<String>,
    pub norm_params: Option<NormParams>,
}

impl Dataset {
    /// Builds an all-numeric dataset and checks its invariants.
    pub fn from_parts(
        schema_id: impl Into<String>,
        column_names: Vec<String>,
        features: Array2<f64>,
        labels: Vec<usize>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        let ds = Dataset {
            schema_id: schema_id.into(),
            columns: column_names.into_iter().map(FeatureColumn::numeric).collect(),
            features,
            labels,
            label_names,
            norm_params: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.nrows() != self.labels.len() {
            return Err(Error::dims("dataset rows", self.features.nrows(), self.labels.len()));
        }
        if self.features.ncols() != self.columns.len() {
            return Err(Error::dims("dataset columns", self.columns.len(), self.features.ncols()));
        }
        if let Some(bad) = self.labels.iter().find(|&&l| l >= self.label_names.len()) {
            return Err(Error::Schema(format!("label id {bad} has no name")));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("dataset contains NaN or Inf".into()));
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn has_categoricals(&self) -> bool {
        self.columns
            .iter()
            .any(|c| matches!(c.kind, FeatureKind::Categorical { .. }))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn label_id(&self, name: &str) -> Option<usize> {
        self.label_names.iter().position(|n| n == name)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema_id: self.schema_id.clone(),
            columns: self.columns.clone(),
            features: self.features.select(Axis(0), rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            label_names: self.label_names.clone(),
            norm_params: self.norm_params.clone(),
        }
    }

    pub fn select_features(&self, cols: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.n_features()) {
            return Err(Error::pre(format!(
                "feature index {bad} out of bounds for {} columns",
                self.n_features()
            )));
        }
        Ok(Dataset {
            schema_id: self.schema_id.clone(),
            columns: cols.iter().map(|&c| self.columns[c].clone()).collect(),
            features: self.features.select(Axis(1), cols),
            labels: self.labels.clone(),
            label_names: self.label_names.clone(),
            norm_params: None,
        })
    }

    /// Replaces the feature matrix, naming the new columns `{prefix}{i}`.
    pub fn with_features(&self, features: Array2<f64>, prefix: &str) -> Result<Dataset> {
        if features.nrows() != self.n_rows() {
            return Err(Error::dims("replacement features", self.n_rows(), features.nrows()));
        }
        let columns = (0..features.ncols())
            .map(|i| FeatureColumn::numeric(format!("{prefix}{i}")))
            .collect();
        Ok(Dataset {
            schema_id: self.schema_id.clone(),
            columns,
            features,
            labels: self.labels.clone(),
            label_names: self.label_names.clone(),
            norm_params: None,
        })
    }

    /// Keeps only rows whose label name is in `names`; label ids are re-coded
    /// in lexicographic order of the retained names.
    pub fn filter_labels(&self, names: &[&str]) -> Result<Dataset> {
        let rows: Vec<usize> = (0..self.n_rows())
            .filter(|&r| names.contains(&self.label_names[self.labels[r]].as_str()))
            .collect();
        if rows.is_empty() {
            return Err(Error::EmptyInput(format!("label filter {names:?}")));
        }
        let mut kept: Vec<String> = rows
            .iter()
            .map(|&r| self.label_names[self.labels[r]].clone())
            .collect();
        kept.sort();
        kept.dedup();
        let mut out = self.select_rows(&rows);
        out.labels = rows
            .iter()
            .map(|&r| {
                let name = &self.label_names[self.labels[r]];
                kept.iter().position(|k| k == name).unwrap()
            })
            .collect();
        out.label_names = kept;
        Ok(out)
    }

    /// Re-codes labels against a reference vocabulary. Names missing from
    /// `reference` are appended after it, so known ids stay stable.
    pub fn align_labels(&self, reference: &[String]) -> Dataset {
        let mut names: Vec<String> = reference.to_vec();
        let mut remap = Vec::with_capacity(self.label_names.len());
        for name in &self.label_names {
            match names.iter().position(|n| n == name) {
                Some(i) => remap.push(i),
                None => {
                    names.push(name.clone());
                    remap.push(names.len() - 1);
                }
            }
        }
        let mut out = self.clone();
        out.labels = self.labels.iter().map(|&l| remap[l]).collect();
        out.label_names = names;
        out
    }

    /// Writes a header row and one line per record, label last. Categorical
    /// cells are written as their level text.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_csv_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let mut header: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        header.push("label");
        writeln!(w, "{}", header.join(","))?;
        let mut line = String::new();
        for (r, row) in self.features.outer_iter().enumerate() {
            line.clear();
            for (c, v) in row.iter().enumerate() {
                push_cell(&mut line, &self.columns[c], *v);
                line.push(',');
            }
            line.push_str(&self.label_names[self.labels[r]]);
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Writes rows back in the file layout of `schema` so they can be
    /// re-ingested with it. Ignored columns are written as `0`.
    pub fn write_schema_csv(&self, schema: &Schema, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let feature_cols: Vec<_> = schema.feature_columns().collect();
        if feature_cols.len() != self.columns.len()
            || feature_cols
                .iter()
                .zip(&self.columns)
                .any(|(s, c)| s.name != c.name)
        {
            return Err(Error::Schema(format!(
                "dataset columns do not match schema `{}`",
                schema.id
            )));
        }
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        let header: Vec<&str> = schema.columns().iter().map(|c| c.name.as_str()).collect();
        writeln!(w, "{}", header.join(",")).map_err(io)?;
        let mut line = String::new();
        for (r, row) in self.features.outer_iter().enumerate() {
            line.clear();
            let mut fi = 0;
            for (i, col) in schema.columns().iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                match col.kind {
                    ColumnKind::Label => line.push_str(&self.label_names[self.labels[r]]),
                    ColumnKind::Ignore => line.push('0'),
                    _ => {
                        push_cell(&mut line, &self.columns[fi], row[fi]);
                        fi += 1;
                    }
                }
            }
            writeln!(w, "{line}").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn label_histogram(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for (name, count) in self.label_names.iter().zip(self.class_counts()) {
            out.insert(name.clone(), count);
        }
        out
    }
}

fn push_cell(line: &mut String, col: &FeatureColumn, v: f64) {
    use std::fmt::Write as _;
    match &col.kind {
        FeatureKind::Categorical { levels } => {
            let code = v as usize;
            match levels.get(code) {
                Some(level) => line.push_str(level),
                None => line.push('?'),
            }
        }
        FeatureKind::Numeric => {
            let _ = write!(line, "{v}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny() -> Dataset {
        Dataset::from_parts(
            "t",
            vec!["a".into(), "b".into()],
            array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]],
            vec![0, 1, 2],
            vec!["dos".into(), "normal".into(), "probe".into()],
        )
        .unwrap()
    }

    #[test]
    fn rejects_row_label_mismatch_and_nan() {
        let err = Dataset::from_parts("t", vec!["a".into()], array![[1.0]], vec![], vec![]);
        assert!(err.is_err());
        let err = Dataset::from_parts(
            "t",
            vec!["a".into()],
            array![[f64::NAN]],
            vec![0],
            vec!["x".into()],
        );
        assert!(err.is_err());
    }

    #[test]
    fn filter_and_align_labels() {
        let ds = tiny();
        let f = ds.filter_labels(&["probe", "dos"]).unwrap();
        assert_eq!(f.n_rows(), 2);
        assert_eq!(f.label_names, vec!["dos", "probe"]);
        assert_eq!(f.labels, vec![0, 1]);

        let a = f.align_labels(&["normal".to_string(), "probe".to_string()]);
        assert_eq!(a.label_names, vec!["normal", "probe", "dos"]);
        assert_eq!(a.labels, vec![2, 1]);
    }

    #[test]
    fn csv_output_has_header_and_rows() {
        let mut buf = Vec::new();
        tiny().write_csv_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "a,b,label");
        assert_eq!(text.lines().nth(2).unwrap(), "3,4,normal");
    }
}

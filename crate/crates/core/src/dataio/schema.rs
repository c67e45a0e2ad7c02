use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Label,
    /// Present in the file but dropped at ingestion (row ids, secondary labels).
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub index: usize,
    pub name: String,
    pub kind: ColumnKind,
}

/// Ordered column layout of a flow table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub id: String,
    columns: Vec<ColumnSchema>,
}

const BUILTIN: &[(&str, &str)] = &[
    ("nsl-kdd", include_str!("../../data/schemas/nsl_kdd.csv")),
    ("nsl-kdd-plus", include_str!("../../data/schemas/nsl_kdd_plus.csv")),
    ("unsw-nb15", include_str!("../../data/schemas/unsw_nb15.csv")),
    ("ciciot2023", include_str!("../../data/schemas/ciciot2023.csv")),
];

impl Schema {
    pub fn new(id: impl Into<String>, columns: Vec<ColumnSchema>) -> Result<Self> {
        let schema = Schema {
            id: id.into(),
            columns,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn builtin_ids() -> impl Iterator<Item = &'static str> {
        BUILTIN.iter().map(|(id, _)| *id)
    }

    pub fn builtin(id: &str) -> Result<Self> {
        let (_, text) = BUILTIN
            .iter()
            .find(|(name, _)| *name == id)
            .ok_or_else(|| Error::Schema(format!("unknown builtin schema `{id}`")))?;
        Self::from_csv_str(id, text)
    }

    /// Resolves a builtin id, falling back to a schema file path.
    pub fn resolve(id_or_path: &str) -> Result<Self> {
        if BUILTIN.iter().any(|(name, _)| *name == id_or_path) {
            return Self::builtin(id_or_path);
        }
        Self::from_file(id_or_path)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".into());
        Self::from_csv_str(&id, &text)
    }

    /// Parses the `index,name,kind` schema definition format.
    pub fn from_csv_str(id: &str, text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut columns = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(Error::Schema(format!(
                    "schema `{id}`: expected 3 fields, found {}",
                    rec.len()
                )));
            }
            let index: usize = rec[0]
                .parse()
                .map_err(|_| Error::Schema(format!("schema `{id}`: bad index `{}`", &rec[0])))?;
            let kind = match &rec[2] {
                "numeric" => ColumnKind::Numeric,
                "categorical" => ColumnKind::Categorical,
                "label" => ColumnKind::Label,
                "ignore" => ColumnKind::Ignore,
                other => {
                    return Err(Error::Schema(format!(
                        "schema `{id}`: unknown column kind `{other}`"
                    )))
                }
            };
            columns.push(ColumnSchema {
                index,
                name: rec[1].to_string(),
                kind,
            });
        }
        Self::new(id, columns)
    }

    fn validate(&self) -> Result<()> {
        let labels = self
            .columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Label)
            .count();
        if labels != 1 {
            return Err(Error::Schema(format!(
                "schema `{}` must have exactly one label column, found {labels}",
                self.id
            )));
        }
        for (i, c) in self.columns.iter().enumerate() {
            if c.index != i {
                return Err(Error::Schema(format!(
                    "schema `{}`: indices must be contiguous from 0 (column `{}` has {})",
                    self.id, c.name, c.index
                )));
            }
        }
        Ok(())
    }

    pub fn columns(&self) -> &[ColumnSchema] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn label_index(&self) -> usize {
        self.columns
            .iter()
            .position(|c| c.kind == ColumnKind::Label)
            .expect("validated schema has a label column")
    }

    /// Numeric and categorical columns in file order.
    pub fn feature_columns(&self) -> impl Iterator<Item = &ColumnSchema> {
        self.columns
            .iter()
            .filter(|c| matches!(c.kind, ColumnKind::Numeric | ColumnKind::Categorical))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_schemas_are_valid() {
        let nsl = Schema::builtin("nsl-kdd").unwrap();
        assert_eq!(nsl.len(), 42);
        assert_eq!(nsl.feature_columns().count(), 41);
        assert_eq!(nsl.columns()[nsl.label_index()].name, "class");

        let unsw = Schema::builtin("unsw-nb15").unwrap();
        assert_eq!(unsw.len(), 44);
        assert_eq!(unsw.columns()[unsw.label_index()].name, "attack_cat");
        assert_eq!(
            unsw.columns()
                .iter()
                .filter(|c| c.kind == ColumnKind::Categorical)
                .count(),
            3
        );

        let cic = Schema::builtin("ciciot2023").unwrap();
        assert_eq!(cic.feature_columns().count(), 47);
        assert_eq!(Schema::builtin("nsl-kdd-plus").unwrap().len(), 43);
    }

    #[test]
    fn rejects_two_labels_and_gaps() {
        let two = "index,name,kind\n0,a,label\n1,b,label\n";
        assert!(Schema::from_csv_str("x", two).is_err());
        let gap = "index,name,kind\n0,a,numeric\n2,b,label\n";
        assert!(Schema::from_csv_str("x", gap).is_err());
        let none = "index,name,kind\n0,a,numeric\n";
        assert!(Schema::from_csv_str("x", none).is_err());
    }
}

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::{Error, Result};

/// Category assigned to raw labels the taxonomy does not cover in lenient mode.
pub const UNKNOWN_CATEGORY: &str = "Unknown";

const BUILTIN: &[(&str, &str)] = &[
    ("nsl-kdd", include_str!("../../data/taxonomies/nsl_kdd.csv")),
    ("unsw-nb15", include_str!("../../data/taxonomies/unsw_nb15.csv")),
    ("ciciot2023", include_str!("../../data/taxonomies/ciciot2023.csv")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    #[default]
    Strict,
    Lenient,
}

/// Raw attack label to attack category mapping.
///
/// Lookup tries the exact raw text, then a category name (so already-mapped
/// data maps to itself), then a case- and punctuation-insensitive match.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackTaxonomy {
    map: BTreeMap<String, String>,
    categories: BTreeSet<String>,
}

fn fold(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

impl AttackTaxonomy {
    pub fn new(pairs: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (raw, cat) in pairs {
            if let Some(prev) = map.insert(raw.clone(), cat.clone()) {
                if prev != cat {
                    return Err(Error::Schema(format!(
                        "raw label `{raw}` maps to both `{prev}` and `{cat}`"
                    )));
                }
            }
        }
        let categories = map.values().cloned().collect();
        Ok(AttackTaxonomy { map, categories })
    }

    pub fn identity<S: AsRef<str>>(labels: &[S]) -> Self {
        let pairs = labels
            .iter()
            .map(|l| (l.as_ref().to_string(), l.as_ref().to_string()));
        Self::new(pairs).expect("identity pairs are consistent")
    }

    pub fn builtin(id: &str) -> Result<Self> {
        let (_, text) = BUILTIN
            .iter()
            .find(|(name, _)| *name == id)
            .ok_or_else(|| Error::Schema(format!("unknown builtin taxonomy `{id}`")))?;
        Self::from_csv_str(text)
    }

    pub fn resolve(id_or_path: &str) -> Result<Self> {
        if BUILTIN.iter().any(|(name, _)| *name == id_or_path) {
            return Self::builtin(id_or_path);
        }
        let text = std::fs::read_to_string(id_or_path).map_err(|e| Error::io(id_or_path, e))?;
        Self::from_csv_str(&text)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    /// Parses the two-column `raw_label,category` format (header optional).
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut pairs = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::Row {
                    line: i + 1,
                    message: format!("taxonomy rows need 2 fields, found {}", rec.len()),
                });
            }
            if i == 0 && &rec[0] == "raw_label" {
                continue;
            }
            pairs.push((rec[0].to_string(), rec[1].to_string()));
        }
        Self::new(pairs)
    }

    pub fn categories(&self) -> &BTreeSet<String> {
        &self.categories
    }

    pub fn category_of(&self, raw: &str) -> Option<&str> {
        if let Some(c) = self.map.get(raw) {
            return Some(c);
        }
        if let Some(c) = self.categories.get(raw) {
            return Some(c);
        }
        let key = fold(raw);
        self.map
            .iter()
            .find(|(k, _)| fold(k) == key)
            .map(|(_, c)| c.as_str())
            .or_else(|| {
                self.categories
                    .iter()
                    .find(|c| fold(c) == key)
                    .map(String::as_str)
            })
    }
}

/// Re-codes raw labels to taxonomy categories (ids in lexicographic order).
pub fn map_labels(ds: &Dataset, tax: &AttackTaxonomy, mode: LabelMode) -> Result<Dataset> {
    let mut uncovered = Vec::new();
    let mapped: Vec<String> = ds
        .label_names
        .iter()
        .map(|raw| match tax.category_of(raw) {
            Some(c) => c.to_string(),
            None => {
                uncovered.push(raw.clone());
                UNKNOWN_CATEGORY.to_string()
            }
        })
        .collect();
    if !uncovered.is_empty() {
        match mode {
            LabelMode::Strict => return Err(Error::UnknownLabels(uncovered)),
            LabelMode::Lenient => {
                log::warn!("labels mapped to `{UNKNOWN_CATEGORY}`: {}", uncovered.join(", "))
            }
        }
    }
    let mut names = mapped.clone();
    names.sort();
    names.dedup();
    let remap: Vec<usize> = mapped
        .iter()
        .map(|m| names.binary_search(m).unwrap())
        .collect();
    let mut out = ds.clone();
    out.labels = ds.labels.iter().map(|&l| remap[l]).collect();
    out.label_names = names;
    Ok(out)
}

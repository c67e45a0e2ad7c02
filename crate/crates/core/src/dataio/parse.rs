use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use ndarray::Array2;

use super::dataset::{Dataset, FeatureColumn, FeatureKind};
use super::schema::{ColumnKind, Schema};
use crate::{exec, Error, Result};

/// Label text given to records of a file that carries no label column.
pub const UNLABELED: &str = "<unlabeled>";

const CHUNK_ROWS: usize = 65_536;

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// When set, any label outside this set aborts ingestion.
    pub strict_labels: Option<BTreeSet<String>>,
    /// Accept records that omit the label column entirely (scoring input).
    pub allow_unlabeled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowIssue {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParseReport {
    pub rows: usize,
    pub header: bool,
    pub malformed: Vec<RowIssue>,
}

/// Parses a comma-separated flow table with default options. Malformed rows
/// are skipped and logged.
pub fn parse_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let (ds, report) = parse_dataset_with(path, schema, &ParseOptions::default())?;
    for issue in report.malformed.iter().take(10) {
        log::warn!("skipped line {}: {}", issue.line, issue.message);
    }
    if report.malformed.len() > 10 {
        log::warn!("{} malformed rows skipped in total", report.malformed.len());
    }
    Ok(ds)
}

pub fn parse_dataset_with(
    path: impl AsRef<Path>,
    schema: &Schema,
    opts: &ParseOptions,
) -> Result<(Dataset, ParseReport)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_reader(
        std::io::BufReader::new(file),
        &path.display().to_string(),
        schema,
        opts,
    )
}

enum Cell {
    Num(f64),
    Cat(String),
}

struct ParsedRow {
    cells: Vec<Cell>,
    label: String,
}

pub fn parse_reader<R: Read>(
    reader: R,
    source: &str,
    schema: &Schema,
    opts: &ParseOptions,
) -> Result<(Dataset, ParseReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);

    let feature_cols: Vec<_> = schema.feature_columns().cloned().collect();
    let label_idx = schema.label_index();
    let mut report = ParseReport::default();

    let mut values: Vec<f64> = Vec::new();
    let mut labels_raw: Vec<String> = Vec::new();
    // per categorical column: interned text -> provisional code
    let mut interners: Vec<BTreeMap<String, usize>> = vec![BTreeMap::new(); feature_cols.len()];
    let mut provisional: Vec<Vec<String>> = vec![Vec::new(); feature_cols.len()];

    let mut first = true;
    let mut saw_any = false;
    let mut chunk: Vec<(usize, csv::StringRecord)> = Vec::with_capacity(CHUNK_ROWS);
    let mut records = rdr.records();
    loop {
        chunk.clear();
        for rec in records.by_ref() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            saw_any = true;
            if first {
                first = false;
                if looks_like_header(&rec, schema) {
                    report.header = true;
                    continue;
                }
            }
            chunk.push((line, rec));
            if chunk.len() == CHUNK_ROWS {
                break;
            }
        }
        if chunk.is_empty() {
            break;
        }
        let parsed = exec::map(&chunk, |(line, rec)| {
            convert_row(rec, schema, label_idx, opts.allow_unlabeled)
                .map_err(|message| RowIssue {
                    line: *line,
                    message,
                })
        });
        for row in parsed {
            match row {
                Err(issue) => report.malformed.push(issue),
                Ok(row) => {
                    for (ci, cell) in row.cells.into_iter().enumerate() {
                        match cell {
                            Cell::Num(v) => values.push(v),
                            Cell::Cat(s) => {
                                let table = &mut interners[ci];
                                let next = table.len();
                                let code = *table.entry(s.clone()).or_insert_with(|| {
                                    provisional[ci].push(s);
                                    next
                                });
                                values.push(code as f64);
                            }
                        }
                    }
                    labels_raw.push(row.label);
                }
            }
        }
    }

    if !saw_any {
        return Err(Error::EmptyInput(source.to_string()));
    }
    report.rows = labels_raw.len();
    if report.rows == 0 {
        return Err(Error::EmptyInput(format!(
            "{source} (no well-formed rows, {} malformed)",
            report.malformed.len()
        )));
    }

    if let Some(allowed) = &opts.strict_labels {
        let unknown: BTreeSet<&String> = labels_raw
            .iter()
            .filter(|l| !allowed.contains(*l) && l.as_str() != UNLABELED)
            .collect();
        if !unknown.is_empty() {
            return Err(Error::UnknownLabels(unknown.into_iter().cloned().collect()));
        }
    }

    let d = feature_cols.len();
    let mut features = Array2::from_shape_vec((report.rows, d), values)
        .map_err(|e| Error::Schema(e.to_string()))?;

    // Re-code categoricals so codes follow lexicographic level order.
    let mut columns = Vec::with_capacity(d);
    for (ci, col) in feature_cols.iter().enumerate() {
        match col.kind {
            ColumnKind::Categorical => {
                let mut levels = provisional[ci].clone();
                levels.sort();
                let remap: Vec<f64> = provisional[ci]
                    .iter()
                    .map(|s| levels.binary_search(s).unwrap() as f64)
                    .collect();
                for v in features.column_mut(ci) {
                    *v = remap[*v as usize];
                }
                columns.push(FeatureColumn {
                    name: col.name.clone(),
                    kind: FeatureKind::Categorical { levels },
                });
            }
            _ => columns.push(FeatureColumn::numeric(col.name.clone())),
        }
    }

    let mut label_names: Vec<String> = labels_raw.clone();
    label_names.sort();
    label_names.dedup();
    let labels = labels_raw
        .iter()
        .map(|l| label_names.binary_search(l).unwrap())
        .collect();

    let ds = Dataset {
        schema_id: schema.id.clone(),
        columns,
        features,
        labels,
        label_names,
        norm_params: None,
    };
    ds.validate()?;
    Ok((ds, report))
}

fn convert_row(
    rec: &csv::StringRecord,
    schema: &Schema,
    label_idx: usize,
    allow_unlabeled: bool,
) -> std::result::Result<ParsedRow, String> {
    let unlabeled = allow_unlabeled && rec.len() + 1 == schema.len();
    if rec.len() != schema.len() && !unlabeled {
        return Err(format!(
            "expected {} fields, found {}",
            schema.len(),
            rec.len()
        ));
    }
    let mut cells = Vec::with_capacity(schema.len());
    let mut label = None;
    let mut field = 0;
    for col in schema.columns() {
        if unlabeled && col.index == label_idx {
            label = Some(UNLABELED.to_string());
            continue;
        }
        let raw = rec[field].trim();
        field += 1;
        match col.kind {
            ColumnKind::Ignore => {}
            ColumnKind::Label => label = Some(raw.to_string()),
            ColumnKind::Categorical => cells.push(Cell::Cat(raw.to_string())),
            ColumnKind::Numeric => {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| format!("column `{}`: `{raw}` is not a number", col.name))?;
                if !v.is_finite() {
                    return Err(format!("column `{}`: non-finite value `{raw}`", col.name));
                }
                cells.push(Cell::Num(v));
            }
        }
    }
    Ok(ParsedRow {
        cells,
        label: label.expect("schema has a label column"),
    })
}

fn normalize_name(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// A first row is a header when most of its fields name schema columns.
fn looks_like_header(rec: &csv::StringRecord, schema: &Schema) -> bool {
    let names: BTreeSet<String> = schema
        .columns()
        .iter()
        .map(|c| normalize_name(&c.name))
        .collect();
    let matches = rec
        .iter()
        .filter(|f| names.contains(&normalize_name(f)))
        .count();
    matches * 2 >= rec.len().max(1)
}

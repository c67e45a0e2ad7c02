use std::fs;
use std::path::Path;

use hids_core::{Error, Result};
use serde_json::Value;

const STAGES: &[(&str, &[&str])] = &[
    ("preprocess", &["norm_params.json"]),
    ("features", &["feature_subset.json"]),
    ("autoencoder", &["ae_trace.csv"]),
    ("som", &["som_trace.csv", "u_matrix.csv", "hit_map.csv"]),
    ("dbn", &["dbn_pretrain_trace.csv", "dbn_finetune_trace.csv"]),
    ("evaluate", &["metrics.json", "class_metrics.csv", "confusion.csv"]),
];

const TRACES: &[&str] = &[
    "ae_trace.csv",
    "som_trace.csv",
    "dbn_pretrain_trace.csv",
    "dbn_finetune_trace.csv",
    "pso_trace.csv",
];

pub struct Summary {
    pub markdown: String,
    pub missing: Vec<&'static str>,
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((header, rows))
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn last_value(path: &Path, column: &str) -> Option<String> {
    let (header, rows) = read_csv(path).ok()?;
    let i = header.iter().position(|h| h == column)?;
    rows.last().map(|r| r[i].clone())
}

fn fmt(v: Option<&Value>) -> String {
    match v.and_then(Value::as_f64) {
        Some(x) => format!("{x:.4}"),
        None => "n/a".into(),
    }
}

fn stage_detail(run: &Path, stage: &str) -> Option<String> {
    match stage {
        "features" => {
            let v = read_json(&run.join("feature_subset.json")).ok()?;
            let n = v["indices"].as_array()?.len();
            Some(format!("{} kept {n} columns", v["method"].as_str().unwrap_or("?")))
        }
        "autoencoder" => last_value(&run.join("ae_trace.csv"), "loss").map(|l| format!("final loss {l}")),
        "som" => last_value(&run.join("som_trace.csv"), "mean_qe").map(|q| format!("final mean QE {q}")),
        "dbn" => last_value(&run.join("dbn_finetune_trace.csv"), "loss").map(|l| format!("final fine-tune loss {l}")),
        "evaluate" => {
            let v = read_json(&run.join("metrics.json")).ok()?;
            Some(format!(
                "accuracy {}, macro F1 {}, AUC {}",
                fmt(v.get("accuracy")),
                fmt(v.pointer("/macro_avg/metrics/f1")),
                fmt(v.get("auc_roc"))
            ))
        }
        _ => None,
    }
}

/// Builds the markdown summary and writes `traces.csv` (long format: trace,
/// row, column, value) under `out`.
pub fn summarize(run: &Path, out: &Path) -> Result<Summary> {
    let entries = fs::read_dir(run).map_err(|e| Error::Io {
        path: run.to_path_buf(),
        source: e,
    })?;
    if entries.count() == 0 {
        return Err(Error::Config(format!("{} is empty", run.display())));
    }
    let known = STAGES.iter().flat_map(|(_, f)| f.iter()).chain(TRACES).chain(&["bundle.hids"]);
    if !known.clone().any(|f| run.join(f).is_file()) {
        return Err(Error::Config(format!("{} holds no run artifacts", run.display())));
    }

    let mut md = format!("# Run summary: {}\n\n| stage | status | detail |\n|---|---|---|\n", run.display());
    let mut missing = Vec::new();
    for (stage, files) in STAGES {
        let absent: Vec<&str> = files.iter().copied().filter(|f| !run.join(f).is_file()).collect();
        let status = if absent.is_empty() {
            "complete".to_string()
        } else if absent.len() == files.len() {
            missing.push(*stage);
            "missing".to_string()
        } else {
            missing.push(*stage);
            format!("partial (missing {})", absent.join(", "))
        };
        let detail = stage_detail(run, stage).unwrap_or_default();
        md.push_str(&format!("| {stage} | {status} | {detail} |\n"));
    }
    if run.join("pso_trace.csv").is_file() {
        let best = last_value(&run.join("pso_trace.csv"), "best_fitness").unwrap_or_default();
        md.push_str(&format!("\nPSO best fitness: {best}\n"));
    }
    md.push_str(&format!(
        "\nBundle: {}\n",
        if run.join("bundle.hids").is_file() { "present" } else { "absent" }
    ));

    let traces_path = out.join("traces.csv");
    let mut w = csv::Writer::from_path(&traces_path)?;
    w.write_record(["trace", "row", "column", "value"])?;
    for name in TRACES {
        let p = run.join(name);
        if !p.is_file() {
            continue;
        }
        let (header, rows) = read_csv(&p)?;
        let trace = name.trim_end_matches(".csv");
        for (i, row) in rows.iter().enumerate() {
            for (h, v) in header.iter().zip(row) {
                w.write_record([trace, &i.to_string(), h, v])?;
            }
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: traces_path,
        source: e,
    })?;
    md.push_str("\nAll traces: traces.csv\n");
    Ok(Summary { markdown: md, missing })
}

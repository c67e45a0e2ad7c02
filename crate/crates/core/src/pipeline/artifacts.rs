use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{Evaluation, StageReports, TrainedBundle};
use crate::dataio::Dataset;
use crate::metrics::write_roc_csv;
use crate::{Error, Result};

/// Output directory for run artifacts; a sink without a directory discards
/// everything.
#[derive(Debug, Clone, Default)]
pub struct ArtifactSink {
    dir: Option<PathBuf>,
}

impl ArtifactSink {
    pub fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        Ok(ArtifactSink {
            dir: dir.map(Path::to_path_buf),
        })
    }

    pub fn discard() -> Self {
        ArtifactSink::default()
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn path(&self, name: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(name))
    }

    pub fn bytes(&self, name: &str, data: &[u8]) -> Result<()> {
        if let Some(p) = self.path(name) {
            fs::write(&p, data).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }

    pub fn text(&self, name: &str, text: &str) -> Result<()> {
        self.bytes(name, text.as_bytes())
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        if self.dir.is_none() {
            return Ok(());
        }
        self.text(name, &serde_json::to_string_pretty(value)?)
    }

    pub fn csv(&self, name: &str, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
        let Some(p) = self.path(name) else {
            return Ok(());
        };
        let file = fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w).and_then(|()| w.flush()).map_err(|e| Error::io(&p, e))
    }
}

/// Metrics, per-class table, confusion matrix, ROC and verdicts.
pub fn write_evaluation(sink: &ArtifactSink, bundle: &TrainedBundle, eval: &Evaluation) -> Result<()> {
    sink.text("metrics.json", &eval.report.to_json()?)?;
    sink.csv("class_metrics.csv", |w| eval.report.write_class_csv(w))?;
    sink.csv("confusion.csv", |w| eval.report.write_confusion_csv(w))?;
    if let Some(roc) = &eval.roc {
        sink.csv("roc.csv", |w| write_roc_csv(w, roc))?;
    }
    if let Some(p) = sink.path("verdicts.csv") {
        let file = fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
        bundle.write_verdicts(BufWriter::new(file), &eval.verdicts)?;
    }
    Ok(())
}

pub fn write_training_artifacts(
    sink: &ArtifactSink,
    bundle: &TrainedBundle,
    reports: &StageReports,
    test: &Dataset,
    eval: &Evaluation,
) -> Result<()> {
    if sink.dir().is_none() {
        return Ok(());
    }
    write_evaluation(sink, bundle, eval)?;
    if let Some(p) = sink.path("test_split.csv") {
        test.write_schema_csv(&bundle.schema, &p)?;
    }
    sink.json("stage_report.json", reports)?;
    sink.text("advisory.json", "{}\n")
}

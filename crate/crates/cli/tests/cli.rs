use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hids_core::pipeline::TIMESTAMP_RANGE;
use hids_core::synth::{write_csv, SynthKind};

const SMALL: &str = r#"
seed = 11

[data]
train = "train.csv"

[autoencoder]
hidden = [16]
latent = 8
epochs = 4
lr = 0.005

[som]
width = 4
height = 4
epochs = 2

[dbn]
hidden = [12]

[dbn.pretrain]
epochs = 1

[dbn.finetune]
epochs = 5
"#;

fn hids(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hids"))
        .args(args)
        .arg("--quiet")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: String,
}

impl Fixture {
    fn new(rows: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        write_csv(SynthKind::NslKdd, rows, 21, None, root.join("train.csv")).unwrap();
        fs::write(root.join("run.toml"), SMALL).unwrap();
        let config = root.join("run.toml").display().to_string();
        Fixture { _dir: dir, root, config }
    }

    fn out(&self, name: &str) -> String {
        self.root.join(name).display().to_string()
    }

    fn run(&self, cmd: &str, out: &str, extra: &[&str]) -> Output {
        let mut args = vec![cmd, "--config", &self.config, "--out", out];
        args.extend_from_slice(extra);
        hids(&args)
    }

    fn train(&self, name: &str) -> PathBuf {
        let out = self.out(name);
        let o = self.run("train", &out, &[]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        PathBuf::from(out)
    }
}

fn line_count(p: &Path) -> usize {
    fs::read_to_string(p).unwrap().lines().count()
}

#[test]
fn prepare_is_deterministic_and_reports_missing_files() {
    let f = Fixture::new(300);
    let (a, b) = (f.out("a"), f.out("b"));
    assert_eq!(code(&f.run("prepare", &a, &[])), 0);
    assert_eq!(code(&f.run("prepare", &b, &[])), 0);
    for name in ["prepared.csv", "norm_params.json", "encoder.json", "prepare_report.json"] {
        assert_eq!(fs::read(Path::new(&a).join(name)).unwrap(), fs::read(Path::new(&b).join(name)).unwrap(), "{name}");
    }
    let missing = f.run("prepare", &f.out("c"), &["--override", "data.train=\"/nonexistent/x.csv\""]);
    assert_eq!(code(&missing), 2);
    assert!(stderr(&missing).contains("nonexistent"), "{}", stderr(&missing));
}

#[test]
fn invalid_config_key_exits_2_naming_it() {
    let f = Fixture::new(100);
    let o = f.run("train", &f.out("t"), &["--override", "som.not_a_key=3"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("not_a_key"), "{}", stderr(&o));
    assert_eq!(code(&hids(&["train", "--bogus-flag"])), 2);
}

#[test]
fn select_features_writes_subset() {
    let f = Fixture::new(300);
    let out = f.out("fs");
    let o = f.run("select-features", &out, &["--override", "features.method=\"lasso\""]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(Path::new(&out).join("feature_subset.json")).unwrap()).unwrap();
    assert_eq!(v["method"], "lasso");
}

#[test]
fn train_evaluate_score_roundtrip() {
    let f = Fixture::new(800);
    let run = f.train("run");
    let bundle = run.join("bundle.hids").display().to_string();
    let split = run.join("test_split.csv").display().to_string();

    let ev = f.out("eval");
    let o = hids(&["evaluate", "--bundle", &bundle, "--input", &split, "--out", &ev]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let direct: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("metrics.json")).unwrap()).unwrap();
    let again: serde_json::Value = serde_json::from_str(&fs::read_to_string(Path::new(&ev).join("metrics.json")).unwrap()).unwrap();
    assert_eq!(direct, again);
    for key in ["accuracy", "per_class", "macro_avg", "confusion", "binary", "auc_roc"] {
        assert!(again.get(key).is_some(), "metrics.json lacks {key}");
    }
    for m in ["accuracy", "precision", "recall", "specificity", "f1", "f2", "fpr", "mcc", "gmean", "balanced_accuracy"] {
        assert!(again["binary"].get(m).is_some(), "binary lacks {m}");
    }

    let (s1, s2) = (f.out("s1"), f.out("s2"));
    assert_eq!(code(&hids(&["score", "--bundle", &bundle, "--input", &split, "--out", &s1])), 0);
    assert_eq!(code(&hids(&["score", "--bundle", &bundle, "--input", &split, "--out", &s2])), 0);
    let v1 = fs::read(Path::new(&s1).join("verdicts.csv")).unwrap();
    assert_eq!(v1, fs::read(Path::new(&s2).join("verdicts.csv")).unwrap());
    assert_eq!(line_count(&Path::new(&s1).join("verdicts.csv")), line_count(&run.join("test_split.csv")));
    let header = String::from_utf8(v1).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "record_id,dbn_class,dbn_confidence,som_qe,anomaly_flag,final_label");

    let unsw = f.root.join("unsw.csv");
    write_csv(SynthKind::UnswNb15, 40, 1, None, &unsw).unwrap();
    let unsw = unsw.display().to_string();
    assert_eq!(code(&hids(&["score", "--bundle", &bundle, "--input", &unsw, "--out", &f.out("s3")])), 3);
    assert_eq!(code(&hids(&["evaluate", "--bundle", &bundle, "--input", &unsw, "--out", &f.out("e3")])), 3);

    let mut bytes = fs::read(&bundle).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    let bad = f.root.join("bad.hids");
    fs::write(&bad, bytes).unwrap();
    let o = hids(&["score", "--bundle", bad.to_str().unwrap(), "--input", &split, "--out", &f.out("s4")]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("checksum"), "{}", stderr(&o));
}

#[test]
fn seed_override_is_reproducible_and_epochs_zero_trains() {
    let f = Fixture::new(300);
    let a = f.run("train", &f.out("a"), &["--seed", "7"]);
    let b = f.run("train", &f.out("b"), &["--seed", "7"]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(code(&b), 0);
    let mut ba = fs::read(Path::new(&f.out("a")).join("bundle.hids")).unwrap();
    let bb = fs::read(Path::new(&f.out("b")).join("bundle.hids")).unwrap();
    ba[TIMESTAMP_RANGE].copy_from_slice(&bb[TIMESTAMP_RANGE]);
    assert_eq!(ba, bb);
    assert_eq!(
        fs::read(Path::new(&f.out("a")).join("metrics.json")).unwrap(),
        fs::read(Path::new(&f.out("b")).join("metrics.json")).unwrap()
    );
    let zero = [
        "--override", "autoencoder.epochs=0",
        "--override", "som.epochs=0",
        "--override", "dbn.pretrain.epochs=0",
        "--override", "dbn.finetune.epochs=0",
    ];
    let o = f.run("train", &f.out("z"), &zero);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn optimize_budgets() {
    let f = Fixture::new(300);
    let one = f.out("one");
    let o = f.run("optimize", &one, &["--override", "pso.particles=1", "--override", "pso.iterations=1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(line_count(&Path::new(&one).join("pso_trace.csv")), 2);
    let best = fs::read_to_string(Path::new(&one).join("best_config.toml")).unwrap();
    hids_core::pipeline::PipelineConfig::from_toml_str(&best).unwrap();

    let zero = f.out("zero");
    let o = f.run("optimize", &zero, &["--override", "pso.iterations=0"]);
    assert_eq!(code(&o), 0);
    assert!(Path::new(&zero).join("best_config.toml").is_file());
    assert!(!Path::new(&zero).join("pso_trace.csv").exists());
}

#[test]
fn report_summarizes_runs() {
    let f = Fixture::new(300);
    let run = f.train("run");
    let out = f.out("rep");
    let o = hids(&["report", "--run", run.to_str().unwrap(), "--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let md = fs::read_to_string(Path::new(&out).join("summary.md")).unwrap();
    for stage in ["preprocess", "features", "autoencoder", "som", "dbn", "evaluate"] {
        assert!(md.contains(&format!("| {stage} | complete |")), "{md}");
    }
    assert!(line_count(&Path::new(&out).join("traces.csv")) > 5);

    let empty = f.root.join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(code(&hids(&["report", "--run", empty.to_str().unwrap(), "--out", &f.out("r2")])), 2);

    fs::remove_file(run.join("som_trace.csv")).unwrap();
    fs::remove_file(run.join("u_matrix.csv")).unwrap();
    fs::remove_file(run.join("hit_map.csv")).unwrap();
    let out3 = f.out("r3");
    let o = Command::new(env!("CARGO_BIN_EXE_hids"))
        .args(["report", "--run", run.to_str().unwrap(), "--out", &out3])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("no artifacts for stage som"), "{}", stderr(&o));
    assert!(fs::read_to_string(Path::new(&out3).join("summary.md")).unwrap().contains("| som | missing |"));
}

use std::path::Path;

use hids_core::pipeline::{
    evaluate, integrate, optimize_pipeline, ArtifactSink, pipeline_fitness, reduced_budget, run_training, PipelineConfig, Policy,
    TrainedBundle, TIMESTAMP_RANGE, UNKNOWN_ATTACK,
};
use hids_core::synth::{write_csv, SynthKind};
use hids_core::Error;

fn small_config(train: &Path) -> PipelineConfig {
    PipelineConfig::default()
        .with_overrides(&[
            "autoencoder.hidden=[16]",
            "autoencoder.latent=8",
            "autoencoder.epochs=5",
            "autoencoder.lr=0.005",
            "som.width=5",
            "som.height=5",
            "som.epochs=3",
            "dbn.hidden=[16, 8]",
            "dbn.pretrain.epochs=2",
            "dbn.finetune.epochs=10",
        ])
        .map(|mut c| {
            c.data.train = Some(train.to_path_buf());
            c
        })
        .unwrap()
}

fn nsl_file(dir: &Path, rows: usize, seed: u64) -> std::path::PathBuf {
    let p = dir.join("train.csv");
    write_csv(SynthKind::NslKdd, rows, seed, None, &p).unwrap();
    p
}

#[test]
fn integration_policies() {
    let (normal, unknown) = (Some(1), 5);
    assert_eq!(integrate(1, true, Policy::Escalate, normal, unknown), 5);
    assert_eq!(integrate(1, false, Policy::Escalate, normal, unknown), 1);
    assert_eq!(integrate(0, true, Policy::Escalate, normal, unknown), 0);
    assert_eq!(integrate(1, true, Policy::DbnOnly, normal, unknown), 1);
    assert_eq!(integrate(0, true, Policy::SomOnly, normal, unknown), 5);
    assert_eq!(integrate(0, false, Policy::SomOnly, normal, unknown), 1);
    assert_eq!(integrate(2, true, Policy::Escalate, None, unknown), 2);
}

#[test]
fn budget_reduction_rounds_up() {
    assert_eq!(reduced_budget(10, 0.2), 2);
    assert_eq!(reduced_budget(11, 0.2), 3);
    assert_eq!(reduced_budget(1, 0.2), 1);
    assert_eq!(reduced_budget(0, 0.5), 1);
}

#[test]
fn end_to_end_training_writes_artifacts_and_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&nsl_file(dir.path(), 1500, 3));
    let out = dir.path().join("run");
    let run = run_training(&cfg, Some(&out)).unwrap();
    for name in [
        "bundle.hids",
        "config.toml",
        "norm_params.json",
        "feature_subset.json",
        "ae_trace.csv",
        "som_trace.csv",
        "u_matrix.csv",
        "hit_map.csv",
        "dbn_pretrain_trace.csv",
        "dbn_finetune_trace.csv",
        "metrics.json",
        "class_metrics.csv",
        "confusion.csv",
        "roc.csv",
        "verdicts.csv",
        "test_split.csv",
        "advisory.json",
    ] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let r = &run.evaluation.report;
    assert!(r.classes.iter().any(|c| c == UNKNOWN_ATTACK));
    assert!(r.accuracy > 0.5, "accuracy {}", r.accuracy);
    assert_eq!(run.evaluation.verdicts.len(), run.test.n_rows());

    let loaded = TrainedBundle::load(out.join("bundle.hids")).unwrap();
    assert_eq!(loaded, run.bundle);
    let test = loaded.load_records(&out.join("test_split.csv"), false).unwrap();
    let again = evaluate(&loaded, &test).unwrap();
    assert_eq!(again.verdicts, run.evaluation.verdicts);
}

#[test]
fn same_seed_gives_identical_bundles() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&nsl_file(dir.path(), 600, 5));
    let a = run_training(&cfg, None).unwrap().bundle.to_bytes_at(0).unwrap();
    let b = run_training(&cfg, None).unwrap().bundle.to_bytes_at(7).unwrap();
    let mut b0 = b.clone();
    b0[TIMESTAMP_RANGE].copy_from_slice(&a[TIMESTAMP_RANGE]);
    assert_eq!(a, b0);
}

#[test]
fn sequential_and_parallel_paths_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&nsl_file(dir.path(), 600, 6));
    hids_core::exec::set_sequential(true);
    let seq = run_training(&cfg, None).map(|r| r.bundle.to_bytes_at(0).unwrap());
    hids_core::exec::set_sequential(false);
    let par = run_training(&cfg, None).unwrap().bundle.to_bytes_at(0).unwrap();
    assert_eq!(seq.unwrap(), par);
}

#[test]
fn damaged_bundles_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&nsl_file(dir.path(), 400, 9));
    let bytes = run_training(&cfg, None).unwrap().bundle.to_bytes().unwrap();
    let mut flipped = bytes.clone();
    let mid = flipped.len() / 2;
    flipped[mid] ^= 0x55;
    assert!(matches!(TrainedBundle::from_bytes(&flipped), Err(Error::Bundle(_))));
    assert!(matches!(TrainedBundle::from_bytes(&bytes[..bytes.len() - 10]), Err(Error::Bundle(_))));
    let mut newer = bytes.clone();
    newer[4] = newer[4].wrapping_add(1);
    let msg = TrainedBundle::from_bytes(&newer).unwrap_err().to_string();
    assert!(msg.contains("newer"), "{msg}");
    let mut stamped = bytes.clone();
    stamped[TIMESTAMP_RANGE].copy_from_slice(&[9; 8]);
    assert!(TrainedBundle::from_bytes(&stamped).is_ok());
}

#[test]
fn scoring_other_schema_is_incompatible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&nsl_file(dir.path(), 400, 2));
    let bundle = run_training(&cfg, None).unwrap().bundle;
    let unsw = dir.path().join("unsw.csv");
    write_csv(SynthKind::UnswNb15, 50, 1, None, &unsw).unwrap();
    let err = bundle.load_records(&unsw, false).unwrap_err();
    assert!(matches!(err, Error::Schema(_) | Error::EmptyInput(_) | Error::DimensionMismatch { .. }), "{err}");
}

#[test]
fn pso_result_is_not_worse_than_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(&nsl_file(dir.path(), 500, 4));
    cfg.pso.particles = 3;
    cfg.pso.iterations = 2;
    cfg.pso.budget_fraction = 0.5;
    let data = hids_core::pipeline::load_data(&cfg).unwrap();
    let base = pipeline_fitness(&cfg, &data).unwrap();
    let out = optimize_pipeline(&cfg, &data).unwrap();
    let result = out.result.unwrap();
    assert_eq!(out.evaluations, 6);
    assert!(result.best_fitness <= base.fitness, "{} > {}", result.best_fitness, base.fitness);
    assert_eq!(result.trace.len(), 2);
    let tuned = pipeline_fitness(&out.config, &data).unwrap();
    assert_eq!(tuned.fitness, result.best_fitness);
}

#[test]
fn empty_pso_budget_keeps_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(&nsl_file(dir.path(), 200, 4));
    cfg.pso.iterations = 0;
    let data = hids_core::pipeline::load_data(&cfg).unwrap();
    let out = optimize_pipeline(&cfg, &data).unwrap();
    assert_eq!(out.config, cfg);
    assert!(out.result.is_none());
}

fn gaussian_data(per_class: usize, separation: f64, seed: u64) -> hids_core::pipeline::PreparedData {
    let dim = 8;
    let ds = hids_core::synth::two_class_dataset(per_class, dim, separation, seed).unwrap();
    let mut text = String::from("index,name,kind\n");
    for j in 0..dim {
        text.push_str(&format!("{j},x{j},numeric\n"));
    }
    text.push_str(&format!("{dim},class,label\n"));
    hids_core::pipeline::PreparedData {
        schema: hids_core::dataio::Schema::from_csv_str("synthetic", &text).unwrap(),
        taxonomy: None,
        train: ds,
        test: None,
        malformed: 0,
    }
}

#[test]
fn default_config_separates_two_gaussians() {
    let cfg = PipelineConfig::default();
    let run = hids_core::pipeline::run_training_on(&cfg, gaussian_data(500, 6.0, 1), &ArtifactSink::discard()).unwrap();
    let acc = run.evaluation.report.accuracy;
    assert!(acc >= 0.95, "held-out accuracy {acc}");
    let on_train = evaluate(&run.bundle, &gaussian_data(500, 6.0, 1).train).unwrap();
    assert!(on_train.report.accuracy >= acc - 0.02, "{} vs {acc}", on_train.report.accuracy);
}

#[test]
fn zero_epochs_give_an_untrained_bundle() {
    let cfg = PipelineConfig::default()
        .with_overrides(&["autoencoder.epochs=0", "som.epochs=0", "dbn.pretrain.epochs=0", "dbn.finetune.epochs=0"])
        .unwrap();
    let run = hids_core::pipeline::run_training_on(&cfg, gaussian_data(300, 6.0, 2), &ArtifactSink::discard()).unwrap();
    assert_eq!(run.reports.ae_trace.loss.len(), 1);
    assert_eq!(run.reports.dbn_finetune.len(), 1);
    let acc = run.evaluation.report.accuracy;
    assert!(acc < 0.8, "untrained accuracy {acc}");
}

#[test]
fn nsl_kdd_label_map_covers_the_five_categories() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(&nsl_file(dir.path(), 40_000, 6));
    cfg.data.subsample = 6000;
    let run = run_training(&cfg, None).unwrap();
    let mut names = run.bundle.label_names.clone();
    names.sort();
    assert_eq!(names, vec!["DoS", "Normal", "Probe", "R2L", "U2R"]);
    assert_eq!(run.bundle.normal_id, run.bundle.label_names.iter().position(|n| n == "Normal"));
}

#[test]
fn unseen_test_class_is_scored_and_null_filled() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.csv");
    write_csv(SynthKind::NslKdd, 600, 1, Some(&["normal", "neptune", "smurf"]), &train).unwrap();
    let test = dir.path().join("test.csv");
    write_csv(SynthKind::NslKdd, 200, 2, Some(&["normal", "satan"]), &test).unwrap();
    let mut cfg = small_config(&train);
    cfg.data.test = Some(test);
    let run = run_training(&cfg, None).unwrap();
    let r = &run.evaluation.report;
    assert_eq!(run.evaluation.verdicts.len(), 200);
    let probe = r.per_class.iter().find(|c| c.name == "Probe").expect("test-only class listed");
    assert!(probe.support > 0);
    let dos = r.per_class.iter().find(|c| c.name == "DoS").unwrap();
    assert_eq!(dos.support, 0);
    assert_eq!(dos.metrics.recall, None);
    assert!(r.macro_avg.skipped["recall"] >= 1);
}

#[test]
fn empty_test_set_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&nsl_file(dir.path(), 300, 1));
    let run = run_training(&cfg, None).unwrap();
    let empty = run.test.select_rows(&[]);
    assert!(matches!(evaluate(&run.bundle, &empty), Err(Error::EmptyInput(_))));
}

#[test]
fn fitness_of_a_perfect_candidate_is_minus_weight_sum() {
    let mut cfg = PipelineConfig::default()
        .with_overrides(&["autoencoder.hidden=[16]", "autoencoder.latent=8", "integration.policy=\"dbn-only\""])
        .unwrap();
    cfg.pso.budget_fraction = 1.0;
    let data = gaussian_data(300, 20.0, 3);
    let f = pipeline_fitness(&cfg, &data).unwrap();
    assert_eq!(f.accuracy, 1.0);
    assert!((f.fitness + cfg.pso.weights.sum()).abs() < 1e-12, "{}", f.fitness);
    assert!(f.composite.is_finite());
}

#[test]
fn failing_candidates_score_infinity() {
    let mut cfg = PipelineConfig::default();
    cfg.pso.particles = 2;
    cfg.pso.iterations = 1;
    cfg.pso.space = vec![hids_core::pipeline::SearchDim {
        name: "bad_theta".into(),
        targets: vec!["features.theta".into()],
        dim: hids_core::pso::Dimension::Continuous { lo: 1.5, hi: 2.0 },
    }];
    let err = optimize_pipeline(&cfg, &gaussian_data(50, 6.0, 1)).unwrap_err();
    assert!(matches!(err, Error::Numerical(_)), "{err}");
}

#[test]
fn single_particle_single_iteration_returns_its_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(&nsl_file(dir.path(), 400, 8));
    cfg.pso.particles = 1;
    cfg.pso.iterations = 1;
    cfg.autoencoder.hidden = vec![32];
    cfg.dbn.hidden = vec![32, 8];
    cfg.dbn.pretrain.lr = cfg.autoencoder.lr;
    let data = hids_core::pipeline::load_data(&cfg).unwrap();
    let out = optimize_pipeline(&cfg, &data).unwrap();
    let r = out.result.unwrap();
    assert_eq!(out.evaluations, 1);
    assert_eq!(out.config, cfg);
    assert_eq!(r.best_fitness, pipeline_fitness(&cfg, &data).unwrap().fitness);
}

use anomaly_gan::experiments::*;
use anomaly_gan::metrics::{roc_auc, youden_point};
use anomaly_gan::networks::{checkpoint, ArchitectureTag, NetworkBundle};
use anomaly_gan::scoring::{evaluate_frames, read_scores_csv, ScoreType};
use anomaly_gan::Error;
use std::path::Path;

fn tiny(dir: &Path, experiment: Experiment) -> ExperimentConfig {
    ExperimentConfig {
        experiment,
        seeds: vec![0, 1],
        epochs: 1,
        batch_size: 4,
        base_channels: 2,
        latent_dim: 4,
        n_train: 6,
        n_test_normal: 5,
        n_test_abnormal: 5,
        n_subjects: 3,
        n_subject_frames: 7,
        out_dir: dir.to_path_buf(),
        top_k: 2,
        ..ExperimentConfig::default()
    }
}

#[test]
fn config_parsing_is_strict() {
    let ok = ExperimentConfig::from_toml("model = \"dcae\"\nscore_type = \"baseline\"\nseeds = [3]\n").unwrap();
    assert_eq!(ok.model, ArchitectureTag::Dcae);
    assert_eq!(ok.seeds, vec![3]);
    assert_eq!(ExperimentConfig::default().seeds.len(), 5);
    for bad in [
        "modle = \"dcae\"",
        "model = \"dcae\"\nscore_type = \"attn\"",
        "seeds = []",
        "seeds = [1, 1]",
        "compare = [\"nonsense\"]",
        "batch_size = 0",
    ] {
        assert!(matches!(ExperimentConfig::from_toml(bad), Err(Error::Config(_))), "{bad}");
    }
    let c: Comparison = "baseline@runs/x/scores.csv".parse().unwrap();
    assert_eq!(c.score_type, ScoreType::Baseline);
    assert_eq!(c.to_string(), "baseline@runs/x/scores.csv");
}

#[test]
fn subject_level_experiment_counts_subjects() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&tiny(dir.path(), Experiment::Exp3)).unwrap();
    assert_eq!(report.samples.unit, "subject");
    assert_eq!(report.samples.total, 5 + 3);
    assert_eq!(report.samples.abnormal, 3);
    let frames = read_scores_csv(&dir.path().join("scores.csv")).unwrap();
    assert_eq!(frames.iter().filter(|r| r.score_type == ScoreType::Attn).count(), 2 * (5 + 7));
    let primary = report.primary();
    assert_eq!(primary.per_seed.len(), 2);
    assert!(primary.auc.mean.is_finite() && primary.auc.std >= 0.0);
}

#[test]
fn pipeline_is_deterministic_and_skip_train_matches_direct_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path(), Experiment::Exp1);
    cfg.compare = vec!["discr".into()];
    let a = run_experiment(&cfg).unwrap();
    let json_a = std::fs::read(dir.path().join("report.json")).unwrap();
    let b = run_experiment(&cfg).unwrap();
    let json_b = std::fs::read(dir.path().join("report.json")).unwrap();
    assert_eq!(a, b);
    assert_eq!(json_a, json_b);
    assert_eq!(a.samples.total, 10);
    assert_eq!(a.delong.len(), 1);
    assert_eq!(a.checkpoints.len(), 2);

    let skip_dir = tempfile::tempdir().unwrap();
    let skip = ExperimentConfig {
        seeds: vec![0],
        scores_csv: Some(dir.path().join("scores.csv")),
        out_dir: skip_dir.path().to_path_buf(),
        compare: vec![],
        ..cfg.clone()
    };
    let report = run_experiment(&skip).unwrap();
    let mut recs: Vec<_> = read_scores_csv(&dir.path().join("scores.csv"))
        .unwrap()
        .into_iter()
        .filter(|r| r.score_type == ScoreType::Attn && r.seed.to_string() == "0")
        .collect();
    recs.sort_by(|x, y| x.frame.cmp(&y.frame));
    let scores: Vec<f64> = recs.iter().map(|r| r.raw).collect();
    let labels: Vec<bool> = recs.iter().map(|r| r.label.is_abnormal()).collect();
    let curve = roc_auc(&scores, &labels).unwrap();
    let seed0 = &report.primary().per_seed["0"];
    assert_eq!(seed0.auc, curve.auc);
    assert_eq!(seed0.auc, a.primary().per_seed["0"].auc);
    let op = youden_point(&curve, &scores, &labels).unwrap();
    assert_eq!(seed0.operating_point.confusion, op.confusion);
    assert_eq!(seed0.operating_point.f1, op.f1);
    assert!(report.checkpoints.is_empty());
}

#[test]
fn frame_and_subject_experiments_share_trained_bundles() {
    let d2 = tempfile::tempdir().unwrap();
    let d4 = tempfile::tempdir().unwrap();
    let mut c2 = tiny(d2.path(), Experiment::Exp2);
    c2.seeds = vec![7];
    let mut c4 = tiny(d4.path(), Experiment::Exp4);
    c4.seeds = vec![7];
    let r2 = run_experiment(&c2).unwrap();
    let r4 = run_experiment(&c4).unwrap();
    assert_eq!(r2.checkpoints, r4.checkpoints);
    assert_eq!(r2.samples.total, 5 + 3);
    assert_eq!(r4.samples.total, 5 + 7);
}

#[test]
fn checkpoints_reload_to_identical_scores_and_guard_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path(), Experiment::Exp1);
    cfg.seeds = vec![2];
    let data = prepare_data(&cfg).unwrap();
    let mut run = train_or_load(&cfg, &data.split.train, 2, dir.path()).unwrap();
    assert!(run.history.is_some());
    let direct = evaluate_frames(&mut run.bundle, &data.split.test, 4, 1.0).unwrap();
    let mut loaded: NetworkBundle<f32> = checkpoint::load(&run.checkpoint, Some(ArchitectureTag::AlphaGan)).unwrap();
    let again = evaluate_frames(&mut loaded, &data.split.test, 4, 1.0).unwrap();
    for (a, b) in direct.iter().zip(&again) {
        assert_eq!(a.scores, b.scores);
    }

    cfg.checkpoint_dir = Some(dir.path().join("checkpoints"));
    let reused = train_or_load(&cfg, &data.split.train, 2, dir.path()).unwrap();
    assert!(reused.history.is_none());
    assert_eq!(reused.checkpoint_sha256, run.checkpoint_sha256);

    // A DCAE checkpoint under the alpha-GAN file name.
    let mut dcae = NetworkBundle::<f32>::build(ArchitectureTag::Dcae, cfg.arch(), 2).unwrap();
    checkpoint::save(&mut dcae, &dir.path().join("checkpoints").join(cfg.checkpoint_name(2))).unwrap();
    assert!(matches!(
        train_or_load(&cfg, &data.split.train, 2, dir.path()),
        Err(Error::ArchitectureMismatch { .. })
    ));
}

#[test]
fn missing_comparison_run_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path(), Experiment::Exp1);
    cfg.seeds = vec![0];
    cfg.compare = vec![format!("baseline@{}", dir.path().join("nope.csv").display())];
    assert!(matches!(run_experiment(&cfg), Err(Error::MissingBaseline(_))));
}

#[test]
fn figures_follow_their_contracts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path(), Experiment::Exp1);
    cfg.seeds = vec![0];
    cfg.top_k = 3;
    let report = run_experiment(&cfg).unwrap();
    let overlays: Vec<_> = std::fs::read_dir(dir.path().join("figures/overlays"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(overlays.len(), 6);
    for p in &overlays {
        assert_eq!(image::image_dimensions(p).unwrap(), (64, 64));
    }
    let hist = std::fs::read_to_string(dir.path().join("figures/histogram.csv")).unwrap();
    let total: usize = hist
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            f[2].parse::<usize>().unwrap() + f[3].parse::<usize>().unwrap()
        })
        .sum();
    assert_eq!(total, report.samples.total);
    assert_eq!(hist.lines().count(), HISTOGRAM_BINS + 1);

    let none = tempfile::tempdir().unwrap();
    cfg.top_k = 0;
    cfg.out_dir = none.path().to_path_buf();
    run_experiment(&cfg).unwrap();
    assert!(!none.path().join("figures/overlays").exists());
}

#[test]
fn baselines_run_through_the_pipeline() {
    for (model, score) in [
        (ArchitectureTag::Dcae, ScoreType::Baseline),
        (ArchitectureTag::DeepSvdd, ScoreType::Baseline),
        (ArchitectureTag::FAnoGan, ScoreType::Baseline),
        (ArchitectureTag::VaeGan, ScoreType::Attn),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny(dir.path(), Experiment::Exp1);
        cfg.model = model;
        cfg.score_type = score;
        cfg.seeds = vec![0];
        let r = run_experiment(&cfg).unwrap();
        assert!((0.0..=1.0).contains(&r.primary().averaged.auc), "{model}");
    }
}

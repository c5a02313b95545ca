use super::config::{Experiment, ExperimentConfig};
use super::figures::emit_figures;
use super::report::{evaluate_records, EvalReport};
use crate::data::{
    generate_phantoms, generate_subjects, load_folder, make_dataset1, make_dataset2, Dataset2Mode, DatasetSplit,
    Frame,
};
use crate::networks::{checkpoint, NetworkBundle};
use crate::scoring::{evaluate_frames, normalize_scores, read_scores_csv, to_records, write_scores_csv, FrameEvaluation, ScoreRecord, SeedTag};
use crate::training::{train, TrainHistory};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

/// Training frames and the experiment's test set.
#[derive(Clone, Debug)]
pub struct ExperimentData {
    pub split: DatasetSplit,
}

fn pool_seed(data_seed: u64, pool: u64) -> u64 {
    data_seed.wrapping_mul(16).wrapping_add(pool)
}

fn assemble(
    cfg: &ExperimentConfig,
    test_normals: Vec<Frame>,
    abnormal: Vec<Frame>,
    subjects: BTreeMap<String, Vec<Frame>>,
) -> Result<DatasetSplit> {
    let seed = pool_seed(cfg.data_seed, 4);
    match cfg.experiment {
        Experiment::Exp1 => {
            let n = cfg.n_test_normal.min(cfg.n_test_abnormal);
            make_dataset1(&test_normals, &abnormal, n, seed)
        }
        Experiment::Exp2 => make_dataset2(&test_normals, &subjects, Dataset2Mode::OneRandomFrame, seed),
        Experiment::Exp3 | Experiment::Exp4 => make_dataset2(&test_normals, &subjects, Dataset2Mode::AllFrames, seed),
    }
}

fn phantom_data(cfg: &ExperimentConfig) -> Result<DatasetSplit> {
    let p = cfg.phantom();
    let s = |k| pool_seed(cfg.data_seed, k);
    let train = generate_phantoms(&p, cfg.n_train, 0, s(0))?;
    let normals = generate_phantoms(&p, cfg.n_test_normal, 0, s(1))?;
    let (abnormal, subjects) = if cfg.experiment == Experiment::Exp1 {
        (generate_phantoms(&p, 0, cfg.n_test_abnormal, s(2))?, BTreeMap::new())
    } else {
        (Vec::new(), generate_subjects(&p, cfg.n_subjects, cfg.n_subject_frames, s(3))?)
    };
    assemble(cfg, normals, abnormal, subjects)?.with_train(train)
}

/// Splits a folder by subject: whole normal subjects are drawn for the test
/// set until it holds `n_test_normal` frames; the remaining normal subjects
/// form the training set.
fn folder_data(cfg: &ExperimentConfig, dir: &Path) -> Result<DatasetSplit> {
    let frames = load_folder(dir)?;
    let mut normal: BTreeMap<String, Vec<Frame>> = BTreeMap::new();
    let mut abnormal: BTreeMap<String, Vec<Frame>> = BTreeMap::new();
    for f in frames {
        let target = if f.label().is_abnormal() { &mut abnormal } else { &mut normal };
        target.entry(f.subject_id().to_string()).or_default().push(f);
    }
    let mut ids: Vec<String> = normal.keys().cloned().collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(pool_seed(cfg.data_seed, 5)));
    let (mut test, mut train) = (Vec::new(), Vec::new());
    for id in ids {
        let target = if test.len() < cfg.n_test_normal { &mut test } else { &mut train };
        target.extend(normal.remove(&id).unwrap_or_default());
    }
    let flat: Vec<Frame> = abnormal.values().flatten().cloned().collect();
    let mut c = cfg.clone();
    c.n_test_normal = test.len();
    c.n_test_abnormal = c.n_test_abnormal.min(flat.len());
    assemble(&c, test, flat, abnormal)?.with_train(train)
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<ExperimentData> {
    let split = match &cfg.data_dir {
        Some(dir) => folder_data(cfg, dir)?,
        None => phantom_data(cfg)?,
    };
    Ok(ExperimentData { split })
}

/// A trained or loaded bundle and the hash of its checkpoint file.
pub struct SeedRun {
    pub seed: u64,
    pub bundle: NetworkBundle<f32>,
    pub checkpoint: PathBuf,
    pub checkpoint_sha256: String,
    pub history: Option<TrainHistory>,
}

/// Loads `<checkpoint_dir>/<model>-seed<N>.ckpt` when configured and
/// present; otherwise trains and saves under `<out>/checkpoints`, with the
/// loss history under `<out>/history`.
pub fn train_or_load(cfg: &ExperimentConfig, train_frames: &[Frame], seed: u64, out: &Path) -> Result<SeedRun> {
    let name = cfg.checkpoint_name(seed);
    if let Some(dir) = &cfg.checkpoint_dir {
        let path = dir.join(&name);
        if path.is_file() {
            let bytes = fs::read(&path)?;
            let bundle = checkpoint::from_bytes::<f32>(&bytes, Some(cfg.model))?;
            if bundle.arch != cfg.arch() {
                return Err(Error::ArchitectureMismatch {
                    expected: format!("{:?}", cfg.arch()),
                    found: format!("{:?}", bundle.arch),
                });
            }
            log::info!("loaded {}", path.display());
            return Ok(SeedRun {
                seed,
                bundle,
                checkpoint: path,
                checkpoint_sha256: checkpoint::sha256_hex(&bytes),
                history: None,
            });
        }
    }
    log::info!("training {} seed {seed} on {} frames", cfg.model, train_frames.len());
    let (mut bundle, history) = train::<f32>(cfg.model, cfg.arch(), train_frames, &cfg.train_config(seed))?;
    fs::create_dir_all(out.join("checkpoints"))?;
    fs::create_dir_all(out.join("history"))?;
    let path = out.join("checkpoints").join(&name);
    let sha = checkpoint::save(&mut bundle, &path)?;
    history.write_csv(&out.join("history").join(format!("{}-seed{seed}.csv", cfg.model)))?;
    Ok(SeedRun {
        seed,
        bundle,
        checkpoint: path,
        checkpoint_sha256: sha,
        history: Some(history),
    })
}

pub fn score_seed(cfg: &ExperimentConfig, run: &mut SeedRun, test: &[Frame]) -> Result<(Vec<FrameEvaluation>, Vec<ScoreRecord>)> {
    let evals = evaluate_frames(&mut run.bundle, test, cfg.eval_batch_size, cfg.feature_weight)?;
    let records = to_records(&evals, cfg.model, SeedTag::Seed(run.seed));
    Ok((evals, records))
}

fn write_report(report: &EvalReport, out: &Path) -> Result<()> {
    fs::write(out.join("report.json"), report.to_json()?)?;
    Ok(())
}

/// Trains (or loads) every seed, scores the test set, evaluates, and writes
/// `report.json`, `scores.csv`, checkpoints, histories and figures under
/// `cfg.out_dir`. With `scores_csv` set, only evaluation and figures run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let out = &cfg.out_dir;
    fs::create_dir_all(out)?;
    if let Some(path) = &cfg.scores_csv {
        let records = read_scores_csv(path)?;
        let (report, units) = evaluate_records(cfg, &records)?;
        write_report(&report, out)?;
        emit_figures(&report, &units, &[], &[], &out.join("figures"), cfg.top_k)?;
        return Ok(report);
    }
    let data = prepare_data(cfg)?;
    let mut records = Vec::new();
    let mut checkpoints = BTreeMap::new();
    let mut first_evals = None;
    for &seed in &cfg.seeds {
        let mut run = train_or_load(cfg, &data.split.train, seed, out)?;
        let (evals, recs) = score_seed(cfg, &mut run, &data.split.test)?;
        checkpoints.insert(seed.to_string(), run.checkpoint_sha256.clone());
        records.extend(recs);
        first_evals.get_or_insert(evals);
    }
    let (mut report, units) = evaluate_records(cfg, &records)?;
    report.checkpoints = checkpoints;
    write_scores_csv(&normalize_scores(&records).0, &out.join("scores.csv"))?;
    write_report(&report, out)?;
    emit_figures(
        &report,
        &units,
        first_evals.as_deref().unwrap_or(&[]),
        &data.split.test,
        &out.join("figures"),
        cfg.top_k,
    )?;
    Ok(report)
}

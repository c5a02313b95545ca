use anomaly_gan::data::export_frames;
use anomaly_gan::experiments::{
    emit_figures, evaluate_records, prepare_data, run_experiment, score_seed, train_or_load, ExperimentConfig,
};
use anomaly_gan::scoring::{normalize_scores, read_scores_csv, write_scores_csv};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "anomaly-gan", version, about = "One-class GAN anomaly detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Run a single training seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Parent directory of the timestamped run directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the experiment's training and test frames as PNG folders.
    PhantomGen(Common),
    /// Train one bundle per seed and save checkpoints.
    Train(Common),
    /// Score the test set with saved checkpoints.
    Score {
        #[command(flatten)]
        common: Common,
        /// Directory holding `<model>-seed<N>.ckpt` files.
        #[arg(long)]
        checkpoints: Option<PathBuf>,
    },
    /// Evaluate a score table: metrics, DeLong comparisons, figures.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Score table (`scores.csv`) to evaluate instead of scoring.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Full pipeline: train (or load), score, evaluate, figures.
    Report {
        #[command(flatten)]
        common: Common,
        /// Reuse checkpoints from this directory where present.
        #[arg(long)]
        checkpoints: Option<PathBuf>,
    },
    /// Figures and attention overlays from a score table and checkpoints.
    Viz {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scores: PathBuf,
        /// Checkpoints used to recompute reconstructions and maps.
        #[arg(long)]
        checkpoints: PathBuf,
    },
}

/// Loads the config, applies overrides and creates
/// `<out>/<command>-<timestamp>` as the run directory.
fn setup(common: &Common, command: &str) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(&common.config).with_context(|| format!("reading {}", common.config.display()))?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(seed) = common.seed {
        cfg.seeds = vec![seed];
    }
    let parent = common.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
    let dir = parent.join(format!("{command}-{stamp}"));
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.toml"), text)?;
    cfg.out_dir = dir;
    Ok(cfg)
}

fn require_checkpoints(cfg: &ExperimentConfig) -> Result<()> {
    let Some(dir) = &cfg.checkpoint_dir else {
        bail!("no checkpoint directory given (--checkpoints or checkpoint_dir)");
    };
    for &s in &cfg.seeds {
        let p = dir.join(cfg.checkpoint_name(s));
        if !p.is_file() {
            bail!("missing checkpoint {}", p.display());
        }
    }
    Ok(())
}

fn finish(out: &Path) {
    println!("{}", out.display());
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::PhantomGen(c) => {
            let cfg = setup(&c, "phantom-gen")?;
            let data = prepare_data(&cfg)?;
            export_frames(&data.split.train, &cfg.out_dir.join("train"))?;
            export_frames(&data.split.test, &cfg.out_dir.join("test"))?;
            finish(&cfg.out_dir);
        }
        Command::Train(c) => {
            let cfg = setup(&c, "train")?;
            let data = prepare_data(&cfg)?;
            for &seed in &cfg.seeds {
                let run = train_or_load(&cfg, &data.split.train, seed, &cfg.out_dir)?;
                println!("seed {seed}: {} sha256 {}", run.checkpoint.display(), run.checkpoint_sha256);
            }
            finish(&cfg.out_dir);
        }
        Command::Score { common, checkpoints } => {
            let mut cfg = setup(&common, "score")?;
            if checkpoints.is_some() {
                cfg.checkpoint_dir = checkpoints;
            }
            require_checkpoints(&cfg)?;
            let data = prepare_data(&cfg)?;
            let mut records = Vec::new();
            for &seed in &cfg.seeds {
                let mut run = train_or_load(&cfg, &data.split.train, seed, &cfg.out_dir)?;
                records.extend(score_seed(&cfg, &mut run, &data.split.test)?.1);
            }
            write_scores_csv(&normalize_scores(&records).0, &cfg.out_dir.join("scores.csv"))?;
            finish(&cfg.out_dir);
        }
        Command::Eval { common, scores } => {
            let mut cfg = setup(&common, "eval")?;
            if scores.is_some() {
                cfg.scores_csv = scores;
            }
            if cfg.scores_csv.is_none() {
                bail!("no score table given (--scores or scores_csv)");
            }
            let report = run_experiment(&cfg)?;
            println!("{} AUC {:.4}", report.score_type, report.primary().averaged.auc);
            finish(&cfg.out_dir);
        }
        Command::Report { common, checkpoints } => {
            let mut cfg = setup(&common, "report")?;
            if checkpoints.is_some() {
                cfg.checkpoint_dir = checkpoints;
            }
            let report = run_experiment(&cfg)?;
            let p = report.primary();
            println!(
                "{} {} {}: AUC {:.4} +- {:.4} over {} seeds",
                report.experiment,
                report.model,
                report.score_type,
                p.auc.mean,
                p.auc.std,
                p.per_seed.len()
            );
            finish(&cfg.out_dir);
        }
        Command::Viz {
            common,
            scores,
            checkpoints,
        } => {
            let mut cfg = setup(&common, "viz")?;
            cfg.checkpoint_dir = Some(checkpoints);
            cfg.seeds.truncate(1);
            require_checkpoints(&cfg)?;
            let records = read_scores_csv(&scores)?;
            let (report, units) = evaluate_records(&cfg, &records)?;
            let data = prepare_data(&cfg)?;
            let mut run = train_or_load(&cfg, &data.split.train, cfg.seeds[0], &cfg.out_dir)?;
            let (evals, _) = score_seed(&cfg, &mut run, &data.split.test)?;
            let files = emit_figures(&report, &units, &evals, &data.split.test, &cfg.out_dir, cfg.top_k)?;
            println!("{} files", files.len());
            finish(&cfg.out_dir);
        }
    }
    Ok(())
}

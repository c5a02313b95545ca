use crate::networks::{ArchConfig, ArchitectureTag};
use crate::data::PhantomConfig;
use crate::scoring::ScoreType;
use crate::training::TrainConfig;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Balanced frame-level test set.
    Exp1,
    /// One random frame per abnormal subject.
    Exp2,
    /// Subject-level: frame scores averaged per subject.
    Exp3,
    /// Every frame of every abnormal subject, evaluated per frame.
    Exp4,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Exp1 => "exp1",
            Experiment::Exp2 => "exp2",
            Experiment::Exp3 => "exp3",
            Experiment::Exp4 => "exp4",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Experiment::Exp1, Experiment::Exp2, Experiment::Exp3, Experiment::Exp4]
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

/// A paired DeLong comparison target: another score type of this run, or
/// a score type read from another run's `scores.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub score_type: ScoreType,
    pub scores: Option<PathBuf>,
}

impl FromStr for Comparison {
    type Err = Error;

    /// `"discr"` or `"baseline@runs/dcae/scores.csv"`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('@') {
            Some((t, path)) => Ok(Comparison {
                score_type: t.parse()?,
                scores: Some(PathBuf::from(path)),
            }),
            None => Ok(Comparison {
                score_type: s.parse()?,
                scores: None,
            }),
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.scores {
            Some(p) => write!(f, "{}@{}", self.score_type, p.display()),
            None => write!(f, "{}", self.score_type),
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

/// One experiment, read from a flat TOML file whose keys are exactly these
/// field names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ArchitectureTag,
    pub score_type: ScoreType,
    pub experiment: Experiment,
    pub seeds: Vec<u64>,

    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub recon_weight: f64,
    pub recon_norm: Option<u8>,
    pub vae_beta: f64,
    pub vae_gamma: f64,
    pub svdd_weight_decay: f64,
    pub gp_weight: f64,
    pub critic_iters: usize,
    pub feature_weight: f64,
    pub latent_dim: usize,
    pub base_channels: usize,

    /// Folder with `normal/` and `abnormal/` images; phantoms when absent.
    pub data_dir: Option<PathBuf>,
    /// Seed of the phantom pools and test-set sampling, shared by all
    /// training seeds.
    pub data_seed: u64,
    pub n_train: usize,
    pub n_test_normal: usize,
    pub n_test_abnormal: usize,
    pub n_subjects: usize,
    pub n_subject_frames: usize,
    pub speckle_strength: f64,
    pub geometry_jitter: f64,
    pub rotation_range: f64,
    pub left_chamber_shrink_range: (f64, f64),

    pub out_dir: PathBuf,
    /// Reuse `<checkpoint_dir>/<model>-seed<N>.ckpt` when present.
    pub checkpoint_dir: Option<PathBuf>,
    /// Skip training and scoring; evaluate this score table instead.
    pub scores_csv: Option<PathBuf>,
    pub compare: Vec<String>,
    pub eval_batch_size: usize,
    /// Overlay count for each of the highest and lowest scoring frames.
    pub top_k: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let a = ArchConfig::default();
        let p = PhantomConfig::default();
        ExperimentConfig {
            model: ArchitectureTag::AlphaGan,
            score_type: ScoreType::Attn,
            experiment: Experiment::Exp1,
            seeds: default_seeds(),
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            adam_betas: t.adam_betas,
            recon_weight: t.recon_weight,
            recon_norm: t.recon_norm,
            vae_beta: t.vae_beta,
            vae_gamma: t.vae_gamma,
            svdd_weight_decay: t.svdd_weight_decay,
            gp_weight: t.gp_weight,
            critic_iters: t.critic_iters,
            feature_weight: t.feature_weight,
            latent_dim: a.latent_dim,
            base_channels: a.base_channels,
            data_dir: None,
            data_seed: 0,
            n_train: 500,
            n_test_normal: 93,
            n_test_abnormal: 93,
            n_subjects: 53,
            n_subject_frames: 177,
            speckle_strength: p.speckle_strength,
            geometry_jitter: p.geometry_jitter,
            rotation_range: p.rotation_range,
            left_chamber_shrink_range: p.left_chamber_shrink_range,
            out_dir: PathBuf::from("runs"),
            checkpoint_dir: None,
            scores_csv: None,
            compare: Vec::new(),
            eval_batch_size: 32,
            top_k: 5,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if !self.score_type.valid_for(self.model) {
            return Err(Error::Config(format!(
                "score type {} is not available for {}",
                self.score_type, self.model
            )));
        }
        if self.eval_batch_size == 0 {
            return Err(Error::Config("eval_batch_size must be positive".into()));
        }
        for c in self.comparisons()? {
            if c.scores.is_none() && !c.score_type.valid_for(self.model) {
                return Err(Error::Config(format!("cannot compare against {} for {}", c.score_type, self.model)));
            }
        }
        self.train_config(self.seeds[0]).validate()?;
        self.arch().validate()?;
        self.phantom().validate()
    }

    pub fn comparisons(&self) -> Result<Vec<Comparison>> {
        self.compare.iter().map(|c| c.parse()).collect()
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            recon_weight: self.recon_weight,
            vae_beta: self.vae_beta,
            vae_gamma: self.vae_gamma,
            recon_norm: self.recon_norm,
            learning_rate: self.learning_rate,
            adam_betas: self.adam_betas,
            seed,
            svdd_weight_decay: self.svdd_weight_decay,
            gp_weight: self.gp_weight,
            critic_iters: self.critic_iters,
            feature_weight: self.feature_weight,
        }
    }

    pub fn arch(&self) -> ArchConfig {
        ArchConfig {
            latent_dim: self.latent_dim,
            base_channels: self.base_channels,
        }
    }

    pub fn phantom(&self) -> PhantomConfig {
        PhantomConfig {
            speckle_strength: self.speckle_strength,
            geometry_jitter: self.geometry_jitter,
            rotation_range: self.rotation_range,
            left_chamber_shrink_range: self.left_chamber_shrink_range,
            ..PhantomConfig::default()
        }
    }

    pub fn checkpoint_name(&self, seed: u64) -> String {
        format!("{}-seed{seed}.ckpt", self.model)
    }
}

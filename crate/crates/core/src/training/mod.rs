//! Training loops for the alpha-GAN (joint encoder/generator step, a second
//! generator step, discriminator and latent-discriminator steps) and for
//! every baseline.

mod alpha;
mod baselines;
pub mod losses;
mod vae;

pub use alpha::{
    discriminator_grads, generator_grads, joint_eg_grads, latent_discriminator_grads,
    AlphaGanTrainer, EgLosses, GenOutputs,
};
pub use baselines::{
    dcae_grads, fanogan_critic_grads, fanogan_encoder_grads, fanogan_generator_grads,
    gradient_penalty_value, svdd_center, svdd_grads, train_dcae, train_deep_svdd, train_f_anogan,
    SVDD_CENTER_EPS,
};
pub use losses::kl_analytic;
pub use vae::{train_vae_gan, vae_grads, VaeLosses};

use crate::data::Frame;
use crate::networks::{images_to_tensor, ArchConfig, ArchitectureTag, NetworkBundle};
use crate::nn::{Mode, Tensor};
use crate::{Error, Float, Result};
use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Weight of the reconstruction norm in the encoder and generator losses.
    pub recon_weight: f64,
    pub vae_beta: f64,
    pub vae_gamma: f64,
    /// 1 or 2; `None` selects the model default (1 for alpha-GAN, 2 for VAE-GAN).
    pub recon_norm: Option<u8>,
    pub learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub seed: u64,
    pub svdd_weight_decay: f64,
    pub gp_weight: f64,
    pub critic_iters: usize,
    pub feature_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            batch_size: 64,
            recon_weight: 25.0,
            vae_beta: 10.0,
            vae_gamma: 5.0,
            recon_norm: None,
            learning_rate: 2e-4,
            adam_betas: (0.5, 0.999),
            seed: 0,
            svdd_weight_decay: 1e-6,
            gp_weight: 10.0,
            critic_iters: 5,
            feature_weight: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("recon_weight", self.recon_weight),
            ("vae_beta", self.vae_beta),
            ("vae_gamma", self.vae_gamma),
            ("learning_rate", self.learning_rate),
        ];
        if let Some((k, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("{k} must be positive, got {v}")));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.critic_iters == 0 {
            return Err(Error::Config("epochs, batch_size and critic_iters must be at least 1".into()));
        }
        if !matches!(self.recon_norm, None | Some(1) | Some(2)) {
            return Err(Error::Config("recon_norm must be 1 or 2".into()));
        }
        let (b1, b2) = self.adam_betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return Err(Error::Config("adam_betas must lie in [0, 1)".into()));
        }
        if !(self.svdd_weight_decay >= 0.0 && self.gp_weight >= 0.0 && self.feature_weight >= 0.0) {
            return Err(Error::Config("weights must be non-negative".into()));
        }
        Ok(())
    }

    pub(crate) fn adam(&self) -> crate::nn::Adam {
        crate::nn::Adam::new(self.learning_rate, self.adam_betas)
    }
}

/// Per-iteration values of every loss (and monitored quantity) of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub names: Vec<String>,
    /// One row per iteration, aligned with `names`.
    pub rows: Vec<Vec<f64>>,
}

impl TrainHistory {
    /// Appends one iteration. Names first seen later are added as new
    /// columns; absent values are stored as NaN. Aborts on the first
    /// non-finite value supplied.
    pub fn push(&mut self, values: &[(&str, f64)]) -> Result<()> {
        let iteration = self.rows.len();
        if let Some((name, _)) = values.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteLoss {
                loss: name.to_string(),
                iteration,
            });
        }
        for (n, _) in values {
            if !self.names.iter().any(|k| k == n) {
                self.names.push(n.to_string());
                for r in &mut self.rows {
                    r.push(f64::NAN);
                }
            }
        }
        let row = self
            .names
            .iter()
            .map(|n| values.iter().find(|(k, _)| k == n).map_or(f64::NAN, |v| v.1))
            .collect();
        self.rows.push(row);
        Ok(())
    }

    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    pub fn series(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Long format: `iteration,loss,value`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["iteration", "loss", "value"])?;
        for (i, row) in self.rows.iter().enumerate() {
            for (n, v) in self.names.iter().zip(row).filter(|(_, v)| !v.is_nan()) {
                w.write_record([i.to_string(), n.clone(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Shuffled mini-batches over a fixed image tensor. A trailing batch with
/// fewer than two images is dropped (batch-norm needs two).
pub(crate) struct Batches<F> {
    data: Tensor<F>,
    batch_size: usize,
    rng: ChaCha8Rng,
}

impl<F: Float> Batches<F> {
    pub fn new(frames: &[Frame], batch_size: usize, seed: u64) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::Invalid("training needs at least two frames".into()));
        }
        if let Some(f) = frames.iter().find(|f| f.label().is_abnormal()) {
            return Err(Error::Invalid(format!("abnormal frame {} in training data", f.frame_ref())));
        }
        let views: Vec<_> = frames.iter().map(|f| f.pixels().view()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(10);
        Ok(Batches {
            data: images_to_tensor(&views)?,
            batch_size: batch_size.min(frames.len()),
            rng,
        })
    }

    pub fn data(&self) -> &Tensor<F> {
        &self.data
    }

    pub fn epoch(&mut self) -> Vec<Tensor<F>> {
        let n = self.data.dim().0;
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut self.rng);
        idx.chunks(self.batch_size)
            .filter(|c| c.len() >= 2)
            .map(|c| self.data.select(Axis(0), c))
            .collect()
    }
}

/// Standard-normal tensor of shape `(n, d, 1, 1)`.
pub(crate) fn prior<F: Float, R: rand::Rng>(n: usize, d: usize, rng: &mut R) -> Tensor<F> {
    let v = crate::nn::init::standard_normal_vec::<F, R>(n * d, rng);
    Tensor::from_shape_vec((n, d, 1, 1), v).expect("length")
}

/// Same arithmetic as `mode`, without touching running statistics.
pub(crate) fn frozen(mode: Mode) -> Mode {
    Mode {
        train: mode.train,
        update_state: false,
    }
}

pub(crate) fn noise_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(11);
    rng
}

/// Mean of a history series over each epoch, for progress logging.
pub(crate) fn log_epoch(model: &str, epoch: usize, epochs: usize, values: &BTreeMap<&str, f64>) {
    let parts: Vec<String> = values.iter().map(|(k, v)| format!("{k}={v:.4}")).collect();
    log::info!("{model} epoch {}/{epochs}: {}", epoch + 1, parts.join(" "));
}

pub(crate) struct EpochMeans<'a> {
    sums: BTreeMap<&'a str, (f64, usize)>,
}

impl<'a> EpochMeans<'a> {
    pub fn new() -> Self {
        EpochMeans { sums: BTreeMap::new() }
    }

    pub fn add(&mut self, values: &[(&'a str, f64)]) {
        for &(k, v) in values {
            let e = self.sums.entry(k).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }

    pub fn finish(&mut self) -> BTreeMap<&'a str, f64> {
        let out = self.sums.iter().map(|(k, (s, n))| (*k, s / *n as f64)).collect();
        self.sums.clear();
        out
    }
}

/// Builds the networks for `tag` from `cfg.seed` and trains them on
/// `frames` (all normal).
pub fn train<F: Float>(
    tag: ArchitectureTag,
    arch: ArchConfig,
    frames: &[Frame],
    cfg: &TrainConfig,
) -> Result<(NetworkBundle<F>, TrainHistory)> {
    cfg.validate()?;
    match tag {
        ArchitectureTag::AlphaGan => alpha::train_alpha_gan(arch, frames, cfg),
        ArchitectureTag::VaeGan => train_vae_gan(arch, frames, cfg),
        ArchitectureTag::Dcae => train_dcae(arch, frames, cfg),
        ArchitectureTag::DeepSvdd => train_deep_svdd(arch, frames, cfg),
        ArchitectureTag::FAnoGan => train_f_anogan(arch, frames, cfg),
    }
}

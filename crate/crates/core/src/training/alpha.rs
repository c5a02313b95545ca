use super::losses::{neg_log, neg_log1m, recon_l1, recon_l2};
use super::{frozen, log_epoch, noise_rng, prior, Batches, EpochMeans, TrainConfig, TrainHistory};
use crate::data::Frame;
use crate::networks::{ArchConfig, AlphaGan, Model, NetworkBundle};
use crate::nn::{sigmoid, zero_grad, Adam, Mode, Module, Tensor};
use crate::{Float, Result};
use rand::Rng;

/// Reconstruction term selected by `recon_norm`.
pub(crate) fn recon<F: Float>(norm: u8, x: &Tensor<F>, xhat: &Tensor<F>, w: f64) -> (f64, Tensor<F>) {
    if norm == 2 {
        recon_l2(x, xhat, w)
    } else {
        recon_l1(x, xhat, w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EgLosses {
    pub encoder: f64,
    pub generator: f64,
}

impl EgLosses {
    pub fn combined(&self) -> f64 {
        self.encoder + self.generator
    }
}

/// Gradients of the joint objective `L_E + L_G` on the encoder and
/// generator. `L_E = lambda |x - xhat| - log LD(zhat)`,
/// `L_G = lambda |x - xhat| - log D(xhat) - log D(G(z))`. Discriminator
/// gradients produced on the way are cleared; only the input path flows.
pub fn joint_eg_grads<F: Float>(
    m: &mut AlphaGan<F>,
    x: &Tensor<F>,
    z: &Tensor<F>,
    lambda: f64,
    norm: u8,
    mode: Mode,
) -> EgLosses {
    let (zhat, enc_cache) = m.encoder.forward(x, mode);
    let (xhat, rec_cache) = m.generator.forward(&zhat, mode);
    let (xtilde, prior_cache) = m.generator.forward(z, frozen(mode));
    let (ld_hat, ld_cache) = m.latent_discriminator.forward(&zhat, frozen(mode));
    let (d_hat, d_hat_cache) = m.discriminator.forward(&xhat, frozen(mode));
    let (d_tilde, d_tilde_cache) = m.discriminator.forward(&xtilde, frozen(mode));

    let (rec, g_rec) = recon(norm, x, &xhat, lambda);
    let (adv_e, g_ld) = neg_log(&ld_hat, 1.0);
    let (adv_hat, g_dhat) = neg_log(&d_hat, 1.0);
    let (adv_tilde, g_dtilde) = neg_log(&d_tilde, 1.0);

    // The reconstruction term appears in both losses.
    let mut g_xhat = &g_rec * F::of(2.0);
    g_xhat += &m.discriminator.backward(&d_hat_cache, &g_dhat);
    let g_xtilde = m.discriminator.backward(&d_tilde_cache, &g_dtilde);
    let mut g_zhat = m.generator.backward(&rec_cache, &g_xhat);
    m.generator.backward(&prior_cache, &g_xtilde);
    g_zhat += &m.latent_discriminator.backward(&ld_cache, &g_ld);
    m.encoder.backward(&enc_cache, &g_zhat);
    zero_grad(&mut m.discriminator);
    zero_grad(&mut m.latent_discriminator);
    EgLosses {
        encoder: rec + adv_e,
        generator: rec + adv_hat + adv_tilde,
    }
}

/// Samples produced by a generator pass, reused (detached) by the
/// discriminator steps.
pub struct GenOutputs<F> {
    pub zhat: Tensor<F>,
    pub xhat: Tensor<F>,
    pub xtilde: Tensor<F>,
}

/// Generator-only gradients of `L_G` with fresh forward passes; the encoder
/// output is treated as a constant.
pub fn generator_grads<F: Float>(
    m: &mut AlphaGan<F>,
    x: &Tensor<F>,
    z: &Tensor<F>,
    lambda: f64,
    norm: u8,
    mode: Mode,
) -> (f64, GenOutputs<F>) {
    let (zhat, _) = m.encoder.forward(x, mode);
    let (xhat, rec_cache) = m.generator.forward(&zhat, mode);
    let (xtilde, prior_cache) = m.generator.forward(z, frozen(mode));
    let (d_hat, d_hat_cache) = m.discriminator.forward(&xhat, frozen(mode));
    let (d_tilde, d_tilde_cache) = m.discriminator.forward(&xtilde, frozen(mode));
    let (rec, g_rec) = recon(norm, x, &xhat, lambda);
    let (adv_hat, g_dhat) = neg_log(&d_hat, 1.0);
    let (adv_tilde, g_dtilde) = neg_log(&d_tilde, 1.0);
    let g_xhat = g_rec + m.discriminator.backward(&d_hat_cache, &g_dhat);
    let g_xtilde = m.discriminator.backward(&d_tilde_cache, &g_dtilde);
    m.generator.backward(&rec_cache, &g_xhat);
    m.generator.backward(&prior_cache, &g_xtilde);
    zero_grad(&mut m.discriminator);
    (rec + adv_hat + adv_tilde, GenOutputs { zhat, xhat, xtilde })
}

/// `L_D = -2 log D(x) - log(1 - D(xhat)) - log(1 - D(xtilde))` on detached
/// samples. Running statistics are updated from the real batch only.
/// Returns the loss and every discriminator probability.
pub fn discriminator_grads<F: Float>(
    m: &mut AlphaGan<F>,
    x: &Tensor<F>,
    xhat: &Tensor<F>,
    xtilde: &Tensor<F>,
    mode: Mode,
) -> (f64, Vec<f64>) {
    let (d_real, c_real) = m.discriminator.forward(x, mode);
    let (d_hat, c_hat) = m.discriminator.forward(xhat, frozen(mode));
    let (d_tilde, c_tilde) = m.discriminator.forward(xtilde, frozen(mode));
    let (l_real, g_real) = neg_log(&d_real, 2.0);
    let (l_hat, g_hat) = neg_log1m(&d_hat, 1.0);
    let (l_tilde, g_tilde) = neg_log1m(&d_tilde, 1.0);
    m.discriminator.backward(&c_real, &g_real);
    m.discriminator.backward(&c_hat, &g_hat);
    m.discriminator.backward(&c_tilde, &g_tilde);
    let probs = [&d_real, &d_hat, &d_tilde]
        .iter()
        .flat_map(|t| t.iter().map(|l| sigmoid(l.as_f64())))
        .collect();
    (l_real + l_hat + l_tilde, probs)
}

/// `L_LD = -log(1 - LD(zhat)) - log LD(z)` with `zhat` detached.
pub fn latent_discriminator_grads<F: Float>(m: &mut AlphaGan<F>, zhat: &Tensor<F>, z: &Tensor<F>, mode: Mode) -> f64 {
    let (l_hat, c_hat) = m.latent_discriminator.forward(zhat, mode);
    let (l_z, c_z) = m.latent_discriminator.forward(z, mode);
    let (a, g_hat) = neg_log1m(&l_hat, 1.0);
    let (b, g_z) = neg_log(&l_z, 1.0);
    m.latent_discriminator.backward(&c_hat, &g_hat);
    m.latent_discriminator.backward(&c_z, &g_z);
    a + b
}

/// Optimiser state of one alpha-GAN run. The step counters record the
/// update cadence (two generator steps per batch, one for the others).
pub struct AlphaGanTrainer {
    pub opt_e: Adam,
    pub opt_g: Adam,
    pub opt_d: Adam,
    pub opt_ld: Adam,
    pub lambda: f64,
    pub norm: u8,
}

impl AlphaGanTrainer {
    pub fn new(cfg: &TrainConfig) -> Self {
        AlphaGanTrainer {
            opt_e: cfg.adam(),
            opt_g: cfg.adam(),
            opt_d: cfg.adam(),
            opt_ld: cfg.adam(),
            lambda: cfg.recon_weight,
            norm: cfg.recon_norm.unwrap_or(1),
        }
    }

    /// One batch: joint E+G step, second G step, D step, LD step.
    pub fn step<F: Float, R: Rng>(&mut self, m: &mut AlphaGan<F>, x: &Tensor<F>, rng: &mut R) -> Vec<(&'static str, f64)> {
        let n = x.dim().0;
        let d = m.latent_dim;
        let mode = Mode::TRAIN;

        let z = prior::<F, _>(n, d, rng);
        zero_grad(&mut m.encoder);
        zero_grad(&mut m.generator);
        let eg = joint_eg_grads(m, x, &z, self.lambda, self.norm, mode);
        self.opt_e.step(&mut m.encoder);
        self.opt_g.step(&mut m.generator);

        let z = prior::<F, _>(n, d, rng);
        zero_grad(&mut m.generator);
        let (l_g2, out) = generator_grads(m, x, &z, self.lambda, self.norm, mode);
        self.opt_g.step(&mut m.generator);

        zero_grad(&mut m.discriminator);
        let (l_d, probs) = discriminator_grads(m, x, &out.xhat, &out.xtilde, mode);
        self.opt_d.step(&mut m.discriminator);

        zero_grad(&mut m.latent_discriminator);
        let l_ld = latent_discriminator_grads(m, &out.zhat, &z, mode);
        self.opt_ld.step(&mut m.latent_discriminator);

        let d_min = probs.iter().copied().fold(f64::INFINITY, f64::min);
        let d_max = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        vec![
            ("L_E", eg.encoder),
            ("L_G", eg.generator),
            ("L_EG", eg.combined()),
            ("L_G2", l_g2),
            ("L_D", l_d),
            ("L_LD", l_ld),
            ("D_min", d_min),
            ("D_max", d_max),
        ]
    }
}

pub(crate) fn train_alpha_gan<F: Float>(
    arch: ArchConfig,
    frames: &[Frame],
    cfg: &TrainConfig,
) -> Result<(NetworkBundle<F>, TrainHistory)> {
    let mut bundle = NetworkBundle::<F>::build(crate::networks::ArchitectureTag::AlphaGan, arch, cfg.seed)?;
    let mut history = TrainHistory::default();
    {
        let Model::AlphaGan(m) = &mut bundle.model else { unreachable!() };
        let mut batches = Batches::<F>::new(frames, cfg.batch_size, cfg.seed)?;
        let mut rng = noise_rng(cfg.seed);
        let mut trainer = AlphaGanTrainer::new(cfg);
        let mut means = EpochMeans::new();
        for epoch in 0..cfg.epochs {
            for x in batches.epoch() {
                let values = trainer.step(m, &x, &mut rng);
                history.push(&values)?;
                means.add(&values);
            }
            log_epoch("alpha_gan", epoch, cfg.epochs, &means.finish());
        }
    }
    Ok((bundle, history))
}


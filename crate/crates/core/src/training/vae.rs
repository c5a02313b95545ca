use super::alpha::recon;
use super::losses::{kl_term, neg_log, neg_log1m};
use super::{frozen, log_epoch, noise_rng, prior, Batches, EpochMeans, TrainConfig, TrainHistory};
use crate::data::Frame;
use crate::networks::{join_moment_grads, reparameterize, split_moments, ArchConfig, ArchitectureTag, Model, NetworkBundle, VaeGan};
use crate::nn::{zero_grad, Mode, Module, Tensor};
use crate::{Float, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VaeLosses {
    /// `beta |x - xhat|^2 + KL`.
    pub encoder: f64,
    /// `gamma |x - xhat|^2 - log D(xhat) - log D(G(z))`.
    pub generator: f64,
    pub kl: f64,
    pub recon: f64,
}

/// Encoder and generator gradients from one shared forward pass. The
/// encoder receives only the gradient of its own loss, likewise the
/// generator. Returns the losses and the detached fakes for the
/// discriminator step.
#[allow(clippy::too_many_arguments)]
pub fn vae_grads<F: Float>(
    m: &mut VaeGan<F>,
    x: &Tensor<F>,
    eps: &Tensor<F>,
    z: &Tensor<F>,
    beta: f64,
    gamma: f64,
    norm: u8,
    mode: Mode,
) -> Result<(VaeLosses, Tensor<F>, Tensor<F>)> {
    let (raw, enc_cache) = m.encoder.forward(x, mode);
    let (mean, sd) = split_moments(&raw);
    let zhat = reparameterize(&mean, &sd, eps);
    let (xhat, rec_cache) = m.generator.forward(&zhat, mode);
    let (xtilde, prior_cache) = m.generator.forward(z, frozen(mode));
    let (d_hat, c_hat) = m.discriminator.forward(&xhat, frozen(mode));
    let (d_tilde, c_tilde) = m.discriminator.forward(&xtilde, frozen(mode));

    let (rec_unit, g_rec_unit) = recon(norm, x, &xhat, 1.0);
    let (kl, g_m, g_s) = kl_term(&mean, &sd)?;
    let (adv_hat, g_dhat) = neg_log(&d_hat, 1.0);
    let (adv_tilde, g_dtilde) = neg_log(&d_tilde, 1.0);

    // Encoder: beta * reconstruction through the generator, plus KL.
    let g_zhat = m.generator.backward(&rec_cache, &(&g_rec_unit * F::of(beta)));
    zero_grad(&mut m.generator);
    let g_mean = &g_zhat + &g_m;
    let g_sd = &(&g_zhat * eps) + &g_s;
    m.encoder.backward(&enc_cache, &join_moment_grads(&g_mean, &g_sd, &sd));

    // Generator: gamma * reconstruction plus both adversarial terms.
    let g_xhat = &g_rec_unit * F::of(gamma) + m.discriminator.backward(&c_hat, &g_dhat);
    let g_xtilde = m.discriminator.backward(&c_tilde, &g_dtilde);
    m.generator.backward(&rec_cache, &g_xhat);
    m.generator.backward(&prior_cache, &g_xtilde);
    zero_grad(&mut m.discriminator);

    Ok((
        VaeLosses {
            encoder: beta * rec_unit + kl,
            generator: gamma * rec_unit + adv_hat + adv_tilde,
            kl,
            recon: rec_unit,
        },
        xhat,
        xtilde,
    ))
}

pub fn train_vae_gan<F: Float>(
    arch: ArchConfig,
    frames: &[Frame],
    cfg: &TrainConfig,
) -> Result<(NetworkBundle<F>, TrainHistory)> {
    let mut bundle = NetworkBundle::<F>::build(ArchitectureTag::VaeGan, arch, cfg.seed)?;
    let mut history = TrainHistory::default();
    let Model::VaeGan(m) = &mut bundle.model else { unreachable!() };
    let mut batches = Batches::<F>::new(frames, cfg.batch_size, cfg.seed)?;
    let mut rng = noise_rng(cfg.seed);
    let (mut opt_e, mut opt_g, mut opt_d) = (cfg.adam(), cfg.adam(), cfg.adam());
    let norm = cfg.recon_norm.unwrap_or(2);
    let mut means = EpochMeans::new();
    for epoch in 0..cfg.epochs {
        for x in batches.epoch() {
            let n = x.dim().0;
            let eps = prior::<F, _>(n, m.latent_dim, &mut rng);
            let z = prior::<F, _>(n, m.latent_dim, &mut rng);
            zero_grad(&mut m.encoder);
            zero_grad(&mut m.generator);
            let (l, xhat, xtilde) = vae_grads(m, &x, &eps, &z, cfg.vae_beta, cfg.vae_gamma, norm, Mode::TRAIN)?;
            opt_e.step(&mut m.encoder);
            opt_g.step(&mut m.generator);

            zero_grad(&mut m.discriminator);
            let l_d = vae_discriminator_grads(m, &x, &xhat, &xtilde, Mode::TRAIN);
            opt_d.step(&mut m.discriminator);

            let values = [
                ("L_E", l.encoder),
                ("L_G", l.generator),
                ("L_D", l_d),
                ("KL", l.kl),
            ];
            history.push(&values)?;
            means.add(&values);
        }
        log_epoch("vae_gan", epoch, cfg.epochs, &means.finish());
    }
    Ok((bundle, history))
}

/// Same objective as the alpha-GAN discriminator step.
pub(crate) fn vae_discriminator_grads<F: Float>(
    m: &mut VaeGan<F>,
    x: &Tensor<F>,
    xhat: &Tensor<F>,
    xtilde: &Tensor<F>,
    mode: Mode,
) -> f64 {
    let (d_real, c_real) = m.discriminator.forward(x, mode);
    let (d_hat, c_hat) = m.discriminator.forward(xhat, frozen(mode));
    let (d_tilde, c_tilde) = m.discriminator.forward(xtilde, frozen(mode));
    let (a, g_a) = neg_log(&d_real, 2.0);
    let (b, g_b) = neg_log1m(&d_hat, 1.0);
    let (c, g_c) = neg_log1m(&d_tilde, 1.0);
    m.discriminator.backward(&c_real, &g_a);
    m.discriminator.backward(&c_hat, &g_b);
    m.discriminator.backward(&c_tilde, &g_c);
    a + b + c
}

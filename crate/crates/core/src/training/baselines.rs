use super::losses::{mean_output, mse, recon_l2, sum_sq_diff, svdd_distance, weight_decay};
use super::{frozen, log_epoch, noise_rng, prior, Batches, EpochMeans, TrainConfig, TrainHistory};
use crate::data::Frame;
use crate::networks::{stream_rng, svdd_encoder, ArchConfig, ArchitectureTag, Dcae, DeepSvdd, FAnoGan, Model, NetworkBundle};
use crate::nn::{zero_grad, Mode, Module, Sequential, Tensor};
use crate::{Error, Float, Result};
use ndarray::{ArrayD, Axis, IxDyn, Zip};
use rand::Rng;

/// Centers closer than this to the origin trigger re-initialisation.
pub const SVDD_CENTER_EPS: f64 = 1e-3;
const SVDD_MAX_RESTARTS: u64 = 5;
/// Offset used for the finite-difference Hessian-vector product of the
/// gradient penalty.
pub const GP_FD_STEP: f64 = 1e-2;

/// Mean-squared reconstruction error through encoder and decoder.
pub fn dcae_grads<F: Float>(m: &mut Dcae<F>, x: &Tensor<F>, mode: Mode) -> f64 {
    let (z, ce) = m.encoder.forward(x, mode);
    let (y, cd) = m.decoder.forward(&z, mode);
    let (loss, g) = mse(x, &y);
    let gz = m.decoder.backward(&cd, &g);
    m.encoder.backward(&ce, &gz);
    loss
}

pub fn train_dcae<F: Float>(
    arch: ArchConfig,
    frames: &[Frame],
    cfg: &TrainConfig,
) -> Result<(NetworkBundle<F>, TrainHistory)> {
    let mut bundle = NetworkBundle::<F>::build(ArchitectureTag::Dcae, arch, cfg.seed)?;
    let mut history = TrainHistory::default();
    let Model::Dcae(m) = &mut bundle.model else { unreachable!() };
    let mut batches = Batches::<F>::new(frames, cfg.batch_size, cfg.seed)?;
    let (mut opt_e, mut opt_d) = (cfg.adam(), cfg.adam());
    let mut means = EpochMeans::new();
    for epoch in 0..cfg.epochs {
        for x in batches.epoch() {
            zero_grad(&mut m.encoder);
            zero_grad(&mut m.decoder);
            let loss = dcae_grads(m, &x, Mode::TRAIN);
            opt_e.step(&mut m.encoder);
            opt_d.step(&mut m.decoder);
            history.push(&[("L_MSE", loss)])?;
            means.add(&[("L_MSE", loss)]);
        }
        log_epoch("dcae", epoch, cfg.epochs, &means.finish());
    }
    Ok((bundle, history))
}

/// Mean network output over `data`, evaluated batch by batch with
/// training-mode arithmetic and no state change.
pub fn svdd_center<F: Float>(net: &mut Sequential<F>, data: &Tensor<F>, batch_size: usize) -> Vec<F> {
    let n = data.dim().0;
    let mut sum: Option<Vec<f64>> = None;
    for start in (0..n).step_by(batch_size.max(2)) {
        let idx: Vec<usize> = (start..(start + batch_size.max(2)).min(n)).collect();
        let (out, _) = net.forward(&data.select(Axis(0), &idx), Mode::PROBE);
        let acc = sum.get_or_insert_with(|| vec![0.0; out.dim().1]);
        for row in out.outer_iter() {
            acc.iter_mut().zip(row.iter()).for_each(|(a, v)| *a += v.as_f64());
        }
    }
    sum.unwrap_or_default().into_iter().map(|s| F::of(s / n as f64)).collect()
}

/// `mean |f(x) - o|^2 + lambda / 2 * sum theta^2`. Returns the total and the
/// distance term.
pub fn svdd_grads<F: Float>(m: &mut DeepSvdd<F>, x: &Tensor<F>, lambda: f64, mode: Mode) -> (f64, f64) {
    let (f, cache) = m.net.forward(x, mode);
    let center: Vec<F> = m.center.iter().copied().collect();
    let (dist, g) = svdd_distance(&f, &center);
    m.net.backward(&cache, &g);
    let decay = weight_decay(&mut m.net, lambda);
    (dist + decay, dist)
}

pub fn train_deep_svdd<F: Float>(
    arch: ArchConfig,
    frames: &[Frame],
    cfg: &TrainConfig,
) -> Result<(NetworkBundle<F>, TrainHistory)> {
    let mut bundle = NetworkBundle::<F>::build(ArchitectureTag::DeepSvdd, arch, cfg.seed)?;
    let mut history = TrainHistory::default();
    let Model::DeepSvdd(m) = &mut bundle.model else { unreachable!() };
    let mut batches = Batches::<F>::new(frames, cfg.batch_size, cfg.seed)?;
    let mut restarts = 0;
    let center = loop {
        let c = svdd_center(&mut m.net, batches.data(), cfg.batch_size);
        let norm = c.iter().map(|v| v.as_f64().powi(2)).sum::<f64>().sqrt();
        if norm >= SVDD_CENTER_EPS {
            break c;
        }
        restarts += 1;
        if restarts > SVDD_MAX_RESTARTS {
            return Err(Error::Invalid("Deep SVDD center collapsed to the origin repeatedly".into()));
        }
        log::warn!("Deep SVDD center norm {norm:.2e} below {SVDD_CENTER_EPS}; re-initialising");
        m.net = svdd_encoder(arch.base_channels, arch.latent_dim, &mut stream_rng(cfg.seed, 100 + restarts));
    };
    m.center = ArrayD::from_shape_vec(IxDyn(&[center.len()]), center).expect("length");
    let mut opt = cfg.adam();
    let mut means = EpochMeans::new();
    for epoch in 0..cfg.epochs {
        for x in batches.epoch() {
            zero_grad(&mut m.net);
            let (loss, dist) = svdd_grads(m, &x, cfg.svdd_weight_decay, Mode::TRAIN);
            opt.step(&mut m.net);
            let values = [("L_SVDD", loss), ("distance", dist)];
            history.push(&values)?;
            means.add(&values);
        }
        log_epoch("deep_svdd", epoch, cfg.epochs, &means.finish());
    }
    Ok((bundle, history))
}

/// Input gradients of the critic output at `x`, one row per sample. Leaves
/// the critic's parameter gradients cleared.
fn critic_input_grads<F: Float>(m: &mut FAnoGan<F>, x: &Tensor<F>) -> (Tensor<F>, Vec<f64>) {
    let (out, cache) = m.critic.forward(x, Mode::PROBE);
    let g = m.critic.backward(&cache, &Tensor::from_elem(out.dim(), F::one()));
    zero_grad(&mut m.critic);
    let norms = g
        .outer_iter()
        .map(|r| r.iter().map(|v| v.as_f64().powi(2)).sum::<f64>().sqrt())
        .collect();
    (g, norms)
}

/// `mean_i (|grad_x D(x_i)| - 1)^2`.
pub fn gradient_penalty_value<F: Float>(m: &mut FAnoGan<F>, x: &Tensor<F>) -> f64 {
    let (_, norms) = critic_input_grads(m, x);
    norms.iter().map(|n| (n - 1.0).powi(2)).sum::<f64>() / norms.len().max(1) as f64
}

pub(crate) fn interpolate<F: Float>(x: &Tensor<F>, xtilde: &Tensor<F>, t: &[f64]) -> Tensor<F> {
    let mut out = x.clone();
    for ((mut o, f), &ti) in out.outer_iter_mut().zip(xtilde.outer_iter()).zip(t) {
        let ti = F::of(ti);
        Zip::from(&mut o).and(&f).for_each(|a, &b| *a = ti * *a + (F::one() - ti) * b);
    }
    out
}

fn scale_rows<F: Float>(t: &Tensor<F>, w: &[f64]) -> Tensor<F> {
    let mut out = t.clone();
    for (mut r, &wi) in out.outer_iter_mut().zip(w) {
        r.mapv_inplace(|v| v * F::of(wi));
    }
    out
}

/// WGAN-GP critic objective `mean D(xtilde) - mean D(x) + w_gp * GP` on the
/// interpolates `t x + (1 - t) xtilde`. Overwrites the critic's gradients.
///
/// The penalty's parameter gradient is `sum_i w_i c_i . d(grad_x D)/d theta`
/// with `c_i` the unit input-gradient direction; it is evaluated as the
/// central difference of parameter gradients at `x_i +- h c_i`, which needs
/// no second-order backward pass.
pub fn fanogan_critic_grads<F: Float>(
    m: &mut FAnoGan<F>,
    x: &Tensor<F>,
    xtilde: &Tensor<F>,
    t: &[f64],
    gp_weight: f64,
    fd_step: f64,
) -> (f64, f64, f64) {
    let b = x.dim().0 as f64;
    let xi = interpolate(x, xtilde, t);
    let (g, norms) = critic_input_grads(m, &xi);
    let gp = norms.iter().map(|n| (n - 1.0).powi(2)).sum::<f64>() / b;
    if gp_weight > 0.0 {
        let dir = scale_rows(&g, &norms.iter().map(|&n| if n > 0.0 { 1.0 / n } else { 0.0 }).collect::<Vec<_>>());
        let w: Vec<f64> = norms.iter().map(|n| gp_weight * 2.0 * (n - 1.0) / b / (2.0 * fd_step)).collect();
        let step = dir.mapv(|v| v * F::of(fd_step));
        for (sign, probe) in [(1.0, &xi + &step), (-1.0, &xi - &step)] {
            let (out, cache) = m.critic.forward(&probe, Mode::PROBE);
            let up = Tensor::from_shape_fn(out.dim(), |(i, _, _, _)| F::of(sign * w[i]));
            m.critic.backward(&cache, &up);
        }
    }
    let (d_real, c_real) = m.critic.forward(x, Mode::PROBE);
    let (d_fake, c_fake) = m.critic.forward(xtilde, Mode::PROBE);
    let (real, g_real) = mean_output(&d_real, -1.0);
    let (fake, g_fake) = mean_output(&d_fake, 1.0);
    m.critic.backward(&c_real, &g_real);
    m.critic.backward(&c_fake, &g_fake);
    let w_dist = -(real + fake);
    (fake + real + gp_weight * gp, w_dist, gp)
}

/// `-mean D(G(z))`; critic gradients are cleared afterwards.
pub fn fanogan_generator_grads<F: Float>(m: &mut FAnoGan<F>, z: &Tensor<F>, mode: Mode) -> f64 {
    let (xt, cg) = m.generator.forward(z, mode);
    let (d, cd) = m.critic.forward(&xt, Mode::PROBE);
    let (loss, g) = mean_output(&d, -1.0);
    let gx = m.critic.backward(&cd, &g);
    m.generator.backward(&cg, &gx);
    zero_grad(&mut m.critic);
    loss
}

/// izi_f objective `|x - G(E(x))|^2 + k |D_H(x) - D_H(G(E(x)))|^2` with the
/// generator and critic frozen (evaluation mode, gradients cleared).
pub fn fanogan_encoder_grads<F: Float>(m: &mut FAnoGan<F>, x: &Tensor<F>, feature_weight: f64, mode: Mode) -> f64 {
    let (z, ce) = m.encoder.forward(x, mode);
    let (xhat, cg) = m.generator.forward(&z, Mode::EVAL);
    let (h_x, _) = m.critic.forward_features(x, Mode::EVAL);
    let (h_hat, ch) = m.critic.forward_features(&xhat, Mode::EVAL);
    let (l_img, g_img) = recon_l2(x, &xhat, 1.0);
    let (l_feat, g_feat) = sum_sq_diff(&h_x, &h_hat, feature_weight);
    let g_xhat = g_img + m.critic.backward_features(&ch, &g_feat);
    let gz = m.generator.backward(&cg, &g_xhat);
    m.encoder.backward(&ce, &gz);
    zero_grad(&mut m.generator);
    zero_grad(&mut m.critic);
    l_img + l_feat
}

pub fn train_f_anogan<F: Float>(
    arch: ArchConfig,
    frames: &[Frame],
    cfg: &TrainConfig,
) -> Result<(NetworkBundle<F>, TrainHistory)> {
    let mut bundle = NetworkBundle::<F>::build(ArchitectureTag::FAnoGan, arch, cfg.seed)?;
    let mut history = TrainHistory::default();
    let Model::FAnoGan(m) = &mut bundle.model else { unreachable!() };
    let mut batches = Batches::<F>::new(frames, cfg.batch_size, cfg.seed)?;
    let mut rng = noise_rng(cfg.seed);
    let d = arch.latent_dim;
    let (mut opt_c, mut opt_g, mut opt_e) = (cfg.adam(), cfg.adam(), cfg.adam());
    let mut means = EpochMeans::new();
    let mut critic_steps = 0usize;
    for epoch in 0..cfg.epochs {
        for x in batches.epoch() {
            let n = x.dim().0;
            let z = prior::<F, _>(n, d, &mut rng);
            let (xtilde, _) = m.generator.forward(&z, frozen(Mode::TRAIN));
            let t: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let (l_c, w_dist, gp) = fanogan_critic_grads(m, &x, &xtilde, &t, cfg.gp_weight, GP_FD_STEP);
            opt_c.step(&mut m.critic);
            critic_steps += 1;
            let mut values = vec![("L_C", l_c), ("W_dist", w_dist), ("GP", gp)];
            if critic_steps % cfg.critic_iters == 0 {
                let z = prior::<F, _>(n, d, &mut rng);
                zero_grad(&mut m.generator);
                let l_gen = fanogan_generator_grads(m, &z, Mode::TRAIN);
                opt_g.step(&mut m.generator);
                values.push(("L_Gen", l_gen));
            }
            history.push(&values)?;
            means.add(&values);
        }
        log_epoch("f_anogan/wgan", epoch, cfg.epochs, &means.finish());
    }
    for epoch in 0..cfg.epochs {
        for x in batches.epoch() {
            zero_grad(&mut m.encoder);
            let loss = fanogan_encoder_grads(m, &x, cfg.feature_weight, Mode::TRAIN);
            opt_e.step(&mut m.encoder);
            history.push(&[("L_izif", loss)])?;
            means.add(&[("L_izif", loss)]);
        }
        log_epoch("f_anogan/izi_f", epoch, cfg.epochs, &means.finish());
    }
    Ok((bundle, history))
}

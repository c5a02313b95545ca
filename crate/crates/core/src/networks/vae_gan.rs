use super::discriminator::{probabilities, Discriminator};
use super::{check_image_batch, check_latent_batch, stream_rng, ArchConfig, Model, NetworkBundle, LEAKY_SLOPE};
use crate::nn::{
    Activation, BatchNorm, Conv2d, ConvTranspose2d, Layer, Linear, Mode, Module, Residual,
    Sequential, Tensor,
};
use crate::{Float, Result};
use ndarray::{s, Array4};
use rand::Rng;

/// VAE-GAN with residual encoder and decoder. The encoder's final linear
/// layer emits `2 * latent_dim` values per image: the mean followed by the
/// log standard deviation.
#[derive(Clone, Debug)]
pub struct VaeGan<F> {
    pub encoder: Sequential<F>,
    pub generator: Sequential<F>,
    pub discriminator: Discriminator<F>,
    pub latent_dim: usize,
}

pub fn build_vae_gan<F: Float>(arch: ArchConfig, seed: u64) -> Result<NetworkBundle<F>> {
    arch.validate()?;
    let c = arch.base_channels;
    let z = arch.latent_dim;
    let model = VaeGan {
        encoder: encoder(c, z, &mut stream_rng(seed, 0)),
        generator: decoder(c, z, &mut stream_rng(seed, 1)),
        discriminator: Discriminator::dcgan(c, &mut stream_rng(seed, 2)),
        latent_dim: z,
    };
    Ok(NetworkBundle {
        arch,
        seed,
        model: Model::VaeGan(model),
    })
}

fn down_block<F: Float, R: Rng>(cin: usize, cout: usize, rng: &mut R) -> Layer<F> {
    let main = Sequential::new()
        .with("conv1", Layer::Conv(Conv2d::new(cin, cout, 3, 2, 1, false, rng)))
        .with("bn1", Layer::BatchNorm(BatchNorm::new(cout, true)))
        .with("act1", Layer::Act(Activation::LeakyRelu(LEAKY_SLOPE)))
        .with("conv2", Layer::Conv(Conv2d::new(cout, cout, 3, 1, 1, false, rng)))
        .with("bn2", Layer::BatchNorm(BatchNorm::new(cout, true)));
    let shortcut = Sequential::new()
        .with("conv", Layer::Conv(Conv2d::new(cin, cout, 1, 2, 0, false, rng)))
        .with("bn", Layer::BatchNorm(BatchNorm::new(cout, true)));
    Layer::Residual(Box::new(Residual {
        main,
        shortcut,
        post: Activation::LeakyRelu(LEAKY_SLOPE),
    }))
}

fn up_block<F: Float, R: Rng>(cin: usize, cout: usize, rng: &mut R) -> Layer<F> {
    let main = Sequential::new()
        .with("convt", Layer::ConvT(ConvTranspose2d::new(cin, cout, 4, 2, 1, false, rng)))
        .with("bn1", Layer::BatchNorm(BatchNorm::new(cout, true)))
        .with("act1", Layer::Act(Activation::Relu))
        .with("conv", Layer::Conv(Conv2d::new(cout, cout, 3, 1, 1, false, rng)))
        .with("bn2", Layer::BatchNorm(BatchNorm::new(cout, true)));
    let shortcut = Sequential::new()
        .with("convt", Layer::ConvT(ConvTranspose2d::new(cin, cout, 2, 2, 0, false, rng)))
        .with("bn", Layer::BatchNorm(BatchNorm::new(cout, true)));
    Layer::Residual(Box::new(Residual {
        main,
        shortcut,
        post: Activation::Relu,
    }))
}

fn encoder<F: Float, R: Rng>(c: usize, latent: usize, rng: &mut R) -> Sequential<F> {
    let mut s = Sequential::new();
    s.push("stem.conv", Layer::Conv(Conv2d::new(1, c, 3, 1, 1, false, rng)))
        .push("stem.bn", Layer::BatchNorm(BatchNorm::new(c, true)))
        .push("stem.act", Layer::Act(Activation::LeakyRelu(LEAKY_SLOPE)));
    let widths = [c, c, 2 * c, 4 * c, 8 * c];
    for b in 0..4 {
        s.push(format!("res{}", b + 1), down_block(widths[b], widths[b + 1], rng));
    }
    s.push("moments", Layer::Linear(Linear::new(8 * c * 16, 2 * latent, true, rng)));
    s
}

fn decoder<F: Float, R: Rng>(c: usize, latent: usize, rng: &mut R) -> Sequential<F> {
    let mut s = Sequential::new();
    s.push("project.convt", Layer::ConvT(ConvTranspose2d::new(latent, 8 * c, 4, 1, 0, false, rng)))
        .push("project.bn", Layer::BatchNorm(BatchNorm::new(8 * c, true)))
        .push("project.act", Layer::Act(Activation::Relu));
    let widths = [8 * c, 4 * c, 2 * c, c, c];
    for b in 0..4 {
        s.push(format!("res{}", b + 1), up_block(widths[b], widths[b + 1], rng));
    }
    s.push("out.conv", Layer::Conv(Conv2d::new(c, 1, 3, 1, 1, true, rng)))
        .push("out.tanh", Layer::Act(Activation::Tanh));
    s
}

/// Splits encoder output into mean `m` and standard deviation `s = exp(h)`.
pub fn split_moments<F: Float>(out: &Tensor<F>) -> (Tensor<F>, Tensor<F>) {
    let d = out.dim().1 / 2;
    let m = out.slice(s![.., ..d, .., ..]).to_owned();
    let sd = out.slice(s![.., d.., .., ..]).mapv(|h| h.exp());
    (m, sd)
}

/// Joins gradients with respect to `m` and `s` into a gradient on the raw
/// encoder output (using `ds/dh = s`).
pub fn join_moment_grads<F: Float>(gm: &Tensor<F>, gs: &Tensor<F>, s: &Tensor<F>) -> Tensor<F> {
    let (n, d, _, _) = gm.dim();
    let mut g = Array4::zeros((n, 2 * d, 1, 1));
    g.slice_mut(s![.., ..d, .., ..]).assign(gm);
    g.slice_mut(s![.., d.., .., ..]).assign(&(gs * s));
    g
}

impl<F: Float> VaeGan<F> {
    /// Mean and standard deviation of the approximate posterior.
    pub fn encode(&mut self, x: &Tensor<F>, mode: Mode) -> Result<(Tensor<F>, Tensor<F>)> {
        check_image_batch(x)?;
        Ok(split_moments(&self.encoder.forward(x, mode).0))
    }

    pub fn generate(&mut self, z: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        check_latent_batch(z, self.latent_dim)?;
        Ok(self.generator.forward(z, mode).0)
    }

    pub fn discriminate(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Vec<f64>> {
        check_image_batch(x)?;
        Ok(probabilities(&self.discriminator.forward(x, mode).0))
    }

    /// Decodes the posterior mean; the deterministic reconstruction used for
    /// scoring.
    pub fn reconstruct(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        let (m, _) = self.encode(x, mode)?;
        self.generate(&m, mode)
    }
}

/// Reparameterised sample `m + s * eps`.
pub fn reparameterize<F: Float>(m: &Tensor<F>, s: &Tensor<F>, eps: &Tensor<F>) -> Tensor<F> {
    m + &(s * eps)
}

use super::discriminator::{probabilities, Discriminator};
use super::{check_image_batch, check_latent_batch, stream_rng, ArchConfig, Model, NetworkBundle, LEAKY_SLOPE};
use crate::nn::{
    Activation, BatchNorm, Conv2d, ConvTranspose2d, Layer, Linear, Mode, Module, SelfAttention,
    Sequential, Tensor,
};
use crate::{Float, Result};
use rand::Rng;

/// Hidden widths of the latent discriminator after the latent input.
pub const LATENT_DISC_WIDTHS: [usize; 3] = [256, 128, 64];

#[derive(Clone, Debug)]
pub struct AlphaGan<F> {
    pub encoder: Sequential<F>,
    pub generator: Sequential<F>,
    pub discriminator: Discriminator<F>,
    pub latent_discriminator: Sequential<F>,
    pub latent_dim: usize,
}

pub fn build_alpha_gan<F: Float>(arch: ArchConfig, seed: u64) -> Result<NetworkBundle<F>> {
    arch.validate()?;
    let c = arch.base_channels;
    let z = arch.latent_dim;
    let model = AlphaGan {
        encoder: encoder(c, z, &mut stream_rng(seed, 0)),
        generator: generator(c, z, &mut stream_rng(seed, 1)),
        discriminator: Discriminator::dcgan(c, &mut stream_rng(seed, 2)),
        latent_discriminator: latent_discriminator(z, &mut stream_rng(seed, 3)),
        latent_dim: z,
    };
    Ok(NetworkBundle {
        arch,
        seed,
        model: Model::AlphaGan(model),
    })
}

fn encoder<F: Float, R: Rng>(c: usize, latent: usize, rng: &mut R) -> Sequential<F> {
    let mut s = Sequential::new();
    let mut cin = 1;
    for (i, mult) in [1, 2, 4, 8].into_iter().enumerate() {
        let b = i + 1;
        let cout = c * mult;
        let conv = Conv2d::new(cin, cout, 4, 2, 1, false, rng).with_spectral_norm(rng);
        s.push(format!("block{b}.conv"), Layer::Conv(conv));
        if b == 4 {
            s.push("block4.attention", Layer::Attention(SelfAttention::new(cout, rng)));
        }
        s.push(format!("block{b}.bn"), Layer::BatchNorm(BatchNorm::new(cout, true)))
            .push(format!("block{b}.act"), Layer::Act(Activation::LeakyRelu(LEAKY_SLOPE)));
        cin = cout;
    }
    s.push("latent", Layer::Linear(Linear::new(cin * 16, latent, true, rng)))
        .push("tanh", Layer::Act(Activation::Tanh));
    s
}

pub(crate) fn generator<F: Float, R: Rng>(c: usize, latent: usize, rng: &mut R) -> Sequential<F> {
    let mut s = Sequential::new();
    let top = 8 * c;
    s.push(
        "project.convt",
        Layer::ConvT(ConvTranspose2d::new(latent, top, 4, 1, 0, false, rng).with_spectral_norm(rng)),
    )
    .push("project.attention", Layer::Attention(SelfAttention::new(top, rng)))
    .push("project.bn", Layer::BatchNorm(BatchNorm::new(top, true)))
    .push("project.act", Layer::Act(Activation::Relu));
    let mut cin = top;
    for (i, mult) in [4, 2, 1].into_iter().enumerate() {
        let b = i + 1;
        let cout = c * mult;
        let convt = ConvTranspose2d::new(cin, cout, 4, 2, 1, false, rng).with_spectral_norm(rng);
        s.push(format!("up{b}.convt"), Layer::ConvT(convt))
            .push(format!("up{b}.bn"), Layer::BatchNorm(BatchNorm::new(cout, true)))
            .push(format!("up{b}.act"), Layer::Act(Activation::Relu));
        cin = cout;
    }
    s.push(
        "out.convt",
        Layer::ConvT(ConvTranspose2d::new(cin, 1, 4, 2, 1, true, rng).with_spectral_norm(rng)),
    )
    .push("out.tanh", Layer::Act(Activation::Tanh));
    s
}

fn latent_discriminator<F: Float, R: Rng>(latent: usize, rng: &mut R) -> Sequential<F> {
    let mut s = Sequential::new();
    let mut cin = latent;
    for (i, w) in LATENT_DISC_WIDTHS.into_iter().enumerate() {
        s.push(format!("fc{}", i + 1), Layer::Linear(Linear::new(cin, w, true, rng)))
            .push(format!("act{}", i + 1), Layer::Act(Activation::LeakyRelu(LEAKY_SLOPE)));
        cin = w;
    }
    s.push("logit", Layer::Linear(Linear::new(cin, 1, true, rng)));
    s
}

impl<F: Float> AlphaGan<F> {
    /// Images in `[-1, 1]` to latent codes in `[-1, 1]`.
    pub fn encode(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        check_image_batch(x)?;
        Ok(self.encoder.forward(x, mode).0)
    }

    pub fn generate(&mut self, z: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        check_latent_batch(z, self.latent_dim)?;
        Ok(self.generator.forward(z, mode).0)
    }

    /// Probability that each image is real.
    pub fn discriminate(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Vec<f64>> {
        check_image_batch(x)?;
        Ok(probabilities(&self.discriminator.forward(x, mode).0))
    }

    /// Probability that each code was drawn from the prior.
    pub fn latent_discriminate(&mut self, z: &Tensor<F>, mode: Mode) -> Result<Vec<f64>> {
        check_latent_batch(z, self.latent_dim)?;
        Ok(probabilities(&self.latent_discriminator.forward(z, mode).0))
    }

    /// `G(E(x))`.
    pub fn reconstruct(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        let z = self.encode(x, mode)?;
        self.generate(&z, mode)
    }
}

use super::discriminator::Discriminator;
use super::{stream_rng, ArchConfig, Model, NetworkBundle, LEAKY_SLOPE};
use crate::nn::{
    Activation, BatchNorm, Conv2d, ConvTranspose2d, Layer, Linear, MaxPool2d, Reshape,
    Sequential,
};
use crate::{Float, Result};
use ndarray::ArrayD;
use rand::Rng;

/// Leaky slope of the DCAE / Deep SVDD networks.
const SVDD_SLOPE: f64 = 0.01;

/// Convolutional autoencoder.
#[derive(Clone, Debug)]
pub struct Dcae<F> {
    pub encoder: Sequential<F>,
    pub decoder: Sequential<F>,
}

/// Bias-free feature network and the hypersphere center it is trained
/// towards. The center is all zeros until training fixes it.
#[derive(Clone, Debug)]
pub struct DeepSvdd<F> {
    pub net: Sequential<F>,
    pub center: ArrayD<F>,
}

/// WGAN-GP generator and critic plus the izi_f encoder.
#[derive(Clone, Debug)]
pub struct FAnoGan<F> {
    pub encoder: Sequential<F>,
    pub generator: Sequential<F>,
    pub critic: Discriminator<F>,
}

/// Three `conv5 -> batch-norm -> leaky -> max-pool` stages and a linear
/// projection, all without bias.
pub(crate) fn svdd_encoder<F: Float, R: Rng>(c: usize, latent: usize, rng: &mut R) -> Sequential<F> {
    let mut s = Sequential::new();
    let mut cin = 1;
    for (i, mult) in [1, 2, 4].into_iter().enumerate() {
        let b = i + 1;
        let cout = c * mult;
        s.push(format!("block{b}.conv"), Layer::Conv(Conv2d::new(cin, cout, 5, 1, 2, false, rng)))
            .push(format!("block{b}.bn"), Layer::BatchNorm(BatchNorm::new(cout, false)))
            .push(format!("block{b}.act"), Layer::Act(Activation::LeakyRelu(SVDD_SLOPE)))
            .push(format!("block{b}.pool"), Layer::Pool(MaxPool2d));
        cin = cout;
    }
    s.push("latent", Layer::Linear(Linear::new(cin * 64, latent, false, rng)));
    s
}

fn dcae_decoder<F: Float, R: Rng>(c: usize, latent: usize, rng: &mut R) -> Sequential<F> {
    let top = 4 * c;
    let mut s = Sequential::new();
    s.push("project", Layer::Linear(Linear::new(latent, top * 64, false, rng)))
        .push("reshape", Layer::Reshape(Reshape(top, 8, 8)))
        .push("project.bn", Layer::BatchNorm(BatchNorm::new(top, false)))
        .push("project.act", Layer::Act(Activation::LeakyRelu(SVDD_SLOPE)));
    let mut cin = top;
    for (i, mult) in [2, 1].into_iter().enumerate() {
        let b = i + 1;
        let cout = c * mult;
        s.push(format!("up{b}.convt"), Layer::ConvT(ConvTranspose2d::new(cin, cout, 4, 2, 1, false, rng)))
            .push(format!("up{b}.bn"), Layer::BatchNorm(BatchNorm::new(cout, false)))
            .push(format!("up{b}.act"), Layer::Act(Activation::LeakyRelu(SVDD_SLOPE)));
        cin = cout;
    }
    s.push("out.convt", Layer::ConvT(ConvTranspose2d::new(cin, 1, 4, 2, 1, false, rng)))
        .push("out.tanh", Layer::Act(Activation::Tanh));
    s
}

pub fn build_dcae<F: Float>(arch: ArchConfig, seed: u64) -> Result<NetworkBundle<F>> {
    arch.validate()?;
    let model = Dcae {
        encoder: svdd_encoder(arch.base_channels, arch.latent_dim, &mut stream_rng(seed, 0)),
        decoder: dcae_decoder(arch.base_channels, arch.latent_dim, &mut stream_rng(seed, 1)),
    };
    Ok(NetworkBundle {
        arch,
        seed,
        model: Model::Dcae(model),
    })
}

pub fn build_deep_svdd<F: Float>(arch: ArchConfig, seed: u64) -> Result<NetworkBundle<F>> {
    arch.validate()?;
    let model = DeepSvdd {
        net: svdd_encoder(arch.base_channels, arch.latent_dim, &mut stream_rng(seed, 0)),
        center: ArrayD::zeros(vec![arch.latent_dim]),
    };
    Ok(NetworkBundle {
        arch,
        seed,
        model: Model::DeepSvdd(model),
    })
}

fn plain_generator<F: Float, R: Rng>(c: usize, latent: usize, rng: &mut R) -> Sequential<F> {
    let top = 8 * c;
    let mut s = Sequential::new();
    s.push("project.convt", Layer::ConvT(ConvTranspose2d::new(latent, top, 4, 1, 0, false, rng)))
        .push("project.bn", Layer::BatchNorm(BatchNorm::new(top, true)))
        .push("project.act", Layer::Act(Activation::Relu));
    let mut cin = top;
    for (i, mult) in [4, 2, 1].into_iter().enumerate() {
        let b = i + 1;
        let cout = c * mult;
        s.push(format!("up{b}.convt"), Layer::ConvT(ConvTranspose2d::new(cin, cout, 4, 2, 1, false, rng)))
            .push(format!("up{b}.bn"), Layer::BatchNorm(BatchNorm::new(cout, true)))
            .push(format!("up{b}.act"), Layer::Act(Activation::Relu));
        cin = cout;
    }
    s.push("out.convt", Layer::ConvT(ConvTranspose2d::new(cin, 1, 4, 2, 1, true, rng)))
        .push("out.tanh", Layer::Act(Activation::Tanh));
    s
}

fn izi_encoder<F: Float, R: Rng>(c: usize, latent: usize, rng: &mut R) -> Sequential<F> {
    let mut s = Sequential::new();
    let mut cin = 1;
    for (i, mult) in [1, 2, 4, 8].into_iter().enumerate() {
        let b = i + 1;
        let cout = c * mult;
        s.push(format!("block{b}.conv"), Layer::Conv(Conv2d::new(cin, cout, 4, 2, 1, true, rng)))
            .push(format!("block{b}.act"), Layer::Act(Activation::LeakyRelu(LEAKY_SLOPE)));
        cin = cout;
    }
    s.push("latent", Layer::Linear(Linear::new(cin * 16, latent, true, rng)));
    s
}

pub fn build_f_anogan<F: Float>(arch: ArchConfig, seed: u64) -> Result<NetworkBundle<F>> {
    arch.validate()?;
    let c = arch.base_channels;
    let model = FAnoGan {
        encoder: izi_encoder(c, arch.latent_dim, &mut stream_rng(seed, 0)),
        generator: plain_generator(c, arch.latent_dim, &mut stream_rng(seed, 1)),
        critic: Discriminator::critic(c, &mut stream_rng(seed, 2)),
    };
    Ok(NetworkBundle {
        arch,
        seed,
        model: Model::FAnoGan(model),
    })
}

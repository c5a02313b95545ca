//! Network architectures for the alpha-GAN and every baseline, plus
//! conversion between `[0, 1]` frames and the `[-1, 1]` tensors the networks
//! operate on.

mod alpha_gan;
mod baselines;
pub mod checkpoint;
mod discriminator;
mod vae_gan;

pub use alpha_gan::{build_alpha_gan, AlphaGan};
pub use baselines::{build_dcae, build_deep_svdd, build_f_anogan, Dcae, DeepSvdd, FAnoGan};
pub(crate) use baselines::svdd_encoder;
pub use discriminator::{DiscCache, Discriminator, GRADCAM_LAYER};
pub use vae_gan::{build_vae_gan, join_moment_grads, reparameterize, split_moments, VaeGan};

use crate::nn::{Module, Tensor, Visitor};
use crate::{Error, Float, Result};
use ndarray::{Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Spatial size every architecture is built for.
pub const IMAGE_SIZE: usize = 64;
pub const DEFAULT_LATENT_DIM: usize = 128;
pub const DEFAULT_BASE_CHANNELS: usize = 32;
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchitectureTag {
    AlphaGan,
    VaeGan,
    Dcae,
    DeepSvdd,
    FAnoGan,
}

impl ArchitectureTag {
    pub const ALL: [ArchitectureTag; 5] = [
        ArchitectureTag::AlphaGan,
        ArchitectureTag::VaeGan,
        ArchitectureTag::Dcae,
        ArchitectureTag::DeepSvdd,
        ArchitectureTag::FAnoGan,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ArchitectureTag::AlphaGan => "alpha_gan",
            ArchitectureTag::VaeGan => "vae_gan",
            ArchitectureTag::Dcae => "dcae",
            ArchitectureTag::DeepSvdd => "deep_svdd",
            ArchitectureTag::FAnoGan => "f_anogan",
        }
    }

    /// Models with an image discriminator that GradCAM++ can be applied to.
    pub fn has_discriminator(self) -> bool {
        matches!(self, ArchitectureTag::AlphaGan | ArchitectureTag::VaeGan)
    }
}

impl fmt::Display for ArchitectureTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArchitectureTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ArchitectureTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown architecture tag {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub latent_dim: usize,
    /// Channel count of the first convolution block; later blocks double it.
    pub base_channels: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            latent_dim: DEFAULT_LATENT_DIM,
            base_channels: DEFAULT_BASE_CHANNELS,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::Config("latent_dim must be positive".into()));
        }
        if self.base_channels == 0 {
            return Err(Error::Config("base_channels must be positive".into()));
        }
        Ok(())
    }
}

pub enum Model<F> {
    AlphaGan(AlphaGan<F>),
    VaeGan(VaeGan<F>),
    Dcae(Dcae<F>),
    DeepSvdd(DeepSvdd<F>),
    FAnoGan(FAnoGan<F>),
}

/// All sub-networks of one trained (or freshly initialised) model.
pub struct NetworkBundle<F> {
    pub arch: ArchConfig,
    /// Seed the networks were initialised and trained with.
    pub seed: u64,
    pub model: Model<F>,
}

impl<F: Float> NetworkBundle<F> {
    pub fn build(tag: ArchitectureTag, arch: ArchConfig, seed: u64) -> Result<Self> {
        match tag {
            ArchitectureTag::AlphaGan => build_alpha_gan(arch, seed),
            ArchitectureTag::VaeGan => build_vae_gan(arch, seed),
            ArchitectureTag::Dcae => build_dcae(arch, seed),
            ArchitectureTag::DeepSvdd => build_deep_svdd(arch, seed),
            ArchitectureTag::FAnoGan => build_f_anogan(arch, seed),
        }
    }

    pub fn tag(&self) -> ArchitectureTag {
        match self.model {
            Model::AlphaGan(_) => ArchitectureTag::AlphaGan,
            Model::VaeGan(_) => ArchitectureTag::VaeGan,
            Model::Dcae(_) => ArchitectureTag::Dcae,
            Model::DeepSvdd(_) => ArchitectureTag::DeepSvdd,
            Model::FAnoGan(_) => ArchitectureTag::FAnoGan,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent_dim
    }

    /// Visits every parameter and buffer, prefixed by sub-network name.
    pub fn visit(&mut self, v: &mut dyn Visitor<F>) {
        match &mut self.model {
            Model::AlphaGan(m) => {
                m.encoder.visit("encoder", v);
                m.generator.visit("generator", v);
                m.discriminator.visit("discriminator", v);
                m.latent_discriminator.visit("latent_discriminator", v);
            }
            Model::VaeGan(m) => {
                m.encoder.visit("encoder", v);
                m.generator.visit("generator", v);
                m.discriminator.visit("discriminator", v);
            }
            Model::Dcae(m) => {
                m.encoder.visit("encoder", v);
                m.decoder.visit("decoder", v);
            }
            Model::DeepSvdd(m) => {
                m.net.visit("encoder", v);
                v.buffer("center", &mut m.center);
            }
            Model::FAnoGan(m) => {
                m.encoder.visit("encoder", v);
                m.generator.visit("generator", v);
                m.critic.visit("discriminator", v);
            }
        }
    }

    /// `true` when every parameter and buffer is finite.
    pub fn all_finite(&mut self) -> bool {
        struct Finite(bool);
        impl<F: Float> Visitor<F> for Finite {
            fn param(&mut self, _: &str, p: &mut crate::nn::Param<F>) {
                self.0 &= p.value.iter().all(|v| v.is_finite());
            }
            fn buffer(&mut self, _: &str, b: &mut ndarray::ArrayD<F>) {
                self.0 &= b.iter().all(|v| v.is_finite());
            }
        }
        let mut f = Finite(true);
        self.visit(&mut f);
        f.0
    }
}

/// Independent RNG stream per sub-network so that adding a network never
/// perturbs the initialisation of the others.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stacks `[0, 1]` images into a `(n, 1, 64, 64)` tensor in `[-1, 1]`.
pub fn images_to_tensor<F: Float>(images: &[ArrayView2<f64>]) -> Result<Tensor<F>> {
    let n = images.len();
    let mut t = Tensor::<F>::zeros((n, 1, IMAGE_SIZE, IMAGE_SIZE));
    for (i, img) in images.iter().enumerate() {
        if img.dim() != (IMAGE_SIZE, IMAGE_SIZE) {
            return Err(Error::shape(
                format!("{IMAGE_SIZE}x{IMAGE_SIZE} image"),
                format!("{}x{}", img.nrows(), img.ncols()),
            ));
        }
        t.slice_mut(ndarray::s![i, 0, .., ..])
            .assign(&img.mapv(|v| F::of(2.0 * v - 1.0)));
    }
    Ok(t)
}

/// Inverse of [`images_to_tensor`].
pub fn tensor_to_images<F: Float>(t: &Tensor<F>) -> Vec<Array2<f64>> {
    t.outer_iter()
        .map(|s| s.index_axis(ndarray::Axis(0), 0).mapv(|v| (v.as_f64() + 1.0) / 2.0))
        .collect()
}

/// `(n, d, 1, 1)` latent batch from row vectors.
pub fn latents_to_tensor<F: Float>(z: &[Array1<f64>]) -> Tensor<F> {
    let d = z.first().map_or(0, |v| v.len());
    Tensor::from_shape_fn((z.len(), d, 1, 1), |(i, j, _, _)| F::of(z[i][j]))
}

pub fn tensor_to_latents<F: Float>(t: &Tensor<F>) -> Vec<Array1<f64>> {
    t.outer_iter()
        .map(|s| s.iter().map(|v| v.as_f64()).collect())
        .collect()
}

pub(crate) fn check_image_batch<F: Float>(x: &Tensor<F>) -> Result<()> {
    let (_, c, h, w) = x.dim();
    if (c, h, w) != (1, IMAGE_SIZE, IMAGE_SIZE) {
        return Err(Error::shape(
            format!("(n, 1, {IMAGE_SIZE}, {IMAGE_SIZE})"),
            format!("{:?}", x.dim()),
        ));
    }
    Ok(())
}

pub(crate) fn check_latent_batch<F: Float>(z: &Tensor<F>, latent_dim: usize) -> Result<()> {
    let (_, c, h, w) = z.dim();
    if (c, h, w) != (latent_dim, 1, 1) {
        return Err(Error::shape(
            format!("(n, {latent_dim}, 1, 1)"),
            format!("{:?}", z.dim()),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{for_each_param, spectral_normalize, Mode, SpectralNorm};
    use ndarray::{arr2, Array2};
    use rand::{Rng, SeedableRng};

    fn small() -> ArchConfig {
        ArchConfig {
            latent_dim: 16,
            base_channels: 4,
        }
    }

    fn random_images(n: usize, seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_shape_simple_fn((n, 1, IMAGE_SIZE, IMAGE_SIZE), || rng.random_range(-1.0..1.0))
    }

    fn params(b: &mut NetworkBundle<f64>) -> Vec<(String, Vec<f64>)> {
        struct C(Vec<(String, Vec<f64>)>);
        impl Visitor<f64> for C {
            fn param(&mut self, n: &str, p: &mut crate::nn::Param<f64>) {
                self.0.push((n.to_string(), p.value.iter().copied().collect()));
            }
            fn buffer(&mut self, n: &str, b: &mut ndarray::ArrayD<f64>) {
                self.0.push((n.to_string(), b.iter().copied().collect()));
            }
        }
        let mut c = C(Vec::new());
        b.visit(&mut c);
        c.0
    }

    fn svd_max(m: &Array2<f64>) -> f64 {
        let n = nalgebra::DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]]);
        n.singular_values().max()
    }

    #[test]
    fn spectral_normalize_matches_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = arr2(&[[2.0, 0.0], [0.0, 0.5]]);
        let mut state = SpectralNorm::new(w.view(), &mut rng);
        let out = spectral_normalize(w.view(), &mut state, 50);
        assert!((svd_max(&out) - 1.0).abs() < 1e-3);

        let eye = Array2::<f64>::eye(3);
        let mut state = SpectralNorm::new(eye.view(), &mut rng);
        let out = spectral_normalize(eye.view(), &mut state, 50);
        assert!(out.iter().zip(eye.iter()).all(|(a, b)| (a - b).abs() < 1e-9));

        let zero = Array2::<f64>::zeros((3, 2));
        let mut state = SpectralNorm::new(zero.view(), &mut rng);
        assert_eq!(spectral_normalize(zero.view(), &mut state, 5), zero);
    }

    #[test]
    fn alpha_gan_ranges_and_shapes() {
        let mut b = NetworkBundle::<f64>::build(ArchitectureTag::AlphaGan, small(), 0).unwrap();
        let Model::AlphaGan(m) = &mut b.model else { unreachable!() };
        let x = random_images(3, 1);
        let z = m.encode(&x, Mode::TRAIN).unwrap();
        assert_eq!(z.dim(), (3, 16, 1, 1));
        assert!(z.iter().all(|v| v.abs() <= 1.0));
        let xh = m.generate(&z, Mode::TRAIN).unwrap();
        assert_eq!(xh.dim(), x.dim());
        assert!(xh.iter().all(|v| v.abs() <= 1.0));
        for p in m.discriminate(&x, Mode::EVAL).unwrap() {
            assert!(p > 0.0 && p < 1.0);
        }
        for p in m.latent_discriminate(&z, Mode::EVAL).unwrap() {
            assert!(p > 0.0 && p < 1.0);
        }
        let e1 = m.encode(&x, Mode::EVAL).unwrap();
        let e2 = m.encode(&x, Mode::EVAL).unwrap();
        assert_eq!(e1, e2);
        let err = m.generate(&Tensor::zeros((1, 15, 1, 1)), Mode::EVAL).unwrap_err();
        assert!(err.to_string().contains("(n, 16, 1, 1)"));
        assert!(m.encode(&Tensor::zeros((1, 1, 32, 32)), Mode::EVAL).is_err());
    }

    #[test]
    fn builds_are_deterministic() {
        for tag in ArchitectureTag::ALL {
            let mut a = NetworkBundle::<f64>::build(tag, small(), 11).unwrap();
            let mut b = NetworkBundle::<f64>::build(tag, small(), 11).unwrap();
            let mut c = NetworkBundle::<f64>::build(tag, small(), 12).unwrap();
            assert_eq!(params(&mut a), params(&mut b), "{tag}");
            assert_ne!(params(&mut a), params(&mut c), "{tag}");
            assert!(a.all_finite());
        }
    }

    #[test]
    fn discriminator_init_is_narrow_normal() {
        let mut b = NetworkBundle::<f64>::build(ArchitectureTag::AlphaGan, ArchConfig::default(), 0).unwrap();
        let Model::AlphaGan(m) = &mut b.model else { unreachable!() };
        let mut w = Vec::new();
        for_each_param(&mut m.discriminator, |name, p| {
            if name.ends_with("conv.weight") {
                w.extend(p.value.iter().copied());
            }
        });
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let sd = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-3, "{mean}");
        assert!((sd - 0.02).abs() < 1e-3, "{sd}");
    }

    #[test]
    fn deep_svdd_has_no_bias() {
        let mut b = NetworkBundle::<f64>::build(ArchitectureTag::DeepSvdd, small(), 0).unwrap();
        let names: Vec<String> = params(&mut b).into_iter().map(|(n, _)| n).collect();
        assert!(names.iter().all(|n| !n.contains("bias") && !n.contains("beta")), "{names:?}");
        assert!(names.iter().any(|n| n == "center"));
    }

    #[test]
    fn baseline_contracts() {
        let x = random_images(2, 4);
        let mut b = NetworkBundle::<f64>::build(ArchitectureTag::FAnoGan, small(), 0).unwrap();
        let Model::FAnoGan(m) = &mut b.model else { unreachable!() };
        let (h, _) = m.critic.forward_features(&x, Mode::EVAL);
        assert_eq!(h.dim(), (2, 32, 4, 4));
        let (score, _) = m.critic.forward(&x, Mode::EVAL);
        assert_eq!(score.dim(), (2, 1, 1, 1));

        let mut b = NetworkBundle::<f64>::build(ArchitectureTag::Dcae, small(), 0).unwrap();
        let Model::Dcae(m) = &mut b.model else { unreachable!() };
        let (z, _) = m.encoder.forward(&x, Mode::TRAIN);
        let (y, _) = m.decoder.forward(&z, Mode::TRAIN);
        assert_eq!(y.dim(), x.dim());
    }

    #[test]
    fn vae_gan_contracts() {
        let mut b = NetworkBundle::<f64>::build(ArchitectureTag::VaeGan, small(), 0).unwrap();
        let Model::VaeGan(m) = &mut b.model else { unreachable!() };
        let x = random_images(2, 5);
        let (mean, sd) = m.encode(&x, Mode::TRAIN).unwrap();
        assert!(sd.iter().all(|&s| s > 0.0));
        let z = reparameterize(&mean, &sd, &Tensor::zeros(mean.dim()));
        assert_eq!(z, mean);
        assert_eq!(m.generate(&mean, Mode::TRAIN).unwrap().dim(), x.dim());
        for p in m.discriminate(&x, Mode::EVAL).unwrap() {
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn checkpoint_roundtrip_and_tag_guard() {
        let mut b = NetworkBundle::<f32>::build(ArchitectureTag::AlphaGan, small(), 9).unwrap();
        let Model::AlphaGan(m) = &mut b.model else { unreachable!() };
        crate::nn::for_each_param(&mut m.encoder, |_, p| p.value.mapv_inplace(|v| v * 1.5 + 0.25));
        let bytes = checkpoint::to_bytes(&mut b).unwrap();
        let mut back = checkpoint::from_bytes::<f32>(&bytes, Some(ArchitectureTag::AlphaGan)).unwrap();
        assert_eq!(checkpoint::to_bytes(&mut back).unwrap(), bytes);
        assert!(matches!(
            checkpoint::from_bytes::<f32>(&bytes, Some(ArchitectureTag::VaeGan)),
            Err(Error::ArchitectureMismatch { .. })
        ));
        assert!(checkpoint::from_bytes::<f64>(&bytes, None).is_err());
        assert!(checkpoint::from_bytes::<f32>(&bytes[..40], None).is_err());
    }

    #[test]
    fn image_tensor_conversion() {
        let img = Array2::from_shape_fn((64, 64), |(i, j)| ((i + j) % 5) as f64 / 4.0);
        let t = images_to_tensor::<f64>(&[img.view()]).unwrap();
        assert!(t.iter().all(|v| (-1.0..=1.0).contains(v)));
        let back = tensor_to_images(&t);
        assert!(back[0].iter().zip(img.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(images_to_tensor::<f64>(&[Array2::zeros((3, 3)).view()]).is_err());
    }
}

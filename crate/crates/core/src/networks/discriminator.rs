use crate::nn::{Activation, BatchNorm, Conv2d, Layer, Linear, Mode, Module, SeqCache, Sequential, Tensor, Visitor, join};
use crate::{Error, Float, Result};
use rand::Rng;
use std::ops::Range;

/// Output of the last rectified convolution block: the GradCAM++ target.
pub const GRADCAM_LAYER: &str = "block4.relu";

/// Image discriminator split into a convolutional feature stack and a
/// scalar head producing a logit. The feature output doubles as the
/// intermediate representation `D_H` used by f-AnoGAN.
#[derive(Clone, Debug)]
pub struct Discriminator<F> {
    pub features: Sequential<F>,
    pub head: Sequential<F>,
}

pub struct DiscCache<F> {
    features: SeqCache<F>,
    head: SeqCache<F>,
}

impl<F: Float> Discriminator<F> {
    /// Four `conv -> batch-norm -> ReLU` blocks with `N(0, 0.02)` weights and
    /// a 4x4 valid convolution head.
    pub fn dcgan<R: Rng + ?Sized>(base: usize, rng: &mut R) -> Self {
        let mut features = Sequential::new();
        let mut cin = 1;
        for (i, mult) in [1, 2, 4, 8].into_iter().enumerate() {
            let cout = base * mult;
            let b = i + 1;
            features
                .push(format!("block{b}.conv"), Layer::Conv(Conv2d::normal(cin, cout, 4, 2, 1, false, 0.02, rng)))
                .push(format!("block{b}.bn"), Layer::BatchNorm(BatchNorm::new(cout, true)))
                .push(format!("block{b}.relu"), Layer::Act(Activation::Relu));
            cin = cout;
        }
        let head = Sequential::new().with("logit", Layer::Conv(Conv2d::normal(cin, 1, 4, 1, 0, true, 0.02, rng)));
        Discriminator { features, head }
    }

    /// WGAN critic: leaky conv blocks without normalisation and a linear head.
    pub fn critic<R: Rng + ?Sized>(base: usize, rng: &mut R) -> Self {
        let mut features = Sequential::new();
        let mut cin = 1;
        for (i, mult) in [1, 2, 4, 8].into_iter().enumerate() {
            let cout = base * mult;
            let b = i + 1;
            features
                .push(format!("block{b}.conv"), Layer::Conv(Conv2d::new(cin, cout, 4, 2, 1, true, rng)))
                .push(format!("block{b}.act"), Layer::Act(Activation::LeakyRelu(super::LEAKY_SLOPE)));
            cin = cout;
        }
        let head = Sequential::new().with("score", Layer::Linear(Linear::new(cin * 16, 1, true, rng)));
        Discriminator { features, head }
    }

    /// Feature stack output (`D_H`).
    pub fn forward_features(&mut self, x: &Tensor<F>, mode: Mode) -> (Tensor<F>, SeqCache<F>) {
        self.features.forward(x, mode)
    }

    pub fn backward_features(&mut self, cache: &SeqCache<F>, grad: &Tensor<F>) -> Tensor<F> {
        self.features.backward(cache, grad)
    }

    /// Layer ranges before and after a named feature layer (inclusive split).
    pub fn split(&self, layer: &str) -> Result<(Range<usize>, Range<usize>)> {
        let idx = self
            .features
            .index_of(layer)
            .ok_or_else(|| Error::Invalid(format!("discriminator has no layer {layer:?}")))?;
        Ok((0..idx + 1, idx + 1..self.features.len()))
    }

    /// Runs the network from the output of `layer` to the logit.
    pub fn forward_from(
        &mut self,
        activation: &Tensor<F>,
        rest: Range<usize>,
        mode: Mode,
    ) -> (Tensor<F>, DiscCache<F>) {
        let (h, features) = self.features.forward_range(activation, rest, mode);
        let (logit, head) = self.head.forward(&h, mode);
        (logit, DiscCache { features, head })
    }
}

impl<F: Float> Module<F> for Discriminator<F> {
    type Cache = DiscCache<F>;

    /// Returns logits of shape `(n, 1, 1, 1)`.
    fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> (Tensor<F>, DiscCache<F>) {
        let (h, features) = self.features.forward(x, mode);
        let (logit, head) = self.head.forward(&h, mode);
        (logit, DiscCache { features, head })
    }

    fn backward(&mut self, cache: &DiscCache<F>, grad: &Tensor<F>) -> Tensor<F> {
        let g = self.head.backward(&cache.head, grad);
        self.features.backward(&cache.features, &g)
    }

    fn visit(&mut self, prefix: &str, v: &mut dyn Visitor<F>) {
        self.features.visit(&join(prefix, "features"), v);
        self.head.visit(&join(prefix, "head"), v);
    }
}

/// Elementwise logistic function applied to a logit batch.
pub(crate) fn probabilities<F: Float>(logits: &Tensor<F>) -> Vec<f64> {
    logits.iter().map(|&l| crate::nn::sigmoid(l).as_f64()).collect()
}

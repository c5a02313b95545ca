use super::activation::ActCache;
use super::attention::AttnCache;
use super::batchnorm::BnCache;
use super::conv::{ConvCache, ConvTCache};
use super::linear::LinearCache;
use super::pool::PoolCache;
use super::residual::ResidualCache;
use super::{
    join, Activation, BatchNorm, Conv2d, ConvTranspose2d, Linear, MaxPool2d, Mode, Module,
    Reshape, Residual, SelfAttention, Tensor, Visitor,
};
use crate::Float;
use std::ops::Range;

#[derive(Clone, Debug)]
pub enum Layer<F> {
    Conv(Conv2d<F>),
    ConvT(ConvTranspose2d<F>),
    BatchNorm(BatchNorm<F>),
    Linear(Linear<F>),
    Act(Activation),
    Pool(MaxPool2d),
    Reshape(Reshape),
    Attention(SelfAttention<F>),
    Residual(Box<Residual<F>>),
}

pub enum LayerCache<F> {
    Conv(ConvCache<F>),
    ConvT(ConvTCache<F>),
    BatchNorm(BnCache<F>),
    Linear(LinearCache<F>),
    Act(ActCache<F>),
    Pool(PoolCache),
    Reshape((usize, usize, usize, usize)),
    Attention(AttnCache<F>),
    Residual(Box<ResidualCache<F>>),
}

macro_rules! dispatch_forward {
    ($self:expr, $x:expr, $mode:expr, $($var:ident),*) => {
        match $self {
            $(Layer::$var(l) => {
                let (y, c) = l.forward($x, $mode);
                (y, LayerCache::$var(c))
            })*
            Layer::Act(a) => {
                let (y, c) = Module::<F>::forward(a, $x, $mode);
                (y, LayerCache::Act(c))
            }
            Layer::Pool(p) => {
                let (y, c) = Module::<F>::forward(p, $x, $mode);
                (y, LayerCache::Pool(c))
            }
            Layer::Reshape(r) => {
                let (y, c) = Module::<F>::forward(r, $x, $mode);
                (y, LayerCache::Reshape(c))
            }
            Layer::Residual(r) => {
                let (y, c) = r.forward($x, $mode);
                (y, LayerCache::Residual(Box::new(c)))
            }
        }
    };
}

impl<F: Float> Module<F> for Layer<F> {
    type Cache = LayerCache<F>;

    fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> (Tensor<F>, LayerCache<F>) {
        dispatch_forward!(self, x, mode, Conv, ConvT, BatchNorm, Linear, Attention)
    }

    fn backward(&mut self, cache: &LayerCache<F>, grad: &Tensor<F>) -> Tensor<F> {
        match (self, cache) {
            (Layer::Conv(l), LayerCache::Conv(c)) => l.backward(c, grad),
            (Layer::ConvT(l), LayerCache::ConvT(c)) => l.backward(c, grad),
            (Layer::BatchNorm(l), LayerCache::BatchNorm(c)) => l.backward(c, grad),
            (Layer::Linear(l), LayerCache::Linear(c)) => l.backward(c, grad),
            (Layer::Act(l), LayerCache::Act(c)) => Module::<F>::backward(l, c, grad),
            (Layer::Pool(l), LayerCache::Pool(c)) => Module::<F>::backward(l, c, grad),
            (Layer::Reshape(l), LayerCache::Reshape(c)) => Module::<F>::backward(l, c, grad),
            (Layer::Attention(l), LayerCache::Attention(c)) => l.backward(c, grad),
            (Layer::Residual(l), LayerCache::Residual(c)) => l.backward(c, grad),
            _ => panic!("layer/cache mismatch"),
        }
    }

    fn visit(&mut self, prefix: &str, v: &mut dyn Visitor<F>) {
        match self {
            Layer::Conv(l) => l.visit(prefix, v),
            Layer::ConvT(l) => l.visit(prefix, v),
            Layer::BatchNorm(l) => l.visit(prefix, v),
            Layer::Linear(l) => l.visit(prefix, v),
            Layer::Attention(l) => l.visit(prefix, v),
            Layer::Residual(l) => l.visit(prefix, v),
            Layer::Act(_) | Layer::Pool(_) | Layer::Reshape(_) => {}
        }
    }
}

/// An ordered chain of named layers.
#[derive(Clone, Debug, Default)]
pub struct Sequential<F> {
    pub layers: Vec<(String, Layer<F>)>,
}

pub struct SeqCache<F> {
    range: Range<usize>,
    caches: Vec<LayerCache<F>>,
}

impl<F: Float> Sequential<F> {
    pub fn new() -> Self {
        Sequential { layers: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, layer: Layer<F>) -> &mut Self {
        self.layers.push((name.into(), layer));
        self
    }

    pub fn with(mut self, name: impl Into<String>, layer: Layer<F>) -> Self {
        self.push(name, layer);
        self
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|(n, _)| n == name)
    }

    pub fn layer(&self, name: &str) -> Option<&Layer<F>> {
        self.layers.iter().find(|(n, _)| n == name).map(|(_, l)| l)
    }

    pub fn forward_range(
        &mut self,
        x: &Tensor<F>,
        range: Range<usize>,
        mode: Mode,
    ) -> (Tensor<F>, SeqCache<F>) {
        let mut caches = Vec::with_capacity(range.len());
        let mut cur: Option<Tensor<F>> = None;
        for (_, layer) in &mut self.layers[range.clone()] {
            let input = cur.as_ref().unwrap_or(x);
            let (y, c) = layer.forward(input, mode);
            caches.push(c);
            cur = Some(y);
        }
        (cur.unwrap_or_else(|| x.clone()), SeqCache { range, caches })
    }
}

impl<F: Float> Module<F> for Sequential<F> {
    type Cache = SeqCache<F>;

    fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> (Tensor<F>, SeqCache<F>) {
        let n = self.layers.len();
        self.forward_range(x, 0..n, mode)
    }

    fn backward(&mut self, cache: &SeqCache<F>, grad: &Tensor<F>) -> Tensor<F> {
        let mut g: Option<Tensor<F>> = None;
        for ((_, layer), c) in self.layers[cache.range.clone()]
            .iter_mut()
            .zip(&cache.caches)
            .rev()
        {
            let next = layer.backward(c, g.as_ref().unwrap_or(grad));
            g = Some(next);
        }
        g.unwrap_or_else(|| grad.clone())
    }

    fn visit(&mut self, prefix: &str, v: &mut dyn Visitor<F>) {
        for (name, layer) in &mut self.layers {
            layer.visit(&join(prefix, name), v);
        }
    }
}

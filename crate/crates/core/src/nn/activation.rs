use super::{Mode, Module, Tensor, Visitor};
use crate::Float;
use ndarray::Zip;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
}

/// Input for the rectifiers, output for the squashing functions.
pub struct ActCache<F>(Tensor<F>);

pub fn sigmoid<F: Float>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

impl<F: Float> Module<F> for Activation {
    type Cache = ActCache<F>;

    fn forward(&mut self, x: &Tensor<F>, _mode: Mode) -> (Tensor<F>, ActCache<F>) {
        match *self {
            Activation::Relu => (x.mapv(|v| v.max(F::zero())), ActCache(x.clone())),
            Activation::LeakyRelu(slope) => {
                let s = F::of(slope);
                (
                    x.mapv(|v| if v > F::zero() { v } else { s * v }),
                    ActCache(x.clone()),
                )
            }
            Activation::Tanh => {
                let y = x.mapv(|v| v.tanh());
                (y.clone(), ActCache(y))
            }
            Activation::Sigmoid => {
                let y = x.mapv(sigmoid);
                (y.clone(), ActCache(y))
            }
        }
    }

    fn backward(&mut self, cache: &ActCache<F>, grad: &Tensor<F>) -> Tensor<F> {
        let c = &cache.0;
        let zero = F::zero();
        match *self {
            Activation::Relu => Zip::from(grad).and(c).map_collect(|&g, &x| if x > zero { g } else { zero }),
            Activation::LeakyRelu(slope) => {
                let s = F::of(slope);
                Zip::from(grad).and(c).map_collect(|&g, &x| if x > zero { g } else { s * g })
            }
            Activation::Tanh => Zip::from(grad).and(c).map_collect(|&g, &y| g * (F::one() - y * y)),
            Activation::Sigmoid => Zip::from(grad).and(c).map_collect(|&g, &y| g * y * (F::one() - y)),
        }
    }

    fn visit(&mut self, _prefix: &str, _v: &mut dyn Visitor<F>) {}
}

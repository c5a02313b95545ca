//! Minimal layer library with explicit backward passes.
//!
//! Every layer returns its forward cache instead of storing it, so one
//! network can be evaluated several times inside a single optimisation step
//! (a discriminator on real, reconstructed and prior samples) and each call
//! can be back-propagated independently. Parameter gradients accumulate in
//! [`Param::grad`] until [`zero_grad`] is called.

mod activation;
mod attention;
mod batchnorm;
mod conv;
pub mod init;
mod linear;
mod optim;
mod param;
mod pool;
mod reshape;
mod residual;
mod sequential;
mod spectral;

pub use activation::{sigmoid, Activation};
pub use attention::SelfAttention;
pub use batchnorm::BatchNorm;
pub use conv::{col2im, im2col, Conv2d, ConvTranspose2d};
pub use linear::Linear;
pub use optim::Adam;
pub use param::Param;
pub use pool::MaxPool2d;
pub use reshape::Reshape;
pub use residual::Residual;
pub use sequential::{Layer, LayerCache, SeqCache, Sequential};
pub use spectral::{spectral_normalize, SpectralNorm};

use crate::Float;
use ndarray::{Array4, ArrayD};

/// Activations are always `(batch, channels, height, width)`; vectors use
/// `height = width = 1`.
pub type Tensor<F> = Array4<F>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mode {
    /// Batch statistics in batch-norm layers.
    pub train: bool,
    /// Update running statistics and spectral-norm power-iteration vectors.
    pub update_state: bool,
}

impl Mode {
    pub const TRAIN: Mode = Mode {
        train: true,
        update_state: true,
    };
    pub const EVAL: Mode = Mode {
        train: false,
        update_state: false,
    };
    /// Training-mode arithmetic without touching any persistent state.
    /// Finite-difference probes use this so repeated evaluations agree.
    pub const PROBE: Mode = Mode {
        train: true,
        update_state: false,
    };
}

pub trait Module<F: Float> {
    type Cache;

    fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> (Tensor<F>, Self::Cache);

    /// Accumulates parameter gradients and returns the gradient with respect
    /// to the forward input.
    fn backward(&mut self, cache: &Self::Cache, grad: &Tensor<F>) -> Tensor<F>;

    fn visit(&mut self, prefix: &str, visitor: &mut dyn Visitor<F>);
}

pub trait Visitor<F> {
    fn param(&mut self, name: &str, param: &mut Param<F>);
    fn buffer(&mut self, _name: &str, _buffer: &mut ArrayD<F>) {}
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

struct ParamFn<G>(G);

impl<F, G: FnMut(&str, &mut Param<F>)> Visitor<F> for ParamFn<G> {
    fn param(&mut self, name: &str, param: &mut Param<F>) {
        (self.0)(name, param)
    }
}

pub fn for_each_param<F: Float, M: Module<F> + ?Sized>(
    module: &mut M,
    f: impl FnMut(&str, &mut Param<F>),
) {
    module.visit("", &mut ParamFn(f));
}

pub fn zero_grad<F: Float, M: Module<F> + ?Sized>(module: &mut M) {
    for_each_param(module, |_, p| p.zero_grad());
}

pub fn param_count<F: Float, M: Module<F> + ?Sized>(module: &mut M) -> usize {
    let mut n = 0;
    for_each_param(module, |_, p| n += p.value.len());
    n
}

/// Sum of squared parameter values.
pub fn squared_norm<F: Float, M: Module<F> + ?Sized>(module: &mut M) -> F {
    let mut acc = F::zero();
    for_each_param(module, |_, p| {
        acc += p.value.iter().map(|&v| v * v).sum::<F>();
    });
    acc
}


#[cfg(test)]
mod tests {
    use super::gradcheck::{check_module, random_input};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn conv_gradients() {
        let mut conv = Conv2d::<f64>::new(2, 3, 4, 2, 1, true, &mut rng());
        check_module(&mut conv, &random_input((2, 2, 6, 6), 1), 2);
    }

    #[test]
    fn spectral_conv_gradients() {
        let mut r = rng();
        let mut conv = Conv2d::<f64>::new(2, 3, 3, 1, 1, false, &mut r).with_spectral_norm(&mut r);
        check_module(&mut conv, &random_input((2, 2, 5, 5), 3), 4);
    }

    #[test]
    fn conv_transpose_gradients() {
        let mut r = rng();
        let mut conv = ConvTranspose2d::<f64>::new(3, 2, 4, 2, 1, true, &mut r).with_spectral_norm(&mut r);
        let x = random_input((2, 3, 3, 3), 5);
        let (y, _) = conv.forward(&x, Mode::EVAL);
        assert_eq!(y.dim(), (2, 2, 6, 6));
        check_module(&mut conv, &x, 6);
    }

    #[test]
    fn batchnorm_gradients_train_and_eval() {
        let mut bn = BatchNorm::<f64>::new(3, true);
        bn.gamma.as_mut().unwrap().value[1] = 1.7;
        bn.beta.as_mut().unwrap().value[2] = -0.3;
        check_module(&mut bn, &random_input((4, 3, 2, 2), 7), 8);
        let mut plain = BatchNorm::<f64>::new(2, false);
        check_module(&mut plain, &random_input((3, 2, 1, 1), 9), 10);
    }

    #[test]
    fn batchnorm_eval_uses_running_statistics() {
        let mut bn = BatchNorm::<f64>::new(1, true);
        let x = random_input((8, 1, 2, 2), 1);
        bn.forward(&x, Mode::TRAIN);
        let mean = x.mean().unwrap();
        assert!((bn.running_mean[0] - 0.1 * mean).abs() < 1e-12);
        let (a, _) = bn.forward(&x.slice(ndarray::s![0..1, .., .., ..]).to_owned(), Mode::EVAL);
        let (b, _) = bn.forward(&x, Mode::EVAL);
        assert_eq!(a.slice(ndarray::s![0, .., .., ..]), b.slice(ndarray::s![0, .., .., ..]));
    }

    #[test]
    fn linear_and_activations() {
        let mut r = rng();
        let mut seq = Sequential::<f64>::new()
            .with("fc1", Layer::Linear(Linear::new(8, 5, true, &mut r)))
            .with("act1", Layer::Act(Activation::LeakyRelu(0.2)))
            .with("fc2", Layer::Linear(Linear::new(5, 4, true, &mut r)))
            .with("tanh", Layer::Act(Activation::Tanh))
            .with("reshape", Layer::Reshape(Reshape(1, 2, 2)))
            .with("sig", Layer::Act(Activation::Sigmoid));
        check_module(&mut seq, &random_input((3, 2, 2, 2), 12), 13);
    }

    #[test]
    fn pool_and_residual() {
        let mut r = rng();
        let main = Sequential::new()
            .with("conv", Layer::Conv(Conv2d::<f64>::new(2, 2, 3, 1, 1, false, &mut r)))
            .with("bn", Layer::BatchNorm(BatchNorm::new(2, true)));
        let res = Residual {
            main,
            shortcut: Sequential::new(),
            post: Activation::Relu,
        };
        let mut seq = Sequential::new()
            .with("res", Layer::Residual(Box::new(res)))
            .with("pool", Layer::Pool(MaxPool2d));
        check_module(&mut seq, &random_input((2, 2, 4, 4), 14), 15);
    }

    #[test]
    fn attention_gradients_with_nonzero_gamma() {
        let mut att = SelfAttention::<f64>::new(8, &mut rng());
        att.gamma.value[0] = 0.7;
        check_module(&mut att, &random_input((2, 8, 3, 2), 16), 17);
    }

    #[test]
    fn attention_is_identity_at_zero_gamma() {
        let mut att = SelfAttention::<f64>::new(16, &mut rng());
        let x = random_input((2, 16, 4, 4), 18);
        let (y, _) = att.forward(&x, Mode::TRAIN);
        assert_eq!(y, x);
    }

    #[test]
    fn attention_single_position_adds_value_projection() {
        let mut att = SelfAttention::<f64>::new(8, &mut rng());
        att.gamma.value[0] = 0.5;
        let x = random_input((1, 8, 1, 1), 19);
        let weights = att.attention_weights(&x);
        assert_eq!(weights[0].dim(), (1, 1));
        assert!((weights[0][[0, 0]] - 1.0).abs() < 1e-15);
        let (y, _) = att.forward(&x, Mode::EVAL);
        let wv = att.value_w.value.clone().into_dimensionality::<ndarray::Ix2>().unwrap();
        for c in 0..8 {
            let proj: f64 = (0..8).map(|j| wv[[c, j]] * x[[0, j, 0, 0]]).sum::<f64>() + att.value_b.value[c];
            assert!((y[[0, c, 0, 0]] - (x[[0, c, 0, 0]] + 0.5 * proj)).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let att = SelfAttention::<f64>::new(8, &mut rng());
        for a in att.attention_weights(&random_input((3, 8, 4, 4), 20)) {
            for row in a.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn im2col_col2im_are_adjoint() {
        let x = random_input((2, 3, 7, 6), 21);
        let cols = im2col(x.view(), 3, 2, 1);
        let r = random_input((1, 1, cols.nrows(), cols.ncols()), 22)
            .into_shape_with_order(cols.dim())
            .unwrap();
        let lhs = (&cols * &r).sum();
        let back = col2im(r.view(), x.dim(), 3, 2, 1);
        let rhs = (&x * &back).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn adam_counts_steps_and_moves_against_gradient() {
        let mut lin = Linear::<f64>::new(3, 1, false, &mut rng());
        let before = lin.weight.value.clone();
        lin.weight.grad.fill(1.0);
        let mut opt = Adam::new(0.1, (0.9, 0.999));
        opt.step(&mut lin);
        assert_eq!(opt.steps, 1);
        for (a, b) in lin.weight.value.iter().zip(before.iter()) {
            assert!((b - a - 0.1).abs() < 1e-6);
        }
    }
}

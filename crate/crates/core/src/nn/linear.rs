use super::{init, join, Mode, Module, Param, Tensor, Visitor};
use crate::Float;
use ndarray::{Array2, Axis, Ix2};
use rand::Rng;

/// Fully connected layer. Inputs of shape `(n, c, h, w)` are flattened to
/// `(n, c*h*w)`; the output is `(n, out, 1, 1)`.
#[derive(Clone, Debug)]
pub struct Linear<F> {
    pub weight: Param<F>,
    pub bias: Option<Param<F>>,
}

pub struct LinearCache<F> {
    x: Array2<F>,
    in_dim: (usize, usize, usize, usize),
}

impl<F: Float> Linear<F> {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, bias: bool, rng: &mut R) -> Self {
        Linear {
            weight: Param::new(init::kaiming_uniform(&[outputs, inputs], inputs, rng)),
            bias: bias.then(|| Param::new(init::kaiming_uniform(&[outputs], inputs, rng))),
        }
    }

    pub fn normal<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        bias: bool,
        std: f64,
        rng: &mut R,
    ) -> Self {
        Linear {
            weight: Param::new(init::normal(&[outputs, inputs], 0.0, std, rng)),
            bias: bias.then(|| Param::zeros(&[outputs])),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    fn w(&self) -> ndarray::ArrayView2<'_, F> {
        self.weight.value.view().into_dimensionality::<Ix2>().expect("2-D")
    }
}

impl<F: Float> Module<F> for Linear<F> {
    type Cache = LinearCache<F>;

    fn forward(&mut self, x: &Tensor<F>, _mode: Mode) -> (Tensor<F>, LinearCache<F>) {
        let in_dim = x.dim();
        let (n, c, h, w) = in_dim;
        assert_eq!(c * h * w, self.inputs(), "linear input features");
        let x2 = x
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((n, c * h * w))
            .expect("contiguous");
        let mut y = x2.dot(&self.w().t());
        if let Some(b) = &self.bias {
            for mut row in y.rows_mut() {
                row.iter_mut().zip(b.value.iter()).for_each(|(o, &bv)| *o += bv);
            }
        }
        let out = self.outputs();
        (
            y.into_shape_with_order((n, out, 1, 1)).expect("contiguous"),
            LinearCache { x: x2, in_dim },
        )
    }

    fn backward(&mut self, cache: &LinearCache<F>, grad: &Tensor<F>) -> Tensor<F> {
        let n = grad.dim().0;
        let g2 = grad
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((n, self.outputs()))
            .expect("contiguous");
        let gw = g2.t().dot(&cache.x);
        self.weight.grad += &gw.into_dyn();
        if let Some(b) = &mut self.bias {
            b.grad += &g2.sum_axis(Axis(0)).into_dyn();
        }
        let dx = g2.dot(&self.w());
        dx.into_shape_with_order(cache.in_dim).expect("contiguous")
    }

    fn visit(&mut self, prefix: &str, v: &mut dyn Visitor<F>) {
        v.param(&join(prefix, "weight"), &mut self.weight);
        if let Some(b) = &mut self.bias {
            v.param(&join(prefix, "bias"), b);
        }
    }
}

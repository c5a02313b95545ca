use super::{Mode, Module, Tensor, Visitor};
use crate::Float;

/// Reinterprets each sample as `(channels, height, width)`.
#[derive(Clone, Copy, Debug)]
pub struct Reshape(pub usize, pub usize, pub usize);

impl<F: Float> Module<F> for Reshape {
    type Cache = (usize, usize, usize, usize);

    fn forward(&mut self, x: &Tensor<F>, _mode: Mode) -> (Tensor<F>, Self::Cache) {
        let dim = x.dim();
        let y = x
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((dim.0, self.0, self.1, self.2))
            .expect("element count preserved");
        (y, dim)
    }

    fn backward(&mut self, cache: &Self::Cache, grad: &Tensor<F>) -> Tensor<F> {
        grad.as_standard_layout()
            .into_owned()
            .into_shape_with_order(*cache)
            .expect("element count preserved")
    }

    fn visit(&mut self, _prefix: &str, _v: &mut dyn Visitor<F>) {}
}

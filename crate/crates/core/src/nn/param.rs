use crate::Float;
use ndarray::{ArrayD, IxDyn};

/// A trainable array with its gradient accumulator and Adam moments.
#[derive(Clone, Debug)]
pub struct Param<F> {
    pub value: ArrayD<F>,
    pub grad: ArrayD<F>,
    pub(crate) first_moment: ArrayD<F>,
    pub(crate) second_moment: ArrayD<F>,
}

impl<F: Float> Param<F> {
    pub fn new(value: ArrayD<F>) -> Self {
        let shape = value.raw_dim();
        Param {
            value,
            grad: ArrayD::zeros(shape.clone()),
            first_moment: ArrayD::zeros(shape.clone()),
            second_moment: ArrayD::zeros(shape),
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::new(ArrayD::zeros(IxDyn(shape)))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(F::zero());
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }
}

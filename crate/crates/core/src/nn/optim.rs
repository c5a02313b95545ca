use super::{for_each_param, Module};
use crate::Float;
use ndarray::Zip;

/// Adam with bias correction. `steps` counts applied updates.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub steps: u64,
}

impl Adam {
    pub fn new(lr: f64, betas: (f64, f64)) -> Self {
        Adam {
            lr,
            beta1: betas.0,
            beta2: betas.1,
            eps: 1e-8,
            steps: 0,
        }
    }

    /// Applies one update from the accumulated gradients. Gradients are left
    /// in place; callers zero them before the next backward pass.
    pub fn step<F: Float, M: Module<F> + ?Sized>(&mut self, module: &mut M) {
        self.steps += 1;
        let t = self.steps as i32;
        let (b1, b2) = (F::of(self.beta1), F::of(self.beta2));
        let c1 = F::of(1.0 - self.beta1.powi(t));
        let c2 = F::of(1.0 - self.beta2.powi(t));
        let lr = F::of(self.lr);
        let eps = F::of(self.eps);
        let one = F::one();
        for_each_param(module, |_, p| {
            Zip::from(&mut p.value)
                .and(&p.grad)
                .and(&mut p.first_moment)
                .and(&mut p.second_moment)
                .for_each(|w, &g, m, v| {
                    *m = b1 * *m + (one - b1) * g;
                    *v = b2 * *v + (one - b2) * g * g;
                    let mh = *m / c1;
                    let vh = *v / c2;
                    *w -= lr * mh / (vh.sqrt() + eps);
                });
        });
    }
}

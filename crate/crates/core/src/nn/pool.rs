use super::{Mode, Module, Tensor, Visitor};
use crate::Float;

/// Non-overlapping 2x2 max pooling.
#[derive(Clone, Copy, Debug, Default)]
pub struct MaxPool2d;

pub struct PoolCache {
    argmax: Vec<usize>,
    in_dim: (usize, usize, usize, usize),
}

impl<F: Float> Module<F> for MaxPool2d {
    type Cache = PoolCache;

    fn forward(&mut self, x: &Tensor<F>, _mode: Mode) -> (Tensor<F>, PoolCache) {
        let (n, c, h, w) = x.dim();
        let (ho, wo) = (h / 2, w / 2);
        let x = x.as_standard_layout();
        let xs = x.as_slice().expect("standard layout");
        let mut y = Tensor::<F>::zeros((n, c, ho, wo));
        let mut argmax = Vec::with_capacity(n * c * ho * wo);
        let ys = y.as_slice_mut().expect("fresh");
        let mut o = 0;
        for plane in 0..n * c {
            let base = plane * h * w;
            for i in 0..ho {
                for j in 0..wo {
                    let mut best = base + 2 * i * w + 2 * j;
                    for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (2 * i + di) * w + 2 * j + dj;
                        if xs[idx] > xs[best] {
                            best = idx;
                        }
                    }
                    ys[o] = xs[best];
                    argmax.push(best);
                    o += 1;
                }
            }
        }
        (
            y,
            PoolCache {
                argmax,
                in_dim: (n, c, h, w),
            },
        )
    }

    fn backward(&mut self, cache: &PoolCache, grad: &Tensor<F>) -> Tensor<F> {
        let mut dx = Tensor::<F>::zeros(cache.in_dim);
        let ds = dx.as_slice_mut().expect("fresh");
        for (&idx, &g) in cache.argmax.iter().zip(grad.iter()) {
            ds[idx] += g;
        }
        dx
    }

    fn visit(&mut self, _prefix: &str, _v: &mut dyn Visitor<F>) {}
}

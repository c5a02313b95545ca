use super::{join, Mode, Module, Param, Tensor, Visitor};
use crate::Float;
use ndarray::{ArrayD, IxDyn};

/// Per-channel batch normalisation over `(batch, height, width)`.
///
/// `affine = false` drops the scale and shift parameters (used by the
/// bias-free Deep SVDD network).
#[derive(Clone, Debug)]
pub struct BatchNorm<F> {
    pub gamma: Option<Param<F>>,
    pub beta: Option<Param<F>>,
    pub running_mean: ArrayD<F>,
    pub running_var: ArrayD<F>,
    pub momentum: F,
    pub eps: F,
}

pub struct BnCache<F> {
    xhat: Tensor<F>,
    inv_std: Vec<F>,
    train: bool,
}

impl<F: Float> BatchNorm<F> {
    pub fn new(channels: usize, affine: bool) -> Self {
        BatchNorm {
            gamma: affine.then(|| Param::new(ArrayD::ones(IxDyn(&[channels])))),
            beta: affine.then(|| Param::zeros(&[channels])),
            running_mean: ArrayD::zeros(IxDyn(&[channels])),
            running_var: ArrayD::ones(IxDyn(&[channels])),
            momentum: F::of(0.1),
            eps: F::of(1e-5),
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }

    fn scale(&self, c: usize) -> F {
        self.gamma.as_ref().map_or(F::one(), |g| g.value[c])
    }

    fn shift(&self, c: usize) -> F {
        self.beta.as_ref().map_or(F::zero(), |b| b.value[c])
    }
}

impl<F: Float> Module<F> for BatchNorm<F> {
    type Cache = BnCache<F>;

    fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> (Tensor<F>, BnCache<F>) {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.channels(), "batch-norm channels");
        let plane = h * w;
        let count = n * plane;
        let x = x.as_standard_layout();
        let xs = x.as_slice().expect("standard layout");
        let mut xhat = Tensor::<F>::zeros((n, c, h, w));
        let mut y = Tensor::<F>::zeros((n, c, h, w));
        let mut inv_std = vec![F::zero(); c];
        {
            let xh = xhat.as_slice_mut().expect("fresh");
            let ys = y.as_slice_mut().expect("fresh");
            for ch in 0..c {
                let (mean, var) = if mode.train {
                    let mut sum = F::zero();
                    for b in 0..n {
                        let off = (b * c + ch) * plane;
                        sum += xs[off..off + plane].iter().copied().sum::<F>();
                    }
                    let mean = sum / F::of(count as f64);
                    let mut sq = F::zero();
                    for b in 0..n {
                        let off = (b * c + ch) * plane;
                        sq += xs[off..off + plane]
                            .iter()
                            .map(|&v| (v - mean) * (v - mean))
                            .sum::<F>();
                    }
                    let var = sq / F::of(count as f64);
                    if mode.update_state {
                        let m = self.momentum;
                        let unbiased = if count > 1 {
                            sq / F::of((count - 1) as f64)
                        } else {
                            var
                        };
                        self.running_mean[ch] = (F::one() - m) * self.running_mean[ch] + m * mean;
                        self.running_var[ch] = (F::one() - m) * self.running_var[ch] + m * unbiased;
                    }
                    (mean, var)
                } else {
                    (self.running_mean[ch], self.running_var[ch])
                };
                let is = F::one() / (var + self.eps).sqrt();
                inv_std[ch] = is;
                let (g, bt) = (self.scale(ch), self.shift(ch));
                for b in 0..n {
                    let off = (b * c + ch) * plane;
                    for i in off..off + plane {
                        let v = (xs[i] - mean) * is;
                        xh[i] = v;
                        ys[i] = g * v + bt;
                    }
                }
            }
        }
        (
            y,
            BnCache {
                xhat,
                inv_std,
                train: mode.train,
            },
        )
    }

    fn backward(&mut self, cache: &BnCache<F>, grad: &Tensor<F>) -> Tensor<F> {
        let (n, c, h, w) = grad.dim();
        let plane = h * w;
        let count = F::of((n * plane) as f64);
        let grad = grad.as_standard_layout();
        let gs = grad.as_slice().expect("standard layout");
        let xh = cache.xhat.as_slice().expect("standard layout");
        let mut dx = Tensor::<F>::zeros((n, c, h, w));
        let ds = dx.as_slice_mut().expect("fresh");
        for ch in 0..c {
            let mut sum_g = F::zero();
            let mut sum_gx = F::zero();
            for b in 0..n {
                let off = (b * c + ch) * plane;
                for i in off..off + plane {
                    sum_g += gs[i];
                    sum_gx += gs[i] * xh[i];
                }
            }
            if let Some(gm) = &mut self.gamma {
                gm.grad[ch] += sum_gx;
            }
            if let Some(bt) = &mut self.beta {
                bt.grad[ch] += sum_g;
            }
            let g = self.scale(ch);
            let is = cache.inv_std[ch];
            for b in 0..n {
                let off = (b * c + ch) * plane;
                for i in off..off + plane {
                    ds[i] = if cache.train {
                        g * is * (gs[i] - sum_g / count - xh[i] * sum_gx / count)
                    } else {
                        g * is * gs[i]
                    };
                }
            }
        }
        dx
    }

    fn visit(&mut self, prefix: &str, v: &mut dyn Visitor<F>) {
        if let Some(g) = &mut self.gamma {
            v.param(&join(prefix, "gamma"), g);
        }
        if let Some(b) = &mut self.beta {
            v.param(&join(prefix, "beta"), b);
        }
        v.buffer(&join(prefix, "running_mean"), &mut self.running_mean);
        v.buffer(&join(prefix, "running_var"), &mut self.running_var);
    }
}

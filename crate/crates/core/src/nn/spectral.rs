use super::{init, join, Visitor};
use crate::Float;
use ndarray::{Array1, Array2, ArrayD, ArrayView1, ArrayView2, Ix1};
use rand::Rng;

/// Power iterations run once at construction so the very first forward pass
/// already divides by a converged estimate.
const WARMUP_ITERS: usize = 200;

/// Persistent left/right singular-vector estimates for one weight matrix.
#[derive(Clone, Debug)]
pub struct SpectralNorm<F> {
    pub u: ArrayD<F>,
    pub v: ArrayD<F>,
}

pub struct SnCache<F> {
    sigma: F,
    u: Array1<F>,
    v: Array1<F>,
    w_sn: Array2<F>,
}

fn unit<F: Float>(x: Array1<F>) -> Array1<F> {
    let norm = x.dot(&x).sqrt();
    x / (norm + F::of(1e-12))
}

impl<F: Float> SpectralNorm<F> {
    pub fn new<R: Rng + ?Sized>(w: ArrayView2<F>, rng: &mut R) -> Self {
        let u = unit(Array1::from(init::standard_normal_vec::<F, _>(w.nrows(), rng)));
        let v = unit(w.t().dot(&u));
        let mut sn = SpectralNorm {
            u: u.into_dyn(),
            v: v.into_dyn(),
        };
        sn.power_iteration(w, WARMUP_ITERS);
        sn
    }

    fn vectors(&self) -> (ArrayView1<'_, F>, ArrayView1<'_, F>) {
        (
            self.u.view().into_dimensionality::<Ix1>().expect("1-D"),
            self.v.view().into_dimensionality::<Ix1>().expect("1-D"),
        )
    }

    pub fn power_iteration(&mut self, w: ArrayView2<F>, iters: usize) {
        let (u, _) = self.vectors();
        let mut u = u.to_owned();
        let mut v = Array1::zeros(w.ncols());
        for _ in 0..iters {
            v = unit(w.t().dot(&u));
            u = unit(w.dot(&v));
        }
        if iters > 0 {
            self.u = u.into_dyn();
            self.v = v.into_dyn();
        }
    }

    /// Estimated largest singular value `u^T W v`.
    pub fn sigma(&self, w: ArrayView2<F>) -> F {
        let (u, v) = self.vectors();
        u.dot(&w.dot(&v))
    }

    /// `W / sigma` with the current vectors; a zero matrix is returned as is.
    pub fn normalized(&self, w: ArrayView2<F>) -> (Array2<F>, F) {
        let sigma = self.sigma(w);
        if sigma.abs() < F::of(1e-12) {
            (w.to_owned(), F::zero())
        } else {
            (w.mapv(|x| x / sigma), sigma)
        }
    }

    pub(crate) fn forward(&mut self, w: ArrayView2<F>, update: bool) -> (Array2<F>, SnCache<F>) {
        if update {
            self.power_iteration(w, 1);
        }
        let (w_sn, sigma) = self.normalized(w);
        let (u, v) = self.vectors();
        let cache = SnCache {
            sigma,
            u: u.to_owned(),
            v: v.to_owned(),
            w_sn: w_sn.clone(),
        };
        (w_sn, cache)
    }

    /// Gradient through `W / (u^T W v)` with `u`, `v` held constant:
    /// `(G - <G, W_sn> u v^T) / sigma`.
    pub(crate) fn backward(cache: &SnCache<F>, grad: ArrayView2<F>) -> Array2<F> {
        if cache.sigma == F::zero() {
            return grad.to_owned();
        }
        let inner: F = grad.iter().zip(cache.w_sn.iter()).map(|(&g, &w)| g * w).sum();
        let mut out = grad.to_owned();
        for (i, mut row) in out.rows_mut().into_iter().enumerate() {
            let ui = cache.u[i] * inner;
            for (o, &vj) in row.iter_mut().zip(cache.v.iter()) {
                *o -= ui * vj;
            }
        }
        out.mapv_inplace(|x| x / cache.sigma);
        out
    }

    pub(crate) fn visit(&mut self, prefix: &str, v: &mut dyn Visitor<F>) {
        v.buffer(&join(prefix, "sn_u"), &mut self.u);
        v.buffer(&join(prefix, "sn_v"), &mut self.v);
    }
}

/// Runs `power_iters` power iterations on the persistent vectors in `state`
/// and returns `W / sigma_max(W)` as estimated by those vectors.
pub fn spectral_normalize<F: Float>(
    weight: ArrayView2<F>,
    state: &mut SpectralNorm<F>,
    power_iters: usize,
) -> Array2<F> {
    state.power_iteration(weight, power_iters);
    state.normalized(weight).0
}

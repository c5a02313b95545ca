use super::{init, join, Mode, Module, Param, Tensor, Visitor};
use crate::Float;
use ndarray::{s, Array1, Array2, ArrayView2, Axis, Ix1, Ix2};
use rand::Rng;

/// Self-attention over spatial positions with 1x1 query/key/value
/// projections and a residual mixing coefficient `gamma` that starts at 0:
///
/// `y = x + gamma * V softmax(Q^T K)^T`
#[derive(Clone, Debug)]
pub struct SelfAttention<F> {
    pub query_w: Param<F>,
    pub query_b: Param<F>,
    pub key_w: Param<F>,
    pub key_b: Param<F>,
    pub value_w: Param<F>,
    pub value_b: Param<F>,
    pub gamma: Param<F>,
}

struct SampleCache<F> {
    q: Array2<F>,
    k: Array2<F>,
    v: Array2<F>,
    attn: Array2<F>,
    out: Array2<F>,
}

pub struct AttnCache<F> {
    x: Tensor<F>,
    samples: Vec<SampleCache<F>>,
}

fn mat<F: Float>(p: &Param<F>) -> ArrayView2<'_, F> {
    p.value.view().into_dimensionality::<Ix2>().expect("2-D")
}

fn project<F: Float>(w: &Param<F>, b: &Param<F>, x: &ArrayView2<F>) -> Array2<F> {
    let mut y = mat(w).dot(x);
    let b = b.value.view().into_dimensionality::<Ix1>().expect("1-D");
    for (mut row, &bv) in y.rows_mut().into_iter().zip(b.iter()) {
        row += bv;
    }
    y
}

fn softmax_rows<F: Float>(s: &mut Array2<F>) {
    for mut row in s.rows_mut() {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: F = row.iter().copied().sum();
        row.mapv_inplace(|v| v / sum);
    }
}

impl<F: Float> SelfAttention<F> {
    pub fn new<R: Rng + ?Sized>(channels: usize, rng: &mut R) -> Self {
        let inner = (channels / 8).max(1);
        let w = |rows: usize, rng: &mut R| Param::new(init::kaiming_uniform(&[rows, channels], channels, rng));
        let b = |rows: usize, rng: &mut R| Param::new(init::kaiming_uniform(&[rows], channels, rng));
        SelfAttention {
            query_w: w(inner, rng),
            query_b: b(inner, rng),
            key_w: w(inner, rng),
            key_b: b(inner, rng),
            value_w: w(channels, rng),
            value_b: b(channels, rng),
            gamma: Param::zeros(&[1]),
        }
    }

    pub fn channels(&self) -> usize {
        self.value_w.shape()[0]
    }

    fn sample(&self, x: ArrayView2<F>) -> SampleCache<F> {
        let q = project(&self.query_w, &self.query_b, &x);
        let k = project(&self.key_w, &self.key_b, &x);
        let v = project(&self.value_w, &self.value_b, &x);
        let mut attn = q.t().dot(&k);
        softmax_rows(&mut attn);
        let out = v.dot(&attn.t());
        SampleCache { q, k, v, attn, out }
    }

    /// Attention matrices `(positions, positions)` per sample; row `i` holds
    /// the weights query position `i` assigns to every key position.
    pub fn attention_weights(&self, x: &Tensor<F>) -> Vec<Array2<F>> {
        let (n, c, h, w) = x.dim();
        let x = x.as_standard_layout();
        (0..n)
            .map(|b| {
                let xb = x
                    .slice(s![b, .., .., ..])
                    .into_shape_with_order((c, h * w))
                    .expect("contiguous");
                self.sample(xb).attn
            })
            .collect()
    }
}

impl<F: Float> Module<F> for SelfAttention<F> {
    type Cache = AttnCache<F>;

    fn forward(&mut self, x: &Tensor<F>, _mode: Mode) -> (Tensor<F>, AttnCache<F>) {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.channels(), "attention channels");
        let x = x.as_standard_layout().into_owned();
        let gamma = self.gamma.value[0];
        let mut y = x.clone();
        let mut samples = Vec::with_capacity(n);
        for b in 0..n {
            let xb = x
                .slice(s![b, .., .., ..])
                .into_shape_with_order((c, h * w))
                .expect("contiguous");
            let sc = self.sample(xb);
            let mut yb = y
                .slice_mut(s![b, .., .., ..])
                .into_shape_with_order((c, h * w))
                .expect("contiguous");
            yb.scaled_add(gamma, &sc.out);
            samples.push(sc);
        }
        (y, AttnCache { x, samples })
    }

    fn backward(&mut self, cache: &AttnCache<F>, grad: &Tensor<F>) -> Tensor<F> {
        let (n, c, h, w) = grad.dim();
        let p = h * w;
        let grad = grad.as_standard_layout().into_owned();
        let gamma = self.gamma.value[0];
        let mut dx = grad.clone();
        for b in 0..n {
            let sc = &cache.samples[b];
            let xb = cache
                .x
                .slice(s![b, .., .., ..])
                .into_shape_with_order((c, p))
                .expect("contiguous");
            let gy = grad
                .slice(s![b, .., .., ..])
                .into_shape_with_order((c, p))
                .expect("contiguous");
            self.gamma.grad[0] += gy.iter().zip(sc.out.iter()).map(|(&g, &o)| g * o).sum::<F>();
            let d_out = gy.mapv(|g| g * gamma);
            let d_v = d_out.dot(&sc.attn);
            let d_attn = d_out.t().dot(&sc.v);
            let mut d_s = Array2::<F>::zeros((p, p));
            for i in 0..p {
                let a = sc.attn.row(i);
                let da = d_attn.row(i);
                let dot: F = a.iter().zip(da.iter()).map(|(&x, &y)| x * y).sum();
                let mut row = d_s.row_mut(i);
                for j in 0..p {
                    row[j] = a[j] * (da[j] - dot);
                }
            }
            let d_q = sc.k.dot(&d_s.t());
            let d_k = sc.q.dot(&d_s);
            let mut dxb = dx
                .slice_mut(s![b, .., .., ..])
                .into_shape_with_order((c, p))
                .expect("contiguous");
            for (d, wp, bp) in [
                (&d_q, &mut self.query_w, &mut self.query_b),
                (&d_k, &mut self.key_w, &mut self.key_b),
                (&d_v, &mut self.value_w, &mut self.value_b),
            ] {
                wp.grad += &d.dot(&xb.t()).into_dyn();
                let db: Array1<F> = d.sum_axis(Axis(1));
                bp.grad += &db.into_dyn();
                dxb += &mat(wp).t().dot(d);
            }
        }
        dx
    }

    fn visit(&mut self, prefix: &str, v: &mut dyn Visitor<F>) {
        v.param(&join(prefix, "query_w"), &mut self.query_w);
        v.param(&join(prefix, "query_b"), &mut self.query_b);
        v.param(&join(prefix, "key_w"), &mut self.key_w);
        v.param(&join(prefix, "key_b"), &mut self.key_b);
        v.param(&join(prefix, "value_w"), &mut self.value_w);
        v.param(&join(prefix, "value_b"), &mut self.value_b);
        v.param(&join(prefix, "gamma"), &mut self.gamma);
    }
}

use super::init;
use super::spectral::{SnCache, SpectralNorm};
use super::{join, Mode, Module, Param, Tensor, Visitor};
use crate::Float;
use ndarray::{Array2, ArrayView2, ArrayView4, Axis, Ix2};
use rand::Rng;

fn out_len(n: usize, k: usize, stride: usize, pad: usize) -> usize {
    (n + 2 * pad - k) / stride + 1
}

/// Unfolds `(n, c, h, w)` into `(c*k*k, n*ho*wo)` patch columns.
pub fn im2col<F: Float>(x: ArrayView4<F>, k: usize, stride: usize, pad: usize) -> Array2<F> {
    let (n, c, h, w) = x.dim();
    let ho = out_len(h, k, stride, pad);
    let wo = out_len(w, k, stride, pad);
    let ncol = n * ho * wo;
    let x = x.as_standard_layout();
    let xs = x.as_slice().expect("standard layout");
    let mut cols = Array2::<F>::zeros((c * k * k, ncol));
    let out = cols.as_slice_mut().expect("fresh array");
    for ci in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = ((ci * k + ki) * k + kj) * ncol;
                for b in 0..n {
                    let plane = (b * c + ci) * h * w;
                    for oh in 0..ho {
                        let ih = (oh * stride + ki) as isize - pad as isize;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        let src = plane + ih as usize * w;
                        let dst = row + (b * ho + oh) * wo;
                        for ow in 0..wo {
                            let iw = (ow * stride + kj) as isize - pad as isize;
                            if iw >= 0 && iw < w as isize {
                                out[dst + ow] = xs[src + iw as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters columns back into an `(n, c, h, w)` image,
/// summing overlapping contributions.
pub fn col2im<F: Float>(
    cols: ArrayView2<F>,
    dim: (usize, usize, usize, usize),
    k: usize,
    stride: usize,
    pad: usize,
) -> Tensor<F> {
    let (n, c, h, w) = dim;
    let ho = out_len(h, k, stride, pad);
    let wo = out_len(w, k, stride, pad);
    let ncol = n * ho * wo;
    assert_eq!(cols.dim(), (c * k * k, ncol), "col2im shape");
    let cols = cols.as_standard_layout();
    let cs = cols.as_slice().expect("standard layout");
    let mut img = Tensor::<F>::zeros(dim);
    let out = img.as_slice_mut().expect("fresh array");
    for ci in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = ((ci * k + ki) * k + kj) * ncol;
                for b in 0..n {
                    let plane = (b * c + ci) * h * w;
                    for oh in 0..ho {
                        let ih = (oh * stride + ki) as isize - pad as isize;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        let dst = plane + ih as usize * w;
                        let src = row + (b * ho + oh) * wo;
                        for ow in 0..wo {
                            let iw = (ow * stride + kj) as isize - pad as isize;
                            if iw >= 0 && iw < w as isize {
                                out[dst + iw as usize] += cs[src + ow];
                            }
                        }
                    }
                }
            }
        }
    }
    img
}

/// `(n, c, h, w)` -> `(c, n*h*w)`.
fn channels_first<F: Float>(x: &Tensor<F>) -> Array2<F> {
    let (n, c, h, w) = x.dim();
    x.view()
        .permuted_axes([1, 0, 2, 3])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((c, n * h * w))
        .expect("contiguous")
}

/// `(c, n*h*w)` -> `(n, c, h, w)`.
fn batch_first<F: Float>(m: Array2<F>, n: usize, h: usize, w: usize) -> Tensor<F> {
    let c = m.nrows();
    m.into_shape_with_order((c, n, h, w))
        .expect("contiguous")
        .permuted_axes([1, 0, 2, 3])
        .as_standard_layout()
        .into_owned()
}

fn weight_matrix<F: Float>(p: &Param<F>) -> ArrayView2<'_, F> {
    let rows = p.value.shape()[0];
    let cols = p.value.len() / rows;
    p.value
        .view()
        .into_shape_with_order((rows, cols))
        .expect("parameters are contiguous")
        .into_dimensionality::<Ix2>()
        .expect("2-D")
}

fn effective_weight<F: Float>(
    weight: &Param<F>,
    spectral: &mut Option<SpectralNorm<F>>,
    mode: Mode,
) -> (Array2<F>, Option<SnCache<F>>) {
    let w = weight_matrix(weight);
    match spectral {
        Some(sn) => {
            let (w_sn, cache) = sn.forward(w, mode.update_state);
            (w_sn, Some(cache))
        }
        None => (w.to_owned(), None),
    }
}

fn accumulate_weight_grad<F: Float>(
    weight: &mut Param<F>,
    spectral: &Option<SpectralNorm<F>>,
    sn_cache: &Option<SnCache<F>>,
    grad_eff: Array2<F>,
) {
    let grad = match (spectral, sn_cache) {
        (Some(_), Some(c)) => SpectralNorm::backward(c, grad_eff.view()),
        _ => grad_eff,
    };
    let shape = weight.value.raw_dim();
    weight.grad += &grad.into_shape_with_order(shape).expect("same length");
}

/// 2-D convolution, weight `(out, in, k, k)`.
#[derive(Clone, Debug)]
pub struct Conv2d<F> {
    pub weight: Param<F>,
    pub bias: Option<Param<F>>,
    pub spectral: Option<SpectralNorm<F>>,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

pub struct ConvCache<F> {
    cols: Array2<F>,
    in_dim: (usize, usize, usize, usize),
    w_eff: Array2<F>,
    sn: Option<SnCache<F>>,
}

impl<F: Float> Conv2d<F> {
    /// Kaiming-uniform weights and biases.
    pub fn new<R: Rng + ?Sized>(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let fan_in = in_ch * kernel * kernel;
        let weight = Param::new(init::kaiming_uniform(
            &[out_ch, in_ch, kernel, kernel],
            fan_in,
            rng,
        ));
        let bias = bias.then(|| Param::new(init::kaiming_uniform(&[out_ch], fan_in, rng)));
        Conv2d {
            weight,
            bias,
            spectral: None,
            kernel,
            stride,
            pad,
        }
    }

    /// Weights drawn from `N(0, std)`, zero bias.
    pub fn normal<R: Rng + ?Sized>(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        bias: bool,
        std: f64,
        rng: &mut R,
    ) -> Self {
        let weight = Param::new(init::normal(&[out_ch, in_ch, kernel, kernel], 0.0, std, rng));
        let bias = bias.then(|| Param::zeros(&[out_ch]));
        Conv2d {
            weight,
            bias,
            spectral: None,
            kernel,
            stride,
            pad,
        }
    }

    pub fn with_spectral_norm<R: Rng + ?Sized>(mut self, rng: &mut R) -> Self {
        self.spectral = Some(SpectralNorm::new(weight_matrix(&self.weight), rng));
        self
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    /// The weight matrix actually applied in evaluation mode.
    pub fn effective_weight(&self) -> Array2<F> {
        let w = weight_matrix(&self.weight);
        match &self.spectral {
            Some(sn) => sn.normalized(w).0,
            None => w.to_owned(),
        }
    }
}

impl<F: Float> Module<F> for Conv2d<F> {
    type Cache = ConvCache<F>;

    fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> (Tensor<F>, ConvCache<F>) {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.in_channels(), "conv input channels");
        let (k, s, p) = (self.kernel, self.stride, self.pad);
        let ho = out_len(h, k, s, p);
        let wo = out_len(w, k, s, p);
        let (w_eff, sn) = effective_weight(&self.weight, &mut self.spectral, mode);
        let cols = im2col(x.view(), k, s, p);
        let mut y = w_eff.dot(&cols);
        if let Some(b) = &self.bias {
            for (mut row, &bv) in y.axis_iter_mut(Axis(0)).zip(b.value.iter()) {
                row += bv;
            }
        }
        let y = batch_first(y, n, ho, wo);
        (
            y,
            ConvCache {
                cols,
                in_dim: (n, c, h, w),
                w_eff,
                sn,
            },
        )
    }

    fn backward(&mut self, cache: &ConvCache<F>, grad: &Tensor<F>) -> Tensor<F> {
        let gm = channels_first(grad);
        let gw = gm.dot(&cache.cols.t());
        accumulate_weight_grad(&mut self.weight, &self.spectral, &cache.sn, gw);
        if let Some(b) = &mut self.bias {
            b.grad += &gm.sum_axis(Axis(1)).into_dyn();
        }
        let dcols = cache.w_eff.t().dot(&gm);
        col2im(dcols.view(), cache.in_dim, self.kernel, self.stride, self.pad)
    }

    fn visit(&mut self, prefix: &str, v: &mut dyn Visitor<F>) {
        v.param(&join(prefix, "weight"), &mut self.weight);
        if let Some(b) = &mut self.bias {
            v.param(&join(prefix, "bias"), b);
        }
        if let Some(sn) = &mut self.spectral {
            sn.visit(prefix, v);
        }
    }
}

/// Transposed 2-D convolution, weight `(in, out, k, k)`.
///
/// Output size is `(h - 1) * stride - 2 * pad + k`.
#[derive(Clone, Debug)]
pub struct ConvTranspose2d<F> {
    pub weight: Param<F>,
    pub bias: Option<Param<F>>,
    pub spectral: Option<SpectralNorm<F>>,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

pub struct ConvTCache<F> {
    x_mat: Array2<F>,
    in_dim: (usize, usize, usize, usize),
    out_dim: (usize, usize, usize, usize),
    w_eff: Array2<F>,
    sn: Option<SnCache<F>>,
}

impl<F: Float> ConvTranspose2d<F> {
    pub fn new<R: Rng + ?Sized>(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let fan_in = out_ch * kernel * kernel;
        let weight = Param::new(init::kaiming_uniform(
            &[in_ch, out_ch, kernel, kernel],
            fan_in,
            rng,
        ));
        let bias = bias.then(|| Param::new(init::kaiming_uniform(&[out_ch], fan_in, rng)));
        ConvTranspose2d {
            weight,
            bias,
            spectral: None,
            kernel,
            stride,
            pad,
        }
    }

    pub fn with_spectral_norm<R: Rng + ?Sized>(mut self, rng: &mut R) -> Self {
        self.spectral = Some(SpectralNorm::new(weight_matrix(&self.weight), rng));
        self
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn effective_weight(&self) -> Array2<F> {
        let w = weight_matrix(&self.weight);
        match &self.spectral {
            Some(sn) => sn.normalized(w).0,
            None => w.to_owned(),
        }
    }
}

impl<F: Float> Module<F> for ConvTranspose2d<F> {
    type Cache = ConvTCache<F>;

    fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> (Tensor<F>, ConvTCache<F>) {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.in_channels(), "transposed conv input channels");
        let (k, s, p) = (self.kernel, self.stride, self.pad);
        let ho = (h - 1) * s + k - 2 * p;
        let wo = (w - 1) * s + k - 2 * p;
        let co = self.out_channels();
        let (w_eff, sn) = effective_weight(&self.weight, &mut self.spectral, mode);
        let x_mat = channels_first(x);
        let cols = w_eff.t().dot(&x_mat);
        let mut y = col2im(cols.view(), (n, co, ho, wo), k, s, p);
        if let Some(b) = &self.bias {
            for mut sample in y.outer_iter_mut() {
                for (mut plane, &bv) in sample.outer_iter_mut().zip(b.value.iter()) {
                    plane += bv;
                }
            }
        }
        (
            y,
            ConvTCache {
                x_mat,
                in_dim: (n, c, h, w),
                out_dim: (n, co, ho, wo),
                w_eff,
                sn,
            },
        )
    }

    fn backward(&mut self, cache: &ConvTCache<F>, grad: &Tensor<F>) -> Tensor<F> {
        assert_eq!(grad.dim(), cache.out_dim, "transposed conv grad shape");
        let dcols = im2col(grad.view(), self.kernel, self.stride, self.pad);
        let gw = cache.x_mat.dot(&dcols.t());
        accumulate_weight_grad(&mut self.weight, &self.spectral, &cache.sn, gw);
        if let Some(b) = &mut self.bias {
            let db = grad.sum_axis(Axis(3)).sum_axis(Axis(2)).sum_axis(Axis(0));
            b.grad += &db.into_dyn();
        }
        let dx = cache.w_eff.dot(&dcols);
        let (n, _, h, w) = cache.in_dim;
        batch_first(dx, n, h, w)
    }

    fn visit(&mut self, prefix: &str, v: &mut dyn Visitor<F>) {
        v.param(&join(prefix, "weight"), &mut self.weight);
        if let Some(b) = &mut self.bias {
            v.param(&join(prefix, "bias"), b);
        }
        if let Some(sn) = &mut self.spectral {
            sn.visit(prefix, v);
        }
    }
}

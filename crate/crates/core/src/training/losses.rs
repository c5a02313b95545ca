//! Loss terms as pure functions of network outputs. Each returns the value
//! (as `f64`) and the gradient with respect to its tensor input.
//!
//! Images are in the networks' `[-1, 1]` range; reconstruction norms are
//! measured in `[0, 1]` image space, summed over pixels and averaged over
//! the batch. Discriminator terms take logits and clamp the probability
//! inside every logarithm to `[1e-8, 1]`.

use crate::nn::{for_each_param, sigmoid, Module, Tensor};
use crate::{Error, Float, Result};
use ndarray::Zip;

pub const LOG_EPS: f64 = 1e-8;

fn batch<F: Float>(t: &Tensor<F>) -> f64 {
    t.dim().0.max(1) as f64
}

/// `weight * mean_i sum_pixels |x - xhat| / 2`.
pub fn recon_l1<F: Float>(x: &Tensor<F>, xhat: &Tensor<F>, weight: f64) -> (f64, Tensor<F>) {
    let b = batch(x);
    let value = Zip::from(x).and(xhat).fold(0.0, |acc, &a, &r| acc + (a - r).as_f64().abs() / 2.0);
    let g = F::of(weight / (2.0 * b));
    let grad = Zip::from(x).and(xhat).map_collect(|&a, &r| {
        if r > a {
            g
        } else if r < a {
            -g
        } else {
            F::zero()
        }
    });
    (weight * value / b, grad)
}

/// `weight * mean_i sum_pixels ((x - xhat) / 2)^2`.
pub fn recon_l2<F: Float>(x: &Tensor<F>, xhat: &Tensor<F>, weight: f64) -> (f64, Tensor<F>) {
    let b = batch(x);
    let value = Zip::from(x).and(xhat).fold(0.0, |acc, &a, &r| acc + ((a - r).as_f64() / 2.0).powi(2));
    let g = F::of(weight / (2.0 * b));
    let grad = Zip::from(x).and(xhat).map_collect(|&a, &r| (r - a) * g);
    (weight * value / b, grad)
}

/// Mean squared error over every element.
pub fn mse<F: Float>(x: &Tensor<F>, xhat: &Tensor<F>) -> (f64, Tensor<F>) {
    let n = x.len().max(1) as f64;
    let value = Zip::from(x).and(xhat).fold(0.0, |acc, &a, &r| acc + (a - r).as_f64().powi(2));
    let g = F::of(2.0 / n);
    (value / n, Zip::from(x).and(xhat).map_collect(|&a, &r| (r - a) * g))
}

/// `weight * mean(-log sigmoid(logit))`.
pub fn neg_log<F: Float>(logits: &Tensor<F>, weight: f64) -> (f64, Tensor<F>) {
    let b = batch(logits);
    let mut value = 0.0;
    let grad = logits.mapv(|l| {
        let p = sigmoid(l.as_f64());
        value += -p.clamp(LOG_EPS, 1.0).ln();
        F::of(if p >= LOG_EPS { -(1.0 - p) * weight / b } else { 0.0 })
    });
    (weight * value / b, grad)
}

/// `weight * mean(-log(1 - sigmoid(logit)))`.
pub fn neg_log1m<F: Float>(logits: &Tensor<F>, weight: f64) -> (f64, Tensor<F>) {
    let b = batch(logits);
    let mut value = 0.0;
    let grad = logits.mapv(|l| {
        let q = sigmoid(-l.as_f64());
        value += -q.clamp(LOG_EPS, 1.0).ln();
        F::of(if q >= LOG_EPS { (1.0 - q) * weight / b } else { 0.0 })
    });
    (weight * value / b, grad)
}

/// `weight * mean(output)`, used by the Wasserstein critic and generator.
pub fn mean_output<F: Float>(out: &Tensor<F>, weight: f64) -> (f64, Tensor<F>) {
    let b = batch(out);
    let value = out.iter().map(|v| v.as_f64()).sum::<f64>();
    (weight * value / b, Tensor::from_elem(out.dim(), F::of(weight / b)))
}

/// `KL(N(m, diag s^2) || N(0, I)) = sum_i (s_i^2 + m_i^2 - 1) / 2 - log s_i`.
pub fn kl_analytic(m: &[f64], s: &[f64]) -> Result<f64> {
    if m.len() != s.len() {
        return Err(Error::shape(format!("{} entries", m.len()), format!("{} entries", s.len())));
    }
    let mut kl = 0.0;
    for (&mi, &si) in m.iter().zip(s) {
        if !(si > 0.0) {
            return Err(Error::Invalid(format!("standard deviation {si} is not positive")));
        }
        kl += (si * si + mi * mi - 1.0) / 2.0 - si.ln();
    }
    Ok(kl)
}

/// Batch mean of [`kl_analytic`] with gradients for `m` and `s`.
pub fn kl_term<F: Float>(m: &Tensor<F>, s: &Tensor<F>) -> Result<(f64, Tensor<F>, Tensor<F>)> {
    let b = batch(m);
    let mut value = 0.0;
    for (mr, sr) in m.outer_iter().zip(s.outer_iter()) {
        let mv: Vec<f64> = mr.iter().map(|v| v.as_f64()).collect();
        let sv: Vec<f64> = sr.iter().map(|v| v.as_f64()).collect();
        value += kl_analytic(&mv, &sv)?;
    }
    let gm = m.mapv(|v| F::of(v.as_f64() / b));
    let gs = s.mapv(|v| {
        let v = v.as_f64();
        F::of((v - 1.0 / v) / b)
    });
    Ok((value / b, gm, gs))
}

/// Mean squared distance to the center, `mean_i |f_i - o|^2`.
pub fn svdd_distance<F: Float>(features: &Tensor<F>, center: &[F]) -> (f64, Tensor<F>) {
    let b = batch(features);
    let mut value = 0.0;
    let mut grad = features.clone();
    for mut row in grad.outer_iter_mut() {
        for (v, &c) in row.iter_mut().zip(center) {
            let d = *v - c;
            value += d.as_f64().powi(2);
            *v = d * F::of(2.0 / b);
        }
    }
    (value / b, grad)
}

/// `lambda / 2 * sum theta^2`; adds `lambda * theta` to every gradient.
pub fn weight_decay<F: Float, M: Module<F> + ?Sized>(module: &mut M, lambda: f64) -> f64 {
    let mut sq = 0.0;
    let l = F::of(lambda);
    for_each_param(module, |_, p| {
        sq += p.value.iter().map(|v| v.as_f64().powi(2)).sum::<f64>();
        p.grad.zip_mut_with(&p.value, |g, &v| *g += l * v);
    });
    lambda / 2.0 * sq
}

/// Sum of per-image squared differences, averaged over the batch, with the
/// gradient on `b`. Used for feature matching.
pub fn sum_sq_diff<F: Float>(a: &Tensor<F>, b: &Tensor<F>, weight: f64) -> (f64, Tensor<F>) {
    let n = batch(a);
    let value = Zip::from(a).and(b).fold(0.0, |acc, &x, &y| acc + (x - y).as_f64().powi(2));
    let g = F::of(2.0 * weight / n);
    (weight * value / n, Zip::from(a).and(b).map_collect(|&x, &y| (y - x) * g))
}

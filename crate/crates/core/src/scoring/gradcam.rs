use crate::data::resize_bilinear;
use crate::networks::{Discriminator, GRADCAM_LAYER, IMAGE_SIZE};
use crate::nn::{zero_grad, Mode, Module, Tensor};
use crate::{Error, Float, Result};
use ndarray::{Array2, ArrayView3, Axis};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapSource {
    SaliencyOnX,
    SaliencyOnXhat,
    Combined,
}

/// Non-negative attention map at image resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributionMap {
    pub values: Array2<f64>,
    pub source: MapSource,
}

impl AttributionMap {
    pub fn zeros(source: MapSource) -> Self {
        AttributionMap {
            values: Array2::zeros((IMAGE_SIZE, IMAGE_SIZE)),
            source,
        }
    }
}

/// GradCAM++ map of one sample at feature resolution, from the activations
/// `a` `(k, h, w)`, the logit gradients `g` with respect to them, and the
/// logit itself.
///
/// The target is `y = exp(logit)`. Past a rectified layer the logit is
/// piecewise linear in `a`, so the second and third derivatives of `y` are
/// `exp(logit) g^2` and `exp(logit) g^3`, and
/// `alpha = g^2 / (2 g^2 + sum(a) g^3)`. Points where the denominator
/// vanishes get `alpha = 0`.
pub fn gradcampp_map(a: ArrayView3<f64>, g: ArrayView3<f64>, logit: f64) -> Result<Array2<f64>> {
    if a.dim() != g.dim() {
        return Err(Error::shape(format!("{:?}", a.dim()), format!("{:?}", g.dim())));
    }
    let (_, h, w) = a.dim();
    let dy = logit.exp();
    let mut sm = Array2::<f64>::zeros((h, w));
    for (ak, gk) in a.outer_iter().zip(g.outer_iter()) {
        let sum_a = ak.sum();
        let weight: f64 = gk
            .iter()
            .map(|&gv| {
                let g2 = gv * gv;
                let denom = 2.0 * g2 + sum_a * g2 * gv;
                let alpha = if denom != 0.0 { g2 / denom } else { 0.0 };
                alpha * (dy * gv).max(0.0)
            })
            .sum();
        if weight != 0.0 {
            sm.scaled_add(weight, &ak);
        }
    }
    sm.mapv_inplace(|v| v.max(0.0));
    Ok(sm)
}

/// Activations of the target layer, logits, and logit gradients with
/// respect to those activations, all in evaluation mode. Parameter
/// gradients accumulated on the way are cleared.
pub fn target_layer_gradients<F: Float>(
    d: &mut Discriminator<F>,
    x: &Tensor<F>,
    layer: &str,
) -> Result<(Tensor<F>, Vec<f64>, Tensor<F>)> {
    let (front, rest) = d.split(layer)?;
    let (act, _) = d.features.forward_range(x, front, Mode::EVAL);
    let (logit, cache) = d.forward_from(&act, rest, Mode::EVAL);
    let g = d.backward(&cache, &Tensor::from_elem(logit.dim(), F::one()));
    zero_grad(d);
    Ok((act, logit.iter().map(|v| v.as_f64()).collect(), g))
}

/// GradCAM++ saliency of every image in `x` at the last rectified
/// convolution of `d`, upsampled bilinearly to image resolution.
pub fn gradcampp_saliency<F: Float>(
    d: &mut Discriminator<F>,
    x: &Tensor<F>,
    source: MapSource,
) -> Result<Vec<AttributionMap>> {
    let (act, logits, g) = target_layer_gradients(d, x, GRADCAM_LAYER)?;
    let act = act.mapv(|v| v.as_f64());
    let g = g.mapv(|v| v.as_f64());
    act.axis_iter(Axis(0))
        .zip(g.axis_iter(Axis(0)))
        .zip(logits)
        .map(|((a, gi), l)| {
            let sm = gradcampp_map(a, gi, l)?;
            Ok(AttributionMap {
                values: resize_bilinear(&sm, IMAGE_SIZE, IMAGE_SIZE),
                source,
            })
        })
        .collect()
}

/// `M = SM(x) + SM(xhat)`.
pub fn combined_map(on_x: &AttributionMap, on_xhat: &AttributionMap) -> Result<AttributionMap> {
    if on_x.values.dim() != on_xhat.values.dim() {
        return Err(Error::shape(
            format!("{:?}", on_x.values.dim()),
            format!("{:?}", on_xhat.values.dim()),
        ));
    }
    Ok(AttributionMap {
        values: &on_x.values + &on_xhat.values,
        source: MapSource::Combined,
    })
}

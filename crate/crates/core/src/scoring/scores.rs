use super::gradcam::{combined_map, gradcampp_saliency, AttributionMap, MapSource};
use super::records::{ScoreRecord, ScoreType, SeedTag};
use crate::data::{Frame, FrameRef, Label};
use crate::networks::{images_to_tensor, tensor_to_images, ArchitectureTag, Model, NetworkBundle};
use crate::nn::{Mode, Module, Tensor};
use crate::{Error, Float, Result};
use ndarray::Array2;

/// Maps with squared norm below this fall back to a uniform map.
pub const MAP_NORM_EPS: f64 = 1e-12;

fn same_shape(a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::shape(format!("{:?}", a.dim()), format!("{:?}", b.dim())));
    }
    Ok(())
}

/// `|x - xhat|^2`, images in `[0, 1]`.
pub fn score_rec(x: &Array2<f64>, xhat: &Array2<f64>) -> Result<f64> {
    same_shape(x, xhat)?;
    Ok(ndarray::Zip::from(x).and(xhat).fold(0.0, |acc, &a, &b| acc + (a - b) * (a - b)))
}

/// `1 - D(x)` from the discriminator probability.
pub fn score_discr(probability: f64) -> f64 {
    1.0 - probability
}

/// `|M * (x - xhat)|^2 / |M|^2`; a map with (numerically) zero norm is
/// replaced by its uniform limit, the mean squared residual.
pub fn score_attn(x: &Array2<f64>, xhat: &Array2<f64>, map: &AttributionMap) -> Result<f64> {
    same_shape(x, xhat)?;
    same_shape(x, &map.values)?;
    let norm: f64 = map.values.iter().map(|m| m * m).sum();
    if norm < MAP_NORM_EPS {
        return Ok(score_rec(x, xhat)? / x.len() as f64);
    }
    let weighted = ndarray::Zip::from(x)
        .and(xhat)
        .and(&map.values)
        .fold(0.0, |acc, &a, &b, &m| acc + (m * (a - b)).powi(2));
    Ok(weighted / norm)
}

/// Everything computed for one frame by one model.
#[derive(Clone, Debug)]
pub struct FrameEvaluation {
    pub frame: FrameRef,
    pub label: Label,
    pub scores: Vec<(ScoreType, f64)>,
    /// Reconstruction in `[0, 1]`, for models that produce one.
    pub reconstruction: Option<Array2<f64>>,
    /// Combined attention map, for models with a discriminator.
    pub map: Option<AttributionMap>,
}

impl FrameEvaluation {
    pub fn score(&self, t: ScoreType) -> Option<f64> {
        self.scores.iter().find(|(k, _)| *k == t).map(|s| s.1)
    }
}

struct BatchOut {
    scores: Vec<Vec<(ScoreType, f64)>>,
    recon: Option<Vec<Array2<f64>>>,
    maps: Option<Vec<AttributionMap>>,
}

fn adversarial<F: Float>(
    images: &[Array2<f64>],
    xhat_t: &Tensor<F>,
    probs: Vec<f64>,
    disc: &mut crate::networks::Discriminator<F>,
    x: &Tensor<F>,
) -> Result<BatchOut> {
    let xhat = tensor_to_images(xhat_t);
    let on_x = gradcampp_saliency(disc, x, MapSource::SaliencyOnX)?;
    let on_hat = gradcampp_saliency(disc, xhat_t, MapSource::SaliencyOnXhat)?;
    let mut scores = Vec::with_capacity(images.len());
    let mut maps = Vec::with_capacity(images.len());
    for i in 0..images.len() {
        let m = combined_map(&on_x[i], &on_hat[i])?;
        scores.push(vec![
            (ScoreType::Rec, score_rec(&images[i], &xhat[i])?),
            (ScoreType::Discr, score_discr(probs[i])),
            (ScoreType::Attn, score_attn(&images[i], &xhat[i], &m)?),
        ]);
        maps.push(m);
    }
    Ok(BatchOut {
        scores,
        recon: Some(xhat),
        maps: Some(maps),
    })
}

fn score_batch<F: Float>(model: &mut Model<F>, images: &[Array2<f64>], feature_weight: f64) -> Result<BatchOut> {
    let views: Vec<_> = images.iter().map(|i| i.view()).collect();
    let x = images_to_tensor::<F>(&views)?;
    let mode = Mode::EVAL;
    match model {
        Model::AlphaGan(m) => {
            let xhat = m.reconstruct(&x, mode)?;
            let probs = m.discriminate(&x, mode)?;
            adversarial(images, &xhat, probs, &mut m.discriminator, &x)
        }
        Model::VaeGan(m) => {
            let xhat = m.reconstruct(&x, mode)?;
            let probs = m.discriminate(&x, mode)?;
            adversarial(images, &xhat, probs, &mut m.discriminator, &x)
        }
        Model::Dcae(m) => {
            let (z, _) = m.encoder.forward(&x, mode);
            let xhat = tensor_to_images(&m.decoder.forward(&z, mode).0);
            let scores = images
                .iter()
                .zip(&xhat)
                .map(|(a, b)| {
                    let rec = score_rec(a, b)?;
                    Ok(vec![(ScoreType::Rec, rec), (ScoreType::Baseline, rec.sqrt())])
                })
                .collect::<Result<_>>()?;
            Ok(BatchOut {
                scores,
                recon: Some(xhat),
                maps: None,
            })
        }
        Model::DeepSvdd(m) => {
            let (f, _) = m.net.forward(&x, mode);
            let scores = f
                .outer_iter()
                .map(|row| {
                    let d: f64 = row
                        .iter()
                        .zip(m.center.iter())
                        .map(|(v, c)| (v.as_f64() - c.as_f64()).powi(2))
                        .sum();
                    vec![(ScoreType::Baseline, d)]
                })
                .collect();
            Ok(BatchOut {
                scores,
                recon: None,
                maps: None,
            })
        }
        Model::FAnoGan(m) => {
            let (z, _) = m.encoder.forward(&x, mode);
            let (xhat_t, _) = m.generator.forward(&z, mode);
            let (hx, _) = m.critic.forward_features(&x, mode);
            let (hh, _) = m.critic.forward_features(&xhat_t, mode);
            let xhat = tensor_to_images(&xhat_t);
            let mut scores = Vec::with_capacity(images.len());
            for (i, (a, b)) in hx.outer_iter().zip(hh.outer_iter()).enumerate() {
                let feat: f64 = a.iter().zip(b.iter()).map(|(p, q)| (*p - *q).as_f64().powi(2)).sum();
                let s = score_rec(&images[i], &xhat[i])? + feature_weight * feat;
                scores.push(vec![(ScoreType::Baseline, s)]);
            }
            Ok(BatchOut {
                scores,
                recon: Some(xhat),
                maps: None,
            })
        }
    }
}

/// Scores every frame with batch-norm in evaluation mode. `feature_weight`
/// is the f-AnoGAN feature-residual weight; other models ignore it.
pub fn evaluate_frames<F: Float>(
    bundle: &mut NetworkBundle<F>,
    frames: &[Frame],
    batch_size: usize,
    feature_weight: f64,
) -> Result<Vec<FrameEvaluation>> {
    let mut out = Vec::with_capacity(frames.len());
    for chunk in frames.chunks(batch_size.max(1)) {
        let images: Vec<Array2<f64>> = chunk.iter().map(|f| f.pixels().clone()).collect();
        let b = score_batch(&mut bundle.model, &images, feature_weight)?;
        let mut recon = b.recon.map(|v| v.into_iter());
        let mut maps = b.maps.map(|v| v.into_iter());
        for (f, scores) in chunk.iter().zip(b.scores) {
            if let Some((t, v)) = scores.iter().find(|(_, v)| !v.is_finite()) {
                return Err(Error::Invalid(format!("non-finite {t} score {v} for frame {}", f.frame_ref())));
            }
            out.push(FrameEvaluation {
                frame: f.frame_ref(),
                label: f.label(),
                scores,
                reconstruction: recon.as_mut().and_then(|r| r.next()),
                map: maps.as_mut().and_then(|m| m.next()),
            });
        }
    }
    Ok(out)
}

/// One [`ScoreRecord`] per frame and score type.
pub fn to_records(evals: &[FrameEvaluation], model: ArchitectureTag, seed: SeedTag) -> Vec<ScoreRecord> {
    evals
        .iter()
        .flat_map(|e| {
            e.scores.iter().map(move |&(score_type, raw)| ScoreRecord {
                frame: e.frame.clone(),
                label: e.label,
                model,
                seed,
                score_type,
                raw,
                normalized: None,
            })
        })
        .collect()
}

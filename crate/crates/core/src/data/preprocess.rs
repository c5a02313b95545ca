use crate::networks::IMAGE_SIZE;
use crate::{Error, Result};
use ndarray::Array2;

#[derive(Clone, Debug, PartialEq)]
pub struct Preprocessed {
    pub pixels: Array2<f64>,
    /// Set when the source range was degenerate and the output is all zeros.
    pub degenerate_range: bool,
}

/// Bilinear resampling with half-pixel centers and edge clamping.
pub fn resize_bilinear(img: &Array2<f64>, out_h: usize, out_w: usize) -> Array2<f64> {
    let (h, w) = img.dim();
    if (h, w) == (out_h, out_w) {
        return img.clone();
    }
    let coord = |i: usize, n_in: usize, n_out: usize| {
        let s = ((i as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(n_in - 1);
        (i0, i1, s - i0 as f64)
    };
    Array2::from_shape_fn((out_h, out_w), |(i, j)| {
        let (y0, y1, fy) = coord(i, h, out_h);
        let (x0, x1, fx) = coord(j, w, out_w);
        let top = img[[y0, x0]] * (1.0 - fx) + img[[y0, x1]] * fx;
        let bottom = img[[y1, x0]] * (1.0 - fx) + img[[y1, x1]] * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

/// Resizes to 64x64 and maps `source_range` affinely onto `[0, 1]`. Values
/// outside the source range are clipped.
pub fn preprocess(raw: &Array2<f64>, source_range: (f64, f64)) -> Result<Preprocessed> {
    if raw.is_empty() {
        return Err(Error::Invalid("empty image".into()));
    }
    let (lo, hi) = source_range;
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(Error::Invalid(format!("invalid source range ({lo}, {hi})")));
    }
    if hi == lo {
        log::warn!("degenerate source range ({lo}, {hi}); emitting a zero image");
        return Ok(Preprocessed {
            pixels: Array2::zeros((IMAGE_SIZE, IMAGE_SIZE)),
            degenerate_range: true,
        });
    }
    let resized = resize_bilinear(raw, IMAGE_SIZE, IMAGE_SIZE);
    Ok(Preprocessed {
        pixels: resized.mapv(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)),
        degenerate_range: false,
    })
}

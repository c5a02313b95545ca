use super::{preprocess::resize_bilinear, Frame, Label};
use crate::networks::IMAGE_SIZE;
use crate::{Error, Result};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const BACKGROUND: f64 = 0.08;
const WALL: f64 = 0.72;
const CHAMBER: f64 = 0.12;
const GAIN_RANGE: (f64, f64) = (0.85, 1.15);
const HEART_AXES: (f64, f64) = (0.32, 0.35);
/// Offsets from the heart center and semi-axes of LV, RV, LA, RA, as
/// fractions of the image size.
const CHAMBERS: [((f64, f64), (f64, f64)); 4] = [
    ((0.12, -0.10), (0.09, 0.14)),
    ((-0.12, -0.10), (0.09, 0.14)),
    ((0.11, 0.15), (0.08, 0.07)),
    ((-0.11, 0.15), (0.08, 0.07)),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    pub image_size: usize,
    pub chamber_count: usize,
    /// Area factor range applied to the left ventricle of abnormal frames.
    pub left_chamber_shrink_range: (f64, f64),
    pub speckle_strength: f64,
    /// Center and scale jitter as a fraction of the image size.
    pub geometry_jitter: f64,
    /// Maximum absolute rotation in degrees.
    pub rotation_range: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            image_size: IMAGE_SIZE,
            chamber_count: 4,
            left_chamber_shrink_range: (0.05, 0.3),
            speckle_strength: 0.35,
            geometry_jitter: 0.04,
            rotation_range: 10.0,
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.left_chamber_shrink_range;
        if self.image_size == 0 {
            return Err(Error::Config("phantom image_size must be positive".into()));
        }
        if self.chamber_count != 4 {
            return Err(Error::Config("phantom chamber_count must be 4".into()));
        }
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(Error::Config(format!(
                "left_chamber_shrink_range must satisfy 0 < lo <= hi < 1, got ({lo}, {hi})"
            )));
        }
        if !(self.speckle_strength >= 0.0) || !(self.geometry_jitter >= 0.0) || !(self.rotation_range >= 0.0) {
            return Err(Error::Config(
                "speckle_strength, geometry_jitter and rotation_range must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Ellipse in normalised image coordinates (x to the right, y down, both
/// in `[0, 1]`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub a: f64,
    pub b: f64,
    pub angle: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }

    /// Analytic area in normalised units.
    pub fn area(&self) -> f64 {
        PI * self.a * self.b
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    pub heart: Ellipse,
    /// LV, RV, LA, RA.
    pub chambers: [Ellipse; 4],
    pub gain: f64,
    /// Area factor applied to the LV (1 for normal hearts).
    pub lv_factor: f64,
}

impl Geometry {
    pub fn left_ventricle(&self) -> &Ellipse {
        &self.chambers[0]
    }

    /// Pixels whose centers fall inside the left ventricle.
    pub fn lv_mask(&self, size: usize) -> Array2<bool> {
        Array2::from_shape_fn((size, size), |(i, j)| {
            let (x, y) = ((j as f64 + 0.5) / size as f64, (i as f64 + 0.5) / size as f64);
            self.chambers[0].contains(x, y)
        })
    }
}

fn sym<R: Rng + ?Sized>(rng: &mut R, r: f64) -> f64 {
    if r > 0.0 {
        rng.random_range(-r..=r)
    } else {
        0.0
    }
}

/// Draws one heart layout. Abnormal hearts get an LV whose area is scaled
/// by a factor from `left_chamber_shrink_range`, keeping its aspect ratio.
pub fn sample_geometry<R: Rng + ?Sized>(cfg: &PhantomConfig, label: Label, rng: &mut R) -> Geometry {
    let j = cfg.geometry_jitter;
    let cx = 0.5 + sym(rng, j);
    let cy = 0.5 + sym(rng, j);
    let scale = 1.0 + sym(rng, j);
    let angle = sym(rng, cfg.rotation_range).to_radians();
    let gain = rng.random_range(GAIN_RANGE.0..=GAIN_RANGE.1);
    let (s, c) = angle.sin_cos();
    let mut chambers = CHAMBERS.map(|((ox, oy), (a, b))| {
        let (ox, oy) = (ox * scale, oy * scale);
        let wobble = 1.0 + sym(rng, j);
        Ellipse {
            cx: cx + c * ox - s * oy,
            cy: cy + s * ox + c * oy,
            a: a * scale * wobble,
            b: b * scale * wobble,
            angle,
        }
    });
    let lv_factor = match label {
        Label::Normal => 1.0,
        Label::Abnormal => {
            let (lo, hi) = cfg.left_chamber_shrink_range;
            rng.random_range(lo..=hi)
        }
    };
    chambers[0].a *= lv_factor.sqrt();
    chambers[0].b *= lv_factor.sqrt();
    Geometry {
        heart: Ellipse {
            cx,
            cy,
            a: HEART_AXES.0 * scale,
            b: HEART_AXES.1 * scale,
            angle,
        },
        chambers,
        gain,
        lv_factor,
    }
}

/// Small change of view for another frame of the same subject: the
/// chamber sizes are kept, position, rotation and gain move.
pub(crate) fn perturb_view<R: Rng + ?Sized>(g: &Geometry, cfg: &PhantomConfig, rng: &mut R) -> Geometry {
    let j = cfg.geometry_jitter / 2.0;
    let (dx, dy) = (sym(rng, j), sym(rng, j));
    let dtheta = sym(rng, cfg.rotation_range / 2.0).to_radians();
    let (s, c) = dtheta.sin_cos();
    let (hx, hy) = (g.heart.cx, g.heart.cy);
    let move_e = |e: &Ellipse| {
        let (ox, oy) = (e.cx - hx, e.cy - hy);
        Ellipse {
            cx: hx + dx + c * ox - s * oy,
            cy: hy + dy + s * ox + c * oy,
            angle: e.angle + dtheta,
            ..*e
        }
    };
    Geometry {
        heart: move_e(&g.heart),
        chambers: g.chambers.each_ref().map(move_e),
        gain: rng.random_range(GAIN_RANGE.0..=GAIN_RANGE.1),
        lv_factor: g.lv_factor,
    }
}

/// Noise-free rendering at `size x size`.
pub fn render_geometry(g: &Geometry, size: usize) -> Array2<f64> {
    Array2::from_shape_fn((size, size), |(i, j)| {
        let (x, y) = ((j as f64 + 0.5) / size as f64, (i as f64 + 0.5) / size as f64);
        let base = if g.chambers.iter().any(|e| e.contains(x, y)) {
            CHAMBER
        } else if g.heart.contains(x, y) {
            WALL
        } else {
            BACKGROUND
        };
        (base * g.gain).clamp(0.0, 1.0)
    })
}

/// Multiplicative Rayleigh speckle with unit-mean factor, clipped to
/// `[0, 1]`.
pub(crate) fn apply_speckle<R: Rng + ?Sized>(img: &mut Array2<f64>, strength: f64, rng: &mut R) {
    if strength == 0.0 {
        return;
    }
    let mean = (PI / 2.0).sqrt();
    for v in img.iter_mut() {
        let u: f64 = rng.random();
        let rayleigh = (-2.0 * (1.0 - u).ln()).sqrt();
        *v = (*v * (1.0 + strength * (rayleigh - mean))).clamp(0.0, 1.0);
    }
}

pub(crate) fn render_frame<R: Rng + ?Sized>(
    g: &Geometry,
    cfg: &PhantomConfig,
    rng: &mut R,
) -> Array2<f64> {
    let mut img = render_geometry(g, cfg.image_size);
    apply_speckle(&mut img, cfg.speckle_strength, rng);
    if cfg.image_size != IMAGE_SIZE {
        img = resize_bilinear(&img, IMAGE_SIZE, IMAGE_SIZE);
    }
    img.mapv(|v| v.clamp(0.0, 1.0))
}

/// `n_normal` normal frames followed by `n_abnormal` abnormal ones. Every
/// frame is its own subject, named after the seed so pools drawn with
/// different seeds never share subjects.
pub fn generate_phantoms(
    cfg: &PhantomConfig,
    n_normal: usize,
    n_abnormal: usize,
    seed: u64,
) -> Result<Vec<Frame>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frames = Vec::with_capacity(n_normal + n_abnormal);
    for i in 0..n_normal + n_abnormal {
        let label = if i < n_normal { Label::Normal } else { Label::Abnormal };
        let g = sample_geometry(cfg, label, &mut rng);
        let img = render_frame(&g, cfg, &mut rng);
        let prefix = if label.is_abnormal() { "a" } else { "n" };
        frames.push(Frame::new(img, format!("s{seed}-{prefix}{i:05}"), 0, label)?);
    }
    Ok(frames)
}

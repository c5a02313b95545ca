use super::report::{sorted_scores, EvalReport};
use crate::data::{Frame, FrameRef};
use crate::metrics::{average_scores_across_seeds, roc_auc, youden_point};
use crate::scoring::{FrameEvaluation, ScoreRecord};
use crate::Result;
use image::{Rgb, RgbImage};
use ndarray::Array2;
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const HISTOGRAM_BINS: usize = 20;

/// Per-class counts of scores in `[0, 1]` over equal-width bins; the last
/// bin is closed.
pub fn histogram(scores: &[f64], labels: &[bool], bins: usize) -> Vec<(f64, f64, usize, usize)> {
    let mut rows: Vec<(f64, f64, usize, usize)> = (0..bins)
        .map(|b| (b as f64 / bins as f64, (b + 1) as f64 / bins as f64, 0, 0))
        .collect();
    for (&s, &abnormal) in scores.iter().zip(labels) {
        let b = ((s.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        if abnormal {
            rows[b].3 += 1;
        } else {
            rows[b].2 += 1;
        }
    }
    rows
}

/// Blue-cyan-yellow-red ramp for `t` in `[0, 1]`.
fn jet(t: f64) -> [f64; 3] {
    let t = t.clamp(0.0, 1.0);
    let c = |x: f64| (1.5 - (4.0 * t - x).abs()).clamp(0.0, 1.0);
    [c(3.0), c(2.0), c(1.0)]
}

/// Grayscale frame blended with a colour-mapped attention map scaled to
/// its maximum. Without a map (or an all-zero one) the frame is written
/// unchanged.
pub fn overlay(pixels: &Array2<f64>, map: Option<&Array2<f64>>) -> RgbImage {
    let (h, w) = pixels.dim();
    let max = map.map_or(0.0, |m| m.iter().copied().fold(0.0, f64::max));
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let g = pixels[[y as usize, x as usize]].clamp(0.0, 1.0);
        let (alpha, col) = match map {
            Some(m) if max > 0.0 => {
                let t = m[[y as usize, x as usize]] / max;
                (0.6 * t, jet(t))
            }
            _ => (0.0, [g; 3]),
        };
        let px = |c: f64| ((1.0 - alpha) * g + alpha * c).mul_add(255.0, 0.5).clamp(0.0, 255.0) as u8;
        Rgb([px(col[0]), px(col[1]), px(col[2])])
    })
}

/// The map shown for a frame: the attention map when the model has one,
/// else the squared reconstruction residual.
fn display_map(e: &FrameEvaluation, frame: &Frame) -> Option<Array2<f64>> {
    if let Some(m) = &e.map {
        return Some(m.values.clone());
    }
    e.reconstruction
        .as_ref()
        .map(|r| (frame.pixels() - r).mapv(|v| v * v))
}

fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "{header}")?;
    for r in rows {
        writeln!(f, "{r}")?;
    }
    f.flush()?;
    Ok(())
}

fn file_safe(f: &FrameRef) -> String {
    let id: String = f
        .subject_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    format!("{id}_{:03}", f.frame_index)
}

/// Writes `roc.csv`, `histogram.csv` and `confusion.csv` for the primary
/// score averaged over seeds, and attention overlays for the `top_k`
/// highest- and lowest-scoring frames of the first seed. Returns the
/// written paths.
pub fn emit_figures(
    report: &EvalReport,
    units: &[ScoreRecord],
    evals: &[FrameEvaluation],
    frames: &[Frame],
    dir: &Path,
    top_k: usize,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let primary: Vec<ScoreRecord> = units.iter().filter(|r| r.score_type == report.score_type).cloned().collect();
    let averaged = average_scores_across_seeds(&primary)?;
    let (_, scores, labels) = sorted_scores(&averaged);
    let curve = roc_auc(&scores, &labels)?;

    let p = dir.join("roc.csv");
    let rows = (0..curve.fpr.len()).map(|i| {
        let t = curve.thresholds.get(i).copied().unwrap_or(f64::INFINITY);
        format!("{t},{},{}", curve.fpr[i], curve.tpr[i])
    });
    write_csv(&p, "threshold,fpr,tpr", rows)?;
    written.push(p);

    let p = dir.join("histogram.csv");
    let rows = histogram(&scores, &labels, HISTOGRAM_BINS)
        .into_iter()
        .map(|(lo, hi, n, a)| format!("{lo},{hi},{n},{a}"));
    write_csv(&p, "bin_lo,bin_hi,normal,abnormal", rows)?;
    written.push(p);

    let op = youden_point(&curve, &scores, &labels)?;
    let c = op.confusion;
    let p = dir.join("confusion.csv");
    write_csv(
        &p,
        "actual,predicted_normal,predicted_abnormal",
        [format!("normal,{},{}", c.tn, c.fp), format!("abnormal,{},{}", c.fn_, c.tp)],
    )?;
    written.push(p);

    if top_k == 0 || evals.is_empty() {
        return Ok(written);
    }
    let by_ref: BTreeMap<FrameRef, &Frame> = frames.iter().map(|f| (f.frame_ref(), f)).collect();
    let mut ranked: Vec<(&FrameEvaluation, f64)> = evals
        .iter()
        .filter_map(|e| e.score(report.score_type).map(|s| (e, s)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.frame.cmp(&b.0.frame)));
    let k = top_k.min(ranked.len());
    let odir = dir.join("overlays");
    fs::create_dir_all(&odir)?;
    let picks = ranked[..k]
        .iter()
        .enumerate()
        .map(|(i, e)| ("high", i, e))
        .chain(ranked.iter().rev().take(k).enumerate().map(|(i, e)| ("low", i, e)));
    for (tag, i, (e, _)) in picks {
        let Some(frame) = by_ref.get(&e.frame) else { continue };
        let img = overlay(frame.pixels(), display_map(e, frame).as_ref());
        let p = odir.join(format!("{tag}{:02}_{}.png", i + 1, file_safe(&e.frame)));
        img.save(&p)?;
        written.push(p);
    }
    Ok(written)
}

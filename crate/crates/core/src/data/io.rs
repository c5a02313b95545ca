use super::preprocess::preprocess;
use super::{Frame, Label};
use crate::{Error, Result};
use image::{GrayImage, Luma};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub frame_index: usize,
    pub label: Label,
    pub path: String,
}

/// Reads a PNG as grayscale with values in `[0, 1]` (any bit depth).
pub fn read_png(path: &Path) -> Result<Array2<f64>> {
    let img = image::open(path)?.to_luma32f();
    let (w, h) = img.dimensions();
    Ok(Array2::from_shape_fn((h as usize, w as usize), |(i, j)| {
        img.get_pixel(j as u32, i as u32).0[0] as f64
    }))
}

/// Writes an 8-bit grayscale PNG; values are clipped to `[0, 1]`.
pub fn write_png(pixels: &Array2<f64>, path: &Path) -> Result<()> {
    let (h, w) = pixels.dim();
    let img = GrayImage::from_fn(w as u32, h as u32, |x, y| {
        Luma([(pixels[[y as usize, x as usize]].clamp(0.0, 1.0) * 255.0).round() as u8])
    });
    img.save(path)?;
    Ok(())
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    v.sort();
    Ok(v)
}

fn is_png(p: &Path) -> bool {
    p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Loads `dir/normal` and `dir/abnormal`. Images directly inside a label
/// folder are single-frame subjects named after the file; subfolders are
/// subjects whose frames are indexed in file-name order.
pub fn load_folder(dir: &Path) -> Result<Vec<Frame>> {
    let mut frames = Vec::new();
    for label in [Label::Normal, Label::Abnormal] {
        let sub = dir.join(label.as_str());
        if !sub.is_dir() {
            continue;
        }
        for entry in sorted_entries(&sub)? {
            if entry.is_dir() {
                let subject = stem(&entry);
                let files = sorted_entries(&entry)?.into_iter().filter(|p| is_png(p));
                for (k, f) in files.enumerate() {
                    frames.push(load_one(&f, &subject, k, label)?);
                }
            } else if is_png(&entry) {
                frames.push(load_one(&entry, &stem(&entry), 0, label)?);
            }
        }
    }
    if frames.is_empty() {
        return Err(Error::Invalid(format!(
            "no PNG images under {}/normal or {}/abnormal",
            dir.display(),
            dir.display()
        )));
    }
    Ok(frames)
}

fn load_one(path: &Path, subject: &str, index: usize, label: Label) -> Result<Frame> {
    let p = preprocess(&read_png(path)?, (0.0, 1.0))?;
    Frame::new(p.pixels, subject, index, label)
}

/// Writes every frame as `<label>/<subject>/<index>.png` under `dir` plus a
/// `manifest.json` listing them.
pub fn export_frames(frames: &[Frame], dir: &Path) -> Result<Vec<ManifestEntry>> {
    let mut manifest = Vec::with_capacity(frames.len());
    for f in frames {
        let rel = PathBuf::from(f.label().as_str())
            .join(f.subject_id())
            .join(format!("{:03}.png", f.frame_index()));
        let full = dir.join(&rel);
        if let Some(parent) = full.parent() {
            fs::create_dir_all(parent)?;
        }
        write_png(f.pixels(), &full)?;
        manifest.push(ManifestEntry {
            subject_id: f.subject_id().to_string(),
            frame_index: f.frame_index(),
            label: f.label(),
            path: rel.to_string_lossy().into_owned(),
        });
    }
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

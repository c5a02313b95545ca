//! Frames, the synthetic four-chamber phantom, preprocessing, image-folder
//! I/O and the two evaluation dataset layouts.

mod datasets;
mod io;
mod phantom;
mod preprocess;

pub use datasets::{
    allocate_frame_counts, generate_subjects, make_dataset1, make_dataset2, DatasetSplit,
    Dataset2Mode,
};
pub use io::{export_frames, load_folder, read_png, write_png, ManifestEntry};
pub use phantom::{
    generate_phantoms, render_geometry, sample_geometry, Ellipse, Geometry, PhantomConfig,
};
pub use preprocess::{preprocess, resize_bilinear, Preprocessed};

use crate::networks::IMAGE_SIZE;
use crate::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Normal,
    Abnormal,
}

impl Label {
    pub fn is_abnormal(self) -> bool {
        self == Label::Abnormal
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Abnormal => "abnormal",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Label::Normal),
            "abnormal" => Ok(Label::Abnormal),
            _ => Err(Error::Invalid(format!("unknown label {s:?}"))),
        }
    }
}

/// Subject identity plus frame index; unique within a dataset.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrameRef {
    pub subject_id: String,
    pub frame_index: usize,
}

impl fmt::Display for FrameRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.subject_id, self.frame_index)
    }
}

/// One 64x64 grayscale image in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pixels: Array2<f64>,
    subject_id: String,
    frame_index: usize,
    label: Label,
}

impl Frame {
    pub fn new(
        pixels: Array2<f64>,
        subject_id: impl Into<String>,
        frame_index: usize,
        label: Label,
    ) -> Result<Self> {
        if pixels.dim() != (IMAGE_SIZE, IMAGE_SIZE) {
            return Err(Error::shape(
                format!("{IMAGE_SIZE}x{IMAGE_SIZE}"),
                format!("{}x{}", pixels.nrows(), pixels.ncols()),
            ));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Invalid(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Frame {
            pixels,
            subject_id: subject_id.into(),
            frame_index,
            label,
        })
    }

    pub fn pixels(&self) -> &Array2<f64> {
        &self.pixels
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn frame_ref(&self) -> FrameRef {
        FrameRef {
            subject_id: self.subject_id.clone(),
            frame_index: self.frame_index,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    #[test]
    fn phantoms_are_deterministic() {
        let cfg = PhantomConfig::default();
        let a = generate_phantoms(&cfg, 2, 0, 7).unwrap();
        let b = generate_phantoms(&cfg, 2, 0, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert!(a.iter().all(|f| f.label() == Label::Normal));
        assert_ne!(a[0].pixels(), a[1].pixels());
        assert_ne!(a, generate_phantoms(&cfg, 2, 0, 8).unwrap());
    }

    #[test]
    fn abnormal_left_ventricle_is_shrunk() {
        let cfg = PhantomConfig {
            speckle_strength: 0.0,
            ..Default::default()
        };
        let frame = &generate_phantoms(&cfg, 0, 1, 7).unwrap()[0];
        assert_eq!(frame.label(), Label::Abnormal);
        let g = sample_geometry(&cfg, Label::Abnormal, &mut ChaCha8Rng::seed_from_u64(7));
        let mask = g.lv_mask(IMAGE_SIZE);
        let rendered: Vec<f64> = frame
            .pixels()
            .iter()
            .zip(mask.iter())
            .filter(|(_, &m)| m)
            .map(|(&p, _)| p)
            .collect();
        // Every LV pixel is chamber-dark in the rendered frame.
        assert!(rendered.iter().all(|&p| p < 0.2));
        let measured = rendered.len() as f64 / (IMAGE_SIZE * IMAGE_SIZE) as f64;
        // Template: the same heart before the shrink, analytic area.
        let lv = g.left_ventricle();
        let template = std::f64::consts::PI * (lv.a / g.lv_factor.sqrt()) * (lv.b / g.lv_factor.sqrt());
        assert!(measured <= 0.3 * template, "{measured} vs {template}");
    }

    #[test]
    fn zero_speckle_is_pure_render() {
        let cfg = PhantomConfig {
            speckle_strength: 0.0,
            ..Default::default()
        };
        let frame = &generate_phantoms(&cfg, 1, 0, 1).unwrap()[0];
        let g = sample_geometry(&cfg, Label::Normal, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(frame.pixels(), &render_geometry(&g, IMAGE_SIZE));
    }

    #[test]
    fn phantom_config_validation() {
        let bad = |f: fn(&mut PhantomConfig)| {
            let mut c = PhantomConfig::default();
            f(&mut c);
            generate_phantoms(&c, 1, 1, 0).is_err()
        };
        assert!(bad(|c| c.image_size = 0));
        assert!(bad(|c| c.left_chamber_shrink_range = (0.2, 1.0)));
        assert!(bad(|c| c.speckle_strength = -0.1));
        let big = PhantomConfig {
            image_size: 96,
            ..Default::default()
        };
        let f = generate_phantoms(&big, 1, 0, 3).unwrap();
        assert_eq!(f[0].pixels().dim(), (64, 64));
    }

    fn pools(seed: u64) -> (Vec<Frame>, Vec<Frame>) {
        let cfg = PhantomConfig::default();
        let mut all = generate_phantoms(&cfg, 93, 93, seed).unwrap();
        let abnormal = all.split_off(93);
        (all, abnormal)
    }

    #[test]
    fn dataset1_is_balanced_and_seeded() {
        let (n, a) = pools(5);
        let d = make_dataset1(&n, &a, 93, 1).unwrap();
        assert_eq!(d.test.len(), 186);
        assert_eq!(d.test_labels().iter().filter(|&&l| l).count(), 93);
        assert!(make_dataset1(&n, &a, 0, 1).unwrap().test.is_empty());
        let s1 = make_dataset1(&n, &a, 40, 9).unwrap();
        assert_eq!(s1, make_dataset1(&n, &a, 40, 9).unwrap());
        assert_ne!(s1, make_dataset1(&n, &a, 40, 10).unwrap());
        match make_dataset1(&n, &a[..10], 40, 9) {
            Err(Error::InsufficientPool { class, needed: 40, available: 10 }) => assert_eq!(class, "abnormal"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dataset2_layouts() {
        let cfg = PhantomConfig::default();
        let normal = generate_phantoms(&cfg, 93, 0, 1).unwrap();
        let subjects = generate_subjects(&cfg, 53, 177, 2).unwrap();
        assert_eq!(subjects.len(), 53);
        assert!(subjects.values().all(|f| (1..=4).contains(&f.len())));
        assert_eq!(subjects.values().map(Vec::len).sum::<usize>(), 177);

        let all = make_dataset2(&normal, &subjects, Dataset2Mode::AllFrames, 0).unwrap();
        assert_eq!(all.test.len(), 270);
        let abnormal_groups: Vec<_> = all
            .subject_groups
            .values()
            .filter(|idx| all.test[idx[0]].label().is_abnormal())
            .collect();
        assert_eq!(abnormal_groups.len(), 53);
        let mut covered: Vec<usize> = abnormal_groups.iter().flat_map(|v| v.iter().copied()).collect();
        covered.sort_unstable();
        let expected: Vec<usize> = (0..all.test.len()).filter(|&i| all.test[i].label().is_abnormal()).collect();
        assert_eq!(covered, expected);

        let one = make_dataset2(&normal, &subjects, Dataset2Mode::OneRandomFrame, 4).unwrap();
        assert_eq!(one.test.len(), 93 + 53);
        assert_eq!(one, make_dataset2(&normal, &subjects, Dataset2Mode::OneRandomFrame, 4).unwrap());

        let singles: BTreeMap<String, Vec<Frame>> = subjects
            .iter()
            .map(|(k, v)| (k.clone(), vec![v[v.len() - 1].clone()]))
            .collect();
        for seed in 0..3 {
            let d = make_dataset2(&[], &singles, Dataset2Mode::OneRandomFrame, seed).unwrap();
            let chosen: Vec<_> = d.test.iter().cloned().collect();
            let expected: Vec<_> = singles.values().map(|v| v[0].clone()).collect();
            assert_eq!(chosen, expected);
        }

        let mut empty = BTreeMap::new();
        empty.insert("x".to_string(), Vec::new());
        assert!(matches!(
            make_dataset2(&normal, &empty, Dataset2Mode::AllFrames, 0),
            Err(Error::SubjectFrames(_, 0))
        ));
    }

    #[test]
    fn split_validation() {
        let (n, a) = pools(3);
        let d = make_dataset1(&n, &a, 10, 0).unwrap();
        assert!(d.clone().with_train(generate_phantoms(&PhantomConfig::default(), 5, 0, 99).unwrap()).is_ok());
        assert!(d.clone().with_train(vec![a[0].clone()]).is_err());
        assert!(d.clone().with_train(vec![d.test[0].clone()]).is_err());
    }

    #[test]
    fn frame_rejects_bad_pixels() {
        assert!(Frame::new(Array2::zeros((32, 32)), "s", 0, Label::Normal).is_err());
        assert!(Frame::new(Array2::from_elem((64, 64), 1.5), "s", 0, Label::Normal).is_err());
    }

    #[test]
    fn folder_export_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PhantomConfig::default();
        let mut frames = generate_phantoms(&cfg, 3, 0, 1).unwrap();
        frames.extend(generate_subjects(&cfg, 2, 5, 2).unwrap().into_values().flatten());
        let manifest = export_frames(&frames, dir.path()).unwrap();
        assert_eq!(manifest.len(), frames.len());
        assert!(dir.path().join("manifest.json").is_file());
        let loaded = load_folder(dir.path()).unwrap();
        assert_eq!(loaded.len(), frames.len());
        for (a, b) in frames.iter().zip(&loaded) {
            assert_eq!(a.frame_ref(), b.frame_ref());
            assert_eq!(a.label(), b.label());
            assert!(a.pixels().iter().zip(b.pixels().iter()).all(|(x, y)| (x - y).abs() <= 0.5 / 255.0 + 1e-6));
        }
        assert!(load_folder(tempfile::tempdir().unwrap().path()).is_err());
    }
}

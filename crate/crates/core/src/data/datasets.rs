use super::phantom::{perturb_view, render_frame, sample_geometry, PhantomConfig};
use super::{Frame, Label};
use crate::{Error, Result};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const MAX_FRAMES_PER_SUBJECT: usize = 4;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<Frame>,
    pub test: Vec<Frame>,
    /// Subject id to indices into `test`.
    pub subject_groups: BTreeMap<String, Vec<usize>>,
}

impl DatasetSplit {
    fn from_test(test: Vec<Frame>) -> Self {
        let mut subject_groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, f) in test.iter().enumerate() {
            subject_groups.entry(f.subject_id().to_string()).or_default().push(i);
        }
        DatasetSplit {
            train: Vec::new(),
            test,
            subject_groups,
        }
    }

    pub fn with_train(mut self, train: Vec<Frame>) -> Result<Self> {
        self.train = train;
        self.validate()?;
        Ok(self)
    }

    /// Training frames must be normal and no subject may appear on both
    /// sides of the split.
    pub fn validate(&self) -> Result<()> {
        if let Some(f) = self.train.iter().find(|f| f.label() != Label::Normal) {
            return Err(Error::Invalid(format!("abnormal frame {} in training set", f.frame_ref())));
        }
        let train: BTreeSet<&str> = self.train.iter().map(|f| f.subject_id()).collect();
        if let Some(f) = self.test.iter().find(|f| train.contains(f.subject_id())) {
            return Err(Error::Invalid(format!(
                "subject {} appears in both train and test",
                f.subject_id()
            )));
        }
        Ok(())
    }

    pub fn test_labels(&self) -> Vec<bool> {
        self.test.iter().map(|f| f.label().is_abnormal()).collect()
    }
}

/// Balanced frame-level test set drawn without replacement.
pub fn make_dataset1(
    normal_pool: &[Frame],
    abnormal_pool: &[Frame],
    n_per_class: usize,
    seed: u64,
) -> Result<DatasetSplit> {
    for (class, pool) in [("normal", normal_pool), ("abnormal", abnormal_pool)] {
        if pool.len() < n_per_class {
            return Err(Error::InsufficientPool {
                class,
                needed: n_per_class,
                available: pool.len(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = Vec::with_capacity(2 * n_per_class);
    for pool in [normal_pool, abnormal_pool] {
        let mut idx = sample(&mut rng, pool.len(), n_per_class).into_vec();
        idx.sort_unstable();
        test.extend(idx.into_iter().map(|i| pool[i].clone()));
    }
    Ok(DatasetSplit::from_test(test))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset2Mode {
    OneRandomFrame,
    AllFrames,
}

/// Normal frames plus abnormal subjects with 1 to 4 frames each.
pub fn make_dataset2(
    normal_frames: &[Frame],
    abnormal_subjects: &BTreeMap<String, Vec<Frame>>,
    mode: Dataset2Mode,
    seed: u64,
) -> Result<DatasetSplit> {
    for (id, frames) in abnormal_subjects {
        if frames.is_empty() || frames.len() > MAX_FRAMES_PER_SUBJECT {
            return Err(Error::SubjectFrames(id.clone(), frames.len()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = normal_frames.to_vec();
    for frames in abnormal_subjects.values() {
        match mode {
            Dataset2Mode::AllFrames => test.extend(frames.iter().cloned()),
            Dataset2Mode::OneRandomFrame => {
                let k = rng.random_range(0..frames.len());
                test.push(frames[k].clone());
            }
        }
    }
    Ok(DatasetSplit::from_test(test))
}

/// Per-subject frame counts in `1..=4` that sum to `total`.
pub fn allocate_frame_counts<R: Rng + ?Sized>(
    n_subjects: usize,
    total: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if total < n_subjects || total > MAX_FRAMES_PER_SUBJECT * n_subjects {
        return Err(Error::Config(format!(
            "{total} frames cannot be split over {n_subjects} subjects with 1 to {MAX_FRAMES_PER_SUBJECT} each"
        )));
    }
    let mut counts = vec![1; n_subjects];
    for _ in n_subjects..total {
        let open: Vec<usize> = (0..n_subjects)
            .filter(|&i| counts[i] < MAX_FRAMES_PER_SUBJECT)
            .collect();
        counts[open[rng.random_range(0..open.len())]] += 1;
    }
    Ok(counts)
}

/// Abnormal phantom subjects: all frames of a subject share one heart and
/// differ in view position, rotation, gain and speckle.
pub fn generate_subjects(
    cfg: &PhantomConfig,
    n_subjects: usize,
    total_frames: usize,
    seed: u64,
) -> Result<BTreeMap<String, Vec<Frame>>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = allocate_frame_counts(n_subjects, total_frames, &mut rng)?;
    let mut out = BTreeMap::new();
    for (s, &count) in counts.iter().enumerate() {
        let id = format!("s{seed}-subj{s:03}");
        let base = sample_geometry(cfg, Label::Abnormal, &mut rng);
        let mut frames = Vec::with_capacity(count);
        for k in 0..count {
            let g = if k == 0 { base.clone() } else { perturb_view(&base, cfg, &mut rng) };
            frames.push(Frame::new(render_frame(&g, cfg, &mut rng), id.clone(), k, Label::Abnormal)?);
        }
        out.insert(id, frames);
    }
    Ok(out)
}

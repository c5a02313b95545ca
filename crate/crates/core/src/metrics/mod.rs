//! ROC analysis, Youden operating points, the paired DeLong test and
//! aggregation over seeds.

mod delong;
mod roc;

pub use delong::{delong_paired, midranks, placements, DeLongResult};
pub use roc::{roc_auc, youden_point, Confusion, OperatingPoint, RocCurve};

use crate::data::{FrameRef, Label};
use crate::networks::ArchitectureTag;
use crate::scoring::{ScoreRecord, ScoreType, SeedTag};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
}

pub fn aggregate_seeds(values: &[f64]) -> Result<MeanStd> {
    if values.is_empty() {
        return Err(Error::Invalid("nothing to aggregate".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(MeanStd { mean, std })
}

/// Per frame, the mean over seeds of the normalised score (raw when not
/// normalised), for each `(model, score type)`. Every frame must be scored
/// by every seed.
pub fn average_scores_across_seeds(records: &[ScoreRecord]) -> Result<Vec<ScoreRecord>> {
    type Key = (ArchitectureTag, ScoreType);
    let mut seeds: BTreeMap<Key, BTreeSet<SeedTag>> = BTreeMap::new();
    let mut frames: BTreeMap<(Key, FrameRef), (Label, Vec<(SeedTag, f64, f64)>)> = BTreeMap::new();
    for r in records {
        let key = (r.model, r.score_type);
        seeds.entry(key).or_default().insert(r.seed);
        frames
            .entry((key, r.frame.clone()))
            .or_insert_with(|| (r.label, Vec::new()))
            .1
            .push((r.seed, r.raw, r.value()));
    }
    let normalized: BTreeMap<Key, bool> = seeds
        .keys()
        .map(|&k| {
            let all = records
                .iter()
                .filter(|r| (r.model, r.score_type) == k)
                .all(|r| r.normalized.is_some());
            (k, all)
        })
        .collect();
    let mut out = Vec::with_capacity(frames.len());
    for ((key, frame), (label, vals)) in frames {
        let expected = &seeds[&key];
        let present: BTreeSet<SeedTag> = vals.iter().map(|v| v.0).collect();
        if let Some(missing) = expected.difference(&present).next() {
            return Err(Error::MissingFrame {
                frame: frame.to_string(),
                seed: missing.to_string(),
            });
        }
        let k = vals.len() as f64;
        out.push(ScoreRecord {
            frame,
            label,
            model: key.0,
            seed: SeedTag::Averaged,
            score_type: key.1,
            raw: vals.iter().map(|v| v.1).sum::<f64>() / k,
            normalized: normalized[&key].then(|| vals.iter().map(|v| v.2).sum::<f64>() / k),
        });
    }
    Ok(out)
}

use crate::data::{FrameRef, Label};
use crate::networks::ArchitectureTag;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreType {
    /// Squared reconstruction residual.
    Rec,
    /// One minus the discriminator probability.
    Discr,
    /// Residual weighted by the combined GradCAM++ map.
    Attn,
    /// The baseline model's own score.
    Baseline,
}

impl ScoreType {
    pub const ALL: [ScoreType; 4] = [ScoreType::Rec, ScoreType::Discr, ScoreType::Attn, ScoreType::Baseline];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreType::Rec => "rec",
            ScoreType::Discr => "discr",
            ScoreType::Attn => "attn",
            ScoreType::Baseline => "baseline",
        }
    }

    /// Whether `model` produces this score.
    pub fn valid_for(self, model: ArchitectureTag) -> bool {
        match self {
            ScoreType::Rec => matches!(
                model,
                ArchitectureTag::AlphaGan | ArchitectureTag::VaeGan | ArchitectureTag::Dcae
            ),
            ScoreType::Discr | ScoreType::Attn => model.has_discriminator(),
            ScoreType::Baseline => !model.has_discriminator(),
        }
    }
}

impl fmt::Display for ScoreType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScoreType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown score type {s:?}")))
    }
}

/// A training seed, or the marker for scores averaged over seeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SeedTag {
    Seed(u64),
    Averaged,
}

impl fmt::Display for SeedTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeedTag::Seed(s) => write!(f, "{s}"),
            SeedTag::Averaged => f.write_str("averaged"),
        }
    }
}

impl FromStr for SeedTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "averaged" {
            return Ok(SeedTag::Averaged);
        }
        s.parse()
            .map(SeedTag::Seed)
            .map_err(|_| Error::Invalid(format!("bad seed {s:?}")))
    }
}

impl Serialize for SeedTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SeedTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One score of one frame from one model and seed.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRecord {
    pub frame: FrameRef,
    pub label: Label,
    pub model: ArchitectureTag,
    pub seed: SeedTag,
    pub score_type: ScoreType,
    pub raw: f64,
    /// Min-max normalised value, once [`normalize_scores`] has run.
    pub normalized: Option<f64>,
}

impl ScoreRecord {
    /// Normalised value if present, raw otherwise.
    pub fn value(&self) -> f64 {
        self.normalized.unwrap_or(self.raw)
    }
}

/// Min-max scaling per `(model, score type, seed)`. Returns the records and
/// the groups whose scores were constant (mapped to zero).
pub fn normalize_scores(records: &[ScoreRecord]) -> (Vec<ScoreRecord>, Vec<String>) {
    let mut ranges: BTreeMap<(ArchitectureTag, ScoreType, SeedTag), (f64, f64)> = BTreeMap::new();
    for r in records {
        let e = ranges
            .entry((r.model, r.score_type, r.seed))
            .or_insert((f64::INFINITY, f64::NEG_INFINITY));
        e.0 = e.0.min(r.raw);
        e.1 = e.1.max(r.raw);
    }
    let mut constant = Vec::new();
    for ((m, t, s), (lo, hi)) in &ranges {
        if hi <= lo {
            log::warn!("constant {t} scores for {m} seed {s}; normalised to zero");
            constant.push(format!("{m}/{t}/{s}"));
        }
    }
    let out = records
        .iter()
        .map(|r| {
            let (lo, hi) = ranges[&(r.model, r.score_type, r.seed)];
            let n = if hi > lo { (r.raw - lo) / (hi - lo) } else { 0.0 };
            ScoreRecord {
                normalized: Some(n),
                ..r.clone()
            }
        })
        .collect();
    (out, constant)
}

/// Arithmetic mean of a subject's frame scores.
pub fn fuse_subject(frame_scores: &[f64]) -> Result<f64> {
    if frame_scores.is_empty() {
        return Err(Error::Invalid("cannot fuse an empty score list".into()));
    }
    Ok(frame_scores.iter().sum::<f64>() / frame_scores.len() as f64)
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    model_tag: ArchitectureTag,
    seed: SeedTag,
    subject_id: String,
    frame_index: usize,
    label: Label,
    score_type: ScoreType,
    raw: f64,
    normalized: Option<f64>,
}

pub fn write_scores_csv(records: &[ScoreRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(CsvRow {
            model_tag: r.model,
            seed: r.seed,
            subject_id: r.frame.subject_id.clone(),
            frame_index: r.frame.frame_index,
            label: r.label,
            score_type: r.score_type,
            raw: r.raw,
            normalized: r.normalized,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scores_csv(path: &Path) -> Result<Vec<ScoreRecord>> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in rd.deserialize() {
        let row: CsvRow = row?;
        if !row.raw.is_finite() {
            return Err(Error::Invalid(format!(
                "non-finite score for {}#{}",
                row.subject_id, row.frame_index
            )));
        }
        out.push(ScoreRecord {
            frame: FrameRef {
                subject_id: row.subject_id,
                frame_index: row.frame_index,
            },
            label: row.label,
            model: row.model_tag,
            seed: row.seed,
            score_type: row.score_type,
            raw: row.raw,
            normalized: row.normalized,
        });
    }
    Ok(out)
}

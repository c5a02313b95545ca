use super::config::{Experiment, ExperimentConfig};
use crate::data::FrameRef;
use crate::metrics::{
    aggregate_seeds, average_scores_across_seeds, delong_paired, roc_auc, youden_point, DeLongResult, MeanStd,
    OperatingPoint,
};
use crate::networks::ArchitectureTag;
use crate::scoring::{fuse_subject, normalize_scores, read_scores_csv, ScoreRecord, ScoreType, SeedTag};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleCounts {
    /// `frame`, or `subject` after fusion.
    pub unit: String,
    pub total: usize,
    pub abnormal: usize,
    pub normal: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitMetrics {
    pub auc: f64,
    pub operating_point: OperatingPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreTypeReport {
    /// Keyed by seed.
    pub per_seed: BTreeMap<String, UnitMetrics>,
    pub auc: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub specificity: MeanStd,
    pub f1: MeanStd,
    /// Metrics of the per-frame mean of normalised scores over seeds.
    pub averaged: UnitMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub against: String,
    pub result: Option<DeLongResult>,
    /// Set when the test is undefined, e.g. identical rankings.
    pub error: Option<String>,
}

/// Everything one experiment run reports. Contains no timestamps, so equal
/// inputs serialise to identical bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: String,
    pub experiment: Experiment,
    pub model: ArchitectureTag,
    pub score_type: ScoreType,
    pub config: ExperimentConfig,
    pub samples: SampleCounts,
    /// SHA-256 of each seed's checkpoint, keyed by seed.
    pub checkpoints: BTreeMap<String, String>,
    /// Keyed by score type name.
    pub score_types: BTreeMap<String, ScoreTypeReport>,
    pub delong: Vec<ComparisonReport>,
    pub constant_score_groups: Vec<String>,
}

impl EvalReport {
    pub fn primary(&self) -> &ScoreTypeReport {
        &self.score_types[self.score_type.as_str()]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Replaces frame records by one record per subject holding the mean of
/// its frames' values, per `(model, score type, seed)`. The subject record
/// uses frame index 0.
pub fn fuse_records(records: &[ScoreRecord]) -> Result<Vec<ScoreRecord>> {
    type Key = (ArchitectureTag, ScoreType, SeedTag, String);
    let mut groups: BTreeMap<Key, Vec<&ScoreRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.model, r.score_type, r.seed, r.frame.subject_id.clone()))
            .or_default()
            .push(r);
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((model, score_type, seed, subject_id), rs) in groups {
        let label = rs[0].label;
        if rs.iter().any(|r| r.label != label) {
            return Err(Error::Invalid(format!("subject {subject_id} mixes labels")));
        }
        let raw: Vec<f64> = rs.iter().map(|r| r.raw).collect();
        let normalized = if rs.iter().all(|r| r.normalized.is_some()) {
            let v: Vec<f64> = rs.iter().map(|r| r.value()).collect();
            Some(fuse_subject(&v)?)
        } else {
            None
        };
        out.push(ScoreRecord {
            frame: FrameRef {
                subject_id,
                frame_index: 0,
            },
            label,
            model,
            seed,
            score_type,
            raw: fuse_subject(&raw)?,
            normalized,
        });
    }
    Ok(out)
}

/// Frame-level records of one model, normalised per seed and, for the
/// subject-level experiment, fused per subject.
pub fn evaluation_units(
    records: &[ScoreRecord],
    model: ArchitectureTag,
    experiment: Experiment,
) -> Result<(Vec<ScoreRecord>, Vec<String>)> {
    let own: Vec<ScoreRecord> = records.iter().filter(|r| r.model == model).cloned().collect();
    let (normalized, constant) = normalize_scores(&own);
    let units = if experiment == Experiment::Exp3 {
        fuse_records(&normalized)?
    } else {
        normalized
    };
    Ok((units, constant))
}

/// Scores and labels ordered by frame.
pub fn sorted_scores(records: &[ScoreRecord]) -> (Vec<FrameRef>, Vec<f64>, Vec<bool>) {
    let mut rs: Vec<&ScoreRecord> = records.iter().collect();
    rs.sort_by(|a, b| a.frame.cmp(&b.frame));
    (
        rs.iter().map(|r| r.frame.clone()).collect(),
        rs.iter().map(|r| r.value()).collect(),
        rs.iter().map(|r| r.label.is_abnormal()).collect(),
    )
}

pub fn unit_metrics(records: &[ScoreRecord]) -> Result<UnitMetrics> {
    let (_, scores, labels) = sorted_scores(records);
    let curve = roc_auc(&scores, &labels)?;
    let operating_point = youden_point(&curve, &scores, &labels)?;
    Ok(UnitMetrics {
        auc: curve.auc,
        operating_point,
    })
}

fn of_type(records: &[ScoreRecord], t: ScoreType) -> Vec<ScoreRecord> {
    records.iter().filter(|r| r.score_type == t).cloned().collect()
}

fn score_type_report(records: &[ScoreRecord]) -> Result<ScoreTypeReport> {
    let mut by_seed: BTreeMap<SeedTag, Vec<ScoreRecord>> = BTreeMap::new();
    for r in records {
        by_seed.entry(r.seed).or_default().push(r.clone());
    }
    let mut per_seed = BTreeMap::new();
    for (seed, rs) in &by_seed {
        per_seed.insert(seed.to_string(), unit_metrics(rs)?);
    }
    let collect = |f: fn(&UnitMetrics) -> f64| -> Result<MeanStd> {
        aggregate_seeds(&per_seed.values().map(f).collect::<Vec<_>>())
    };
    Ok(ScoreTypeReport {
        auc: collect(|m| m.auc)?,
        precision: collect(|m| m.operating_point.precision)?,
        recall: collect(|m| m.operating_point.recall)?,
        specificity: collect(|m| m.operating_point.specificity)?,
        f1: collect(|m| m.operating_point.f1)?,
        averaged: unit_metrics(&average_scores_across_seeds(records)?)?,
        per_seed,
    })
}

/// Aligns two averaged score sets on their frames.
fn paired(a: &[ScoreRecord], b: &[ScoreRecord]) -> Result<(Vec<f64>, Vec<f64>, Vec<bool>)> {
    let (fa, sa, la) = sorted_scores(a);
    let (fb, sb, _) = sorted_scores(b);
    if fa != fb {
        let missing = fa
            .iter()
            .find(|f| !fb.contains(f))
            .or_else(|| fb.iter().find(|f| !fa.contains(f)))
            .map_or_else(|| "?".to_string(), |f| f.to_string());
        return Err(Error::MissingFrame {
            frame: missing,
            seed: "averaged".into(),
        });
    }
    Ok((sa, sb, la))
}

fn compare(cfg: &ExperimentConfig, units: &[ScoreRecord]) -> Result<Vec<ComparisonReport>> {
    let ours = average_scores_across_seeds(&of_type(units, cfg.score_type))?;
    let mut out = Vec::new();
    for c in cfg.comparisons()? {
        let theirs = match &c.scores {
            None => of_type(units, c.score_type),
            Some(path) => {
                if !path.is_file() {
                    return Err(Error::MissingBaseline(format!("{} does not exist", path.display())));
                }
                let all = read_scores_csv(path)?;
                let rs = of_type(&all, c.score_type);
                let models: std::collections::BTreeSet<_> = rs.iter().map(|r| r.model).collect();
                let model = match models.len() {
                    0 => return Err(Error::MissingBaseline(format!("no {} scores in {}", c.score_type, path.display()))),
                    1 => *models.iter().next().unwrap(),
                    _ => return Err(Error::Config(format!("{} holds several models", path.display()))),
                };
                evaluation_units(&rs, model, cfg.experiment)?.0
            }
        };
        if theirs.is_empty() {
            return Err(Error::MissingBaseline(c.to_string()));
        }
        let theirs = average_scores_across_seeds(&theirs)?;
        let (a, b, labels) = paired(&ours, &theirs)?;
        let (result, error) = match delong_paired(&a, &b, &labels) {
            Ok(r) => (Some(r), None),
            Err(Error::DegenerateVariance) => (None, Some(Error::DegenerateVariance.to_string())),
            Err(e) => return Err(e),
        };
        out.push(ComparisonReport {
            against: c.to_string(),
            result,
            error,
        });
    }
    Ok(out)
}

/// Metrics for every score type of `cfg.model` in `records` (frame level,
/// raw), plus the configured DeLong comparisons.
pub fn evaluate_records(cfg: &ExperimentConfig, records: &[ScoreRecord]) -> Result<(EvalReport, Vec<ScoreRecord>)> {
    let (units, constant) = evaluation_units(records, cfg.model, cfg.experiment)?;
    if !units.iter().any(|r| r.score_type == cfg.score_type) {
        return Err(Error::Invalid(format!("no {} scores for {}", cfg.score_type, cfg.model)));
    }
    let mut score_types = BTreeMap::new();
    for t in ScoreType::ALL {
        let rs = of_type(&units, t);
        if !rs.is_empty() {
            score_types.insert(t.as_str().to_string(), score_type_report(&rs)?);
        }
    }
    let primary = average_scores_across_seeds(&of_type(&units, cfg.score_type))?;
    let abnormal = primary.iter().filter(|r| r.label.is_abnormal()).count();
    let report = EvalReport {
        version: crate::VERSION.to_string(),
        experiment: cfg.experiment,
        model: cfg.model,
        score_type: cfg.score_type,
        config: cfg.clone(),
        samples: SampleCounts {
            unit: if cfg.experiment == Experiment::Exp3 { "subject" } else { "frame" }.into(),
            total: primary.len(),
            abnormal,
            normal: primary.len() - abnormal,
        },
        checkpoints: BTreeMap::new(),
        score_types,
        delong: compare(cfg, &units)?,
        constant_score_groups: constant,
    };
    Ok((report, units))
}

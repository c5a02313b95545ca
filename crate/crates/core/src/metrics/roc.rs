use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

pub(crate) fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<(u64, u64)> {
    if scores.len() != labels.len() {
        return Err(Error::shape(
            format!("{} labels", scores.len()),
            format!("{} labels", labels.len()),
        ));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Invalid(format!("non-finite score {s}")));
    }
    let p = labels.iter().filter(|&&l| l).count() as u64;
    let n = labels.len() as u64 - p;
    if p == 0 || n == 0 {
        return Err(Error::SingleClass);
    }
    Ok((p, n))
}

/// ROC curve with abnormal (`true`) as the positive class and higher scores
/// more abnormal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `+inf` followed by every distinct score in descending order.
    pub thresholds: Vec<f64>,
    pub tpr: Vec<f64>,
    pub fpr: Vec<f64>,
    /// True and false positive counts at each threshold.
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub positives: u64,
    pub negatives: u64,
    pub auc: f64,
}

/// Mann-Whitney AUC, ties counting one half, plus the full threshold sweep.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    let (p, n) = check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));

    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (vec![0u64], vec![0u64]);
    // Twice the Mann-Whitney U: each positive above a negative counts 2, ties 1.
    let mut twice_u: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut dp, mut dn) = (0u64, 0u64);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                dp += 1;
            } else {
                dn += 1;
            }
            i += 1;
        }
        let (tp0, fp0) = (*tp.last().unwrap(), *fp.last().unwrap());
        // Negatives strictly below this score group: n - fp0 - dn.
        twice_u += dp * (2 * (n - fp0 - dn) + dn);
        thresholds.push(s);
        tp.push(tp0 + dp);
        fp.push(fp0 + dn);
    }
    Ok(RocCurve {
        tpr: tp.iter().map(|&t| t as f64 / p as f64).collect(),
        fpr: fp.iter().map(|&f| f as f64 / n as f64).collect(),
        thresholds,
        tp,
        fp,
        positives: p,
        negatives: n,
        auc: twice_u as f64 / (2 * p * n) as f64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    /// Counts with `score >= threshold` predicted abnormal.
    pub fn at(scores: &[f64], labels: &[bool], threshold: f64) -> Self {
        let mut c = Confusion { tp: 0, fp: 0, tn: 0, fn_: 0 };
        for (&s, &l) in scores.iter().zip(labels) {
            match (s >= threshold, l) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub youden_index: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    pub confusion: Confusion,
    /// No positive predictions; precision reported as 0.
    pub precision_undefined: bool,
    /// Youden index is zero: the scores carry no separating information.
    pub degenerate: bool,
}

impl OperatingPoint {
    pub fn from_confusion(threshold: f64, c: Confusion) -> Self {
        let p = c.tp + c.fn_;
        let n = c.fp + c.tn;
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision_undefined = c.tp + c.fp == 0;
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, p);
        let specificity = ratio(c.tn, n);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let fpr = ratio(c.fp, n);
        // Sign of tpr - fpr from exact integer arithmetic.
        let j_num = c.tp as i128 * n as i128 - c.fp as i128 * p as i128;
        OperatingPoint {
            threshold,
            tpr: recall,
            fpr,
            youden_index: recall - fpr,
            precision,
            recall,
            specificity,
            f1,
            confusion: c,
            precision_undefined,
            degenerate: j_num <= 0,
        }
    }
}

/// Threshold maximising `tpr - fpr`; ties go to the smallest threshold.
pub fn youden_point(curve: &RocCurve, scores: &[f64], labels: &[bool]) -> Result<OperatingPoint> {
    check_inputs(scores, labels)?;
    let (p, n) = (curve.positives as i128, curve.negatives as i128);
    let mut best = 0;
    let mut best_j = i128::MIN;
    for k in 0..curve.thresholds.len() {
        // tpr - fpr scaled by p * n, compared exactly.
        let j = curve.tp[k] as i128 * n - curve.fp[k] as i128 * p;
        if j >= best_j {
            best_j = j;
            best = k;
        }
    }
    let t = curve.thresholds[best];
    let c = Confusion::at(scores, labels, t);
    if c.tp != curve.tp[best] || c.fp != curve.fp[best] {
        return Err(Error::Invalid("ROC curve does not belong to these scores".into()));
    }
    Ok(OperatingPoint::from_confusion(t, c))
}

use super::roc::check_inputs;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::cmp::Ordering;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeLongResult {
    pub auc_a: f64,
    pub auc_b: f64,
    pub variance: f64,
    pub z: f64,
    /// Two-sided.
    pub p: f64,
}

/// 1-based ranks with ties sharing their mean rank.
pub fn midranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// AUC and its structural components (per-positive and per-negative
/// placement values) from mid-ranks.
pub fn placements(pos: &[f64], neg: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let (m, n) = (pos.len(), neg.len());
    let all: Vec<f64> = pos.iter().chain(neg).copied().collect();
    let tz = midranks(&all);
    let tx = midranks(pos);
    let ty = midranks(neg);
    let v10: Vec<f64> = (0..m).map(|i| (tz[i] - tx[i]) / n as f64).collect();
    let v01: Vec<f64> = (0..n).map(|j| 1.0 - (tz[m + j] - ty[j]) / m as f64).collect();
    let auc = v10.iter().sum::<f64>() / m as f64;
    (auc, v10, v01)
}

pub(crate) fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let k = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / k, b.iter().sum::<f64>() / k);
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (k - 1.0)
}

/// Variance of the AUC difference from structural components.
pub(crate) fn difference_variance(v10: [&[f64]; 2], v01: [&[f64]; 2]) -> f64 {
    let (m, n) = (v10[0].len() as f64, v01[0].len() as f64);
    let s = |i: usize, j: usize| covariance(v10[i], v10[j]) / m + covariance(v01[i], v01[j]) / n;
    s(0, 0) + s(1, 1) - 2.0 * s(0, 1)
}

pub(crate) fn result(auc_a: f64, auc_b: f64, variance: f64) -> Result<DeLongResult> {
    if !(variance >= 1e-12) {
        return Err(Error::DegenerateVariance);
    }
    let z = (auc_a - auc_b) / variance.sqrt();
    Ok(DeLongResult {
        auc_a,
        auc_b,
        variance,
        z,
        p: erfc(z.abs() / std::f64::consts::SQRT_2),
    })
}

/// Paired DeLong test of two score vectors over the same labelled samples.
pub fn delong_paired(scores_a: &[f64], scores_b: &[f64], labels: &[bool]) -> Result<DeLongResult> {
    let (p, n) = check_inputs(scores_a, labels)?;
    check_inputs(scores_b, labels)?;
    if p < 2 || n < 2 {
        return Err(Error::Invalid("DeLong needs at least two samples per class".into()));
    }
    let split = |s: &[f64]| {
        let pos: Vec<f64> = s.iter().zip(labels).filter(|(_, &l)| l).map(|(&v, _)| v).collect();
        let neg: Vec<f64> = s.iter().zip(labels).filter(|(_, &l)| !l).map(|(&v, _)| v).collect();
        placements(&pos, &neg)
    };
    let (auc_a, a10, a01) = split(scores_a);
    let (auc_b, b10, b01) = split(scores_b);
    result(auc_a, auc_b, difference_variance([&a10, &b10], [&a01, &b01]))
}

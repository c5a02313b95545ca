//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// AUC by enumerating every (positive, negative) pair.
pub fn auc_by_pairs(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut twice, mut pairs) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1;
                if scores[i] > scores[j] {
                    twice += 2;
                } else if scores[i] == scores[j] {
                    twice += 1;
                }
            }
        }
    }
    twice as f64 / (2 * pairs) as f64
}

#[derive(Debug, PartialEq)]
pub struct BruteOperatingPoint {
    pub threshold: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

/// Tries every observed score (and +inf) as a threshold and keeps the
/// largest tpr - fpr, preferring the smallest threshold among ties.
pub fn youden_by_enumeration(scores: &[f64], labels: &[bool]) -> BruteOperatingPoint {
    let p = labels.iter().filter(|&&l| l).count() as f64;
    let n = labels.len() as f64 - p;
    let mut candidates: Vec<f64> = scores.to_vec();
    candidates.push(f64::INFINITY);
    let mut best: Option<(f64, BruteOperatingPoint)> = None;
    for &t in &candidates {
        let mut bp = BruteOperatingPoint { threshold: t, tp: 0, fp: 0, tn: 0, fn_: 0 };
        for (&s, &l) in scores.iter().zip(labels) {
            match (s >= t, l) {
                (true, true) => bp.tp += 1,
                (true, false) => bp.fp += 1,
                (false, false) => bp.tn += 1,
                (false, true) => bp.fn_ += 1,
            }
        }
        // Exact comparison in integers: tp/p - fp/n scaled by p*n.
        let j = bp.tp as f64 * n - bp.fp as f64 * p;
        let better = match &best {
            None => true,
            Some((bj, b)) => j > *bj || (j == *bj && t < b.threshold),
        };
        if better {
            best = Some((j, bp));
        }
    }
    best.unwrap().1
}

fn psi(x: f64, y: f64) -> f64 {
    if x > y {
        1.0
    } else if x == y {
        0.5
    } else {
        0.0
    }
}

/// DeLong statistic from the covariance definition: explicit placement
/// values V10 / V01 from the kernel psi, no ranks.
pub fn delong_structural(a: &[f64], b: &[f64], labels: &[bool]) -> (f64, f64, f64) {
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    let (m, n) = (pos.len() as f64, neg.len() as f64);
    let comps = |s: &[f64]| {
        let v10: Vec<f64> = pos
            .iter()
            .map(|&i| neg.iter().map(|&j| psi(s[i], s[j])).sum::<f64>() / n)
            .collect();
        let v01: Vec<f64> = neg
            .iter()
            .map(|&j| pos.iter().map(|&i| psi(s[i], s[j])).sum::<f64>() / m)
            .collect();
        let auc = v10.iter().sum::<f64>() / m;
        (auc, v10, v01)
    };
    let (aa, a10, a01) = comps(a);
    let (ab, b10, b01) = comps(b);
    let cov = |x: &[f64], y: &[f64], mx: f64, my: f64| {
        x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum::<f64>() / (x.len() as f64 - 1.0)
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma01, mb01) = (mean(&a01), mean(&b01));
    let s10 = [
        cov(&a10, &a10, aa, aa),
        cov(&b10, &b10, ab, ab),
        cov(&a10, &b10, aa, ab),
    ];
    let s01 = [
        cov(&a01, &a01, ma01, ma01),
        cov(&b01, &b01, mb01, mb01),
        cov(&a01, &b01, ma01, mb01),
    ];
    let var = (s10[0] + s10[1] - 2.0 * s10[2]) / m + (s01[0] + s01[1] - 2.0 * s01[2]) / n;
    (aa, ab, (aa - ab) / var.sqrt())
}

/// Random scores drawn from a small grid (so ties are common) with both
/// classes present.
pub fn random_instance(rng: &mut ChaCha8Rng, max_n: usize) -> (Vec<f64>, Vec<bool>) {
    loop {
        let n = rng.random_range(2..=max_n);
        let levels = rng.random_range(2..=12);
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let scores: Vec<f64> = labels
            .iter()
            .map(|&l| rng.random_range(0..levels) as f64 / levels as f64 + if l { 0.1 } else { 0.0 })
            .collect();
        if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            return (scores, labels);
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

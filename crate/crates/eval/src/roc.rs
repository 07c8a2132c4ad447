//! ROC curves and their area.

use crate::{EvalError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one point per distinct score.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl RocCurve {
    /// Trapezoidal area under `points`.
    pub fn trapezoid_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
            .sum()
    }
}

/// Sweeps the threshold from high to low over all distinct scores. Equal
/// scores move both rates at once, which makes the area count ties as half.
pub fn roc_auc(pos: &[f64], neg: &[f64]) -> Result<RocCurve> {
    if pos.is_empty() || neg.is_empty() {
        return Err(EvalError::EmptyRocSide {
            n_pos: pos.len(),
            n_neg: neg.len(),
        });
    }
    if pos.iter().chain(neg).any(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore);
    }
    let mut all: Vec<(f64, bool)> = pos.iter().map(|&s| (s, true)).chain(neg.iter().map(|&s| (s, false))).collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (np, nn) = (pos.len() as u64, neg.len() as u64);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the number of correctly ordered pairs plus ties
    let mut twice: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let s = all[i].0;
        let (mut gp, mut gn) = (0u64, 0u64);
        while i < all.len() && all[i].0 == s {
            if all[i].1 {
                gp += 1;
            } else {
                gn += 1;
            }
            i += 1;
        }
        twice += gn as u128 * (2 * tp as u128 + gp as u128);
        tp += gp;
        fp += gn;
        points.push((fp as f64 / nn as f64, tp as f64 / np as f64));
    }
    let auc = twice as f64 / (2 * np as u128 * nn as u128) as f64;
    Ok(RocCurve { points, auc })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Equal-width histogram of both score sets over their joint range.
pub fn histogram(pos: &[f64], neg: &[f64], bins: usize) -> Vec<HistBin> {
    let all = || pos.iter().chain(neg).copied().filter(|s| s.is_finite());
    let (lo, hi) = all().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s), b.max(s)));
    if bins == 0 || lo > hi {
        return Vec::new();
    }
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut out: Vec<HistBin> = (0..bins)
        .map(|b| HistBin {
            lo: lo + b as f64 * width,
            hi: lo + (b + 1) as f64 * width,
            n_pos: 0,
            n_neg: 0,
        })
        .collect();
    let slot = |s: f64| (((s - lo) / width) as usize).min(bins - 1);
    for &s in pos.iter().filter(|s| s.is_finite()) {
        out[slot(s)].n_pos += 1;
    }
    for &s in neg.iter().filter(|s| s.is_finite()) {
        out[slot(s)].n_neg += 1;
    }
    out
}

use std::fmt;

use super::forest::{score_vector, Forest};
use crate::dataset::SparseDataset;
use crate::loss::total_loss;

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Mean logistic loss per raw row.
    pub loss: f64,
    /// Frequency-weighted accuracy, predicting 1 when `F > 0`.
    pub accuracy: f64,
    pub auc: f64,
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "loss={}", self.loss)?;
        writeln!(f, "accuracy={}", self.accuracy)?;
        write!(f, "auc={}", self.auc)
    }
}

pub fn evaluate(forest: &Forest, ds: &SparseDataset) -> Metrics {
    let scores = score_vector(forest, ds);
    let n_raw = ds.n_raw() as f64;
    let loss = total_loss(ds, &scores).expect("score vector matches dataset") / n_raw;
    Metrics {
        loss,
        accuracy: accuracy(&scores.0, ds.labels(), ds.frequencies()),
        auc: auc(&scores.0, ds.labels(), ds.frequencies()),
    }
}

pub(crate) fn accuracy(scores: &[f64], labels: &[u8], freqs: &[u32]) -> f64 {
    let (mut hit, mut total) = (0u64, 0u64);
    for ((&f, &y), &m) in scores.iter().zip(labels).zip(freqs) {
        if (f > 0.0) == (y == 1) {
            hit += m as u64;
        }
        total += m as u64;
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

/// Frequency-weighted ROC AUC: `P(score⁺ > score⁻) + ½ P(tie)`. Returns
/// 0.5 when one class is absent.
pub fn auc(scores: &[f64], labels: &[u8], freqs: &[u32]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut neg_below, mut acc) = (0.0, 0.0);
    let (mut pos_total, mut neg_total) = (0.0, 0.0);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        let (mut pos, mut neg) = (0.0, 0.0);
        while k < order.len() && scores[order[k]] == s {
            let i = order[k];
            if labels[i] == 1 {
                pos += freqs[i] as f64;
            } else {
                neg += freqs[i] as f64;
            }
            k += 1;
        }
        acc += pos * (neg_below + 0.5 * neg);
        neg_below += neg;
        pos_total += pos;
        neg_total += neg;
    }
    if pos_total == 0.0 || neg_total == 0.0 {
        0.5
    } else {
        acc / (pos_total * neg_total)
    }
}

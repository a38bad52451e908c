use serde::{Deserialize, Serialize};

use crate::corpus::NUM_PROPERTIES;
use crate::training::auc::{auc, roc_curve};

/// Confusion counts and derived rates for one property (or pooled).
///
/// With no positive labels recall is reported as 1.0 and `recall_defined`
/// is false; likewise precision with no positive predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub precision_defined: bool,
    pub recall: f64,
    pub recall_defined: bool,
    /// `None` when only one class is present.
    pub auc: Option<f64>,
    pub roc: Vec<(f64, f64)>,
}

impl BinaryMetrics {
    pub fn compute(scores: &[f64], labels: &[bool], threshold: f64) -> Self {
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for (&s, &l) in scores.iter().zip(labels) {
            match (s >= threshold, l) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
        let total = tp + fp + tn + fn_;
        let ratio = |a: u64, b: u64| if b == 0 { 1.0 } else { a as f64 / b as f64 };
        BinaryMetrics {
            tp,
            fp,
            tn,
            fn_,
            accuracy: ratio(tp + tn, total),
            precision: ratio(tp, tp + fp),
            precision_defined: tp + fp > 0,
            recall: ratio(tp, tp + fn_),
            recall_defined: tp + fn_ > 0,
            auc: auc(scores, labels).ok(),
            roc: roc_curve(scores, labels),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub threshold: f64,
    pub samples: usize,
    pub per_property: Vec<BinaryMetrics>,
    /// All (sample, property) elements pooled.
    pub micro: BinaryMetrics,
    /// Share of samples whose six decisions are all correct.
    pub exact_match: f64,
}

impl Metrics {
    /// `probs[i]` and `labels[i]` are the six scores and truths of sample `i`.
    pub fn compute(probs: &[[f64; NUM_PROPERTIES]], labels: &[[bool; NUM_PROPERTIES]], threshold: f64) -> Self {
        let per_property = (0..NUM_PROPERTIES)
            .map(|p| {
                let s: Vec<f64> = probs.iter().map(|r| r[p]).collect();
                let l: Vec<bool> = labels.iter().map(|r| r[p]).collect();
                BinaryMetrics::compute(&s, &l, threshold)
            })
            .collect();
        let all_s: Vec<f64> = probs.iter().flatten().copied().collect();
        let all_l: Vec<bool> = labels.iter().flatten().copied().collect();
        let exact = probs
            .iter()
            .zip(labels)
            .filter(|(p, l)| p.iter().zip(l.iter()).all(|(&s, &y)| (s >= threshold) == y))
            .count();
        Metrics {
            threshold,
            samples: probs.len(),
            per_property,
            micro: BinaryMetrics::compute(&all_s, &all_l, threshold),
            exact_match: if probs.is_empty() {
                1.0
            } else {
                exact as f64 / probs.len() as f64
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_correct() {
        let m = BinaryMetrics::compute(&[0.9, 0.1, 0.7], &[true, false, true], 0.5);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!((m.precision, m.recall), (1.0, 1.0));
    }

    #[test]
    fn vacuous_recall() {
        let m = BinaryMetrics::compute(&[0.1, 0.2], &[false, false], 0.5);
        assert_eq!(m.recall, 1.0);
        assert!(!m.recall_defined);
        assert!(m.auc.is_none());
        assert_eq!(m.accuracy, 1.0);
    }

    #[test]
    fn hand_confusion_matrix() {
        // tp: 0.8/1, fp: 0.6/0, tn: 0.2/0 and 0.4/0, fn: 0.3/1
        let m = BinaryMetrics::compute(&[0.8, 0.6, 0.2, 0.4, 0.3], &[true, false, false, false, true], 0.5);
        assert_eq!((m.tp, m.fp, m.tn, m.fn_), (1, 1, 2, 1));
        assert_eq!(m.accuracy, 3.0 / 5.0);
        assert_eq!(m.precision, 0.5);
        assert_eq!(m.recall, 0.5);
    }

    #[test]
    fn micro_and_exact_match() {
        let probs = [[0.9, 0.1, 0.1, 0.1, 0.1, 0.1], [0.2, 0.1, 0.1, 0.1, 0.8, 0.1]];
        let labels = [
            [true, false, false, false, false, false],
            [false, false, false, false, false, false],
        ];
        let m = Metrics::compute(&probs, &labels, 0.5);
        assert_eq!(m.micro.accuracy, 11.0 / 12.0);
        assert_eq!(m.exact_match, 0.5);
        assert_eq!(m.per_property[4].fp, 1);
    }
}

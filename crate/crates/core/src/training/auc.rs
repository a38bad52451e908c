use std::cmp::Ordering;

use crate::error::{Error, Result};

fn counts(labels: &[bool]) -> (u64, u64) {
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    (pos, labels.len() as u64 - pos)
}

/// Area under the ROC curve via the rank-sum (Mann–Whitney) statistic,
/// tied scores sharing their average rank. Equivalent to the probability
/// that a random positive outscores a random negative, ties counting half.
///
/// Ranks are kept doubled so the numerator stays an exact integer.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let (n_pos, n_neg) = counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Input("AUC needs at least one positive and one negative".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut doubled_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]].total_cmp(&scores[order[i]]) == Ordering::Equal {
            j += 1;
        }
        // ranks i+1 ..= j share the average (i+1+j)/2
        let doubled = (i + 1 + j) as u64;
        for &k in &order[i..j] {
            if labels[k] {
                doubled_rank_sum += doubled;
            }
        }
        i = j;
    }
    let doubled_u = doubled_rank_sum - n_pos * (n_pos + 1);
    Ok(doubled_u as f64 / (2 * n_pos * n_neg) as f64)
}

/// ROC points `(fpr, tpr)` from `(0,0)` to `(1,1)`, one point per distinct
/// score threshold, scanning scores from high to low.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Vec<(f64, f64)> {
    let (n_pos, n_neg) = counts(labels);
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    let rate = |x: u64, n: u64| if n == 0 { 0.0 } else { x as f64 / n as f64 };
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]].total_cmp(&s) == Ordering::Equal {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((rate(fp, n_neg), rate(tp, n_pos)));
    }
    if points.last() != Some(&(1.0, 1.0)) && n_pos > 0 && n_neg > 0 {
        points.push((1.0, 1.0));
    }
    points
}

/// Trapezoidal area under a ROC polyline.
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

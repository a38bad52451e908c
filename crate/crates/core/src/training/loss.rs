use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::scalar::Scalar;

/// Probability clamp keeping both logs finite.
pub const PROB_EPS: f64 = 1e-7;

/// Per-property class counts over a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassStats {
    pub n_pos: Vec<usize>,
    pub n_neg: Vec<usize>,
    pub total: usize,
}

impl ClassStats {
    pub fn new(n_pos: Vec<usize>, n_neg: Vec<usize>) -> Result<Self> {
        if n_pos.len() != n_neg.len() {
            return Err(Error::Config("class count vectors differ in length".into()));
        }
        let total = n_pos.first().zip(n_neg.first()).map_or(0, |(p, n)| p + n);
        if n_pos.iter().zip(&n_neg).any(|(p, n)| p + n != total) {
            return Err(Error::Config("per-property counts do not share one total".into()));
        }
        Ok(ClassStats { n_pos, n_neg, total })
    }

    pub fn properties(&self) -> usize {
        self.n_pos.len()
    }

    /// `1 − n(y)/N` for an element of property `prop` whose label is `positive`.
    pub fn weight(&self, prop: usize, positive: bool) -> Result<f64> {
        if self.total == 0 {
            return Err(Error::Config("class stats with N = 0".into()));
        }
        let n = if positive { self.n_pos[prop] } else { self.n_neg[prop] };
        Ok(1.0 - n as f64 / self.total as f64)
    }

    /// Weight matrix matching a label matrix (rows = samples, cols = properties).
    pub fn weight_matrix<T: Scalar>(&self, labels: &Matrix<T>) -> Result<Matrix<T>> {
        if labels.cols() != self.properties() {
            return Err(Error::shape("class weights", labels.shape(), (1, self.properties())));
        }
        let mut w = Matrix::zeros(labels.rows(), labels.cols());
        for i in 0..labels.rows() {
            for p in 0..labels.cols() {
                w[(i, p)] = T::from_f64_lossy(self.weight(p, labels[(i, p)] > T::lit(0.5))?);
            }
        }
        Ok(w)
    }
}

/// Loss variant used by the trainer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// Each element weighted by one minus its class share.
    #[default]
    Balanced,
    Unweighted,
}

pub(crate) fn bce<T: Scalar>(p: T, y: T, eps: T) -> T {
    let p = p.max(eps).min(T::one() - eps);
    -(y * p.ln() + (T::one() - y) * (T::one() - p).ln())
}

pub(crate) fn weighted_bce_sum<T: Scalar>(probs: &[T], targets: &[T], weights: &[T], eps: T) -> T {
    probs
        .iter()
        .zip(targets)
        .zip(weights)
        .map(|((&p, &y), &w)| w * bce(p, y, eps))
        .sum()
}

/// Weight-balanced binary cross-entropy over a `B×P` batch: per-element BCE
/// times `1 − n(y)/N`, summed across properties and averaged over the batch.
pub fn balanced_bce<T: Scalar>(probs: &Matrix<T>, labels: &Matrix<T>, stats: &ClassStats) -> Result<T> {
    probs.check_same_shape("balanced_bce", labels)?;
    let weights = stats.weight_matrix(labels)?;
    let sum = weighted_bce_sum(probs.data(), labels.data(), weights.data(), T::lit(PROB_EPS));
    Ok(sum / T::from_usize(probs.rows().max(1)).unwrap())
}

/// Plain BCE with the same reduction as [`balanced_bce`].
pub fn unweighted_bce<T: Scalar>(probs: &Matrix<T>, labels: &Matrix<T>) -> Result<T> {
    probs.check_same_shape("unweighted_bce", labels)?;
    let ones = Matrix::filled(probs.rows(), probs.cols(), T::one());
    let sum = weighted_bce_sum(probs.data(), labels.data(), ones.data(), T::lit(PROB_EPS));
    Ok(sum / T::from_usize(probs.rows().max(1)).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{grad_check, Tape};

    type M = Matrix<f64>;

    #[test]
    fn worked_two_sample_example() {
        let probs = M::from_rows(&[&[0.9], &[0.2]]);
        let labels = M::from_rows(&[&[1.0], &[0.0]]);
        let stats = ClassStats::new(vec![1], vec![1]).unwrap();
        let l = balanced_bce(&probs, &labels, &stats).unwrap();
        let oracle = 0.5 * (-(0.9f64.ln()) * 0.5 + -(0.8f64.ln()) * 0.5);
        assert!((l - oracle).abs() < 1e-15);
        assert!((l - 0.08213).abs() < 1e-5, "{l}");
    }

    #[test]
    fn perfect_prediction_near_zero() {
        let labels = M::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let stats = ClassStats::new(vec![1, 1], vec![1, 1]).unwrap();
        assert!(balanced_bce(&labels, &labels, &stats).unwrap() < 1e-5);
    }

    #[test]
    fn include_weight_with_published_counts() {
        // include: 99 positive, 16329 negative
        let stats = ClassStats::new(vec![99], vec![16329]).unwrap();
        assert_eq!(stats.total, 16428);
        let w = stats.weight(0, true).unwrap();
        assert!((w - 0.99397).abs() < 1e-5, "{w}");
    }

    #[test]
    fn equal_counts_halve_unweighted_exactly() {
        let probs = M::from_rows(&[&[0.3, 0.8], &[0.65, 0.1], &[0.5, 0.99], &[0.01, 0.4]]);
        let labels = M::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0], &[0.0, 0.0]]);
        let stats = ClassStats::new(vec![2, 2], vec![2, 2]).unwrap();
        let b = balanced_bce(&probs, &labels, &stats).unwrap();
        let u = unweighted_bce(&probs, &labels).unwrap();
        assert_eq!(b, 0.5 * u);
    }

    #[test]
    fn empty_stats_is_config_error() {
        let stats = ClassStats::new(vec![0], vec![0]).unwrap();
        let m = M::from_rows(&[&[0.5]]);
        assert!(matches!(balanced_bce(&m, &m, &stats), Err(Error::Config(_))));
    }

    #[test]
    fn inconsistent_stats_rejected() {
        assert!(ClassStats::new(vec![1, 2], vec![3, 3]).is_err());
    }

    #[test]
    fn tape_loss_gradient_matches_finite_differences() {
        let labels = M::from_rows(&[&[1.0, 0.0, 1.0], &[0.0, 0.0, 1.0]]);
        let stats = ClassStats::new(vec![1, 0, 2], vec![1, 2, 0]).unwrap();
        let weights = stats.weight_matrix(&labels).unwrap();
        let probs = M::from_rows(&[&[0.7, 0.2, 0.4], &[0.35, 0.6, 0.9]]);
        let err = grad_check(
            |t: &mut Tape<f64>, p| t.weighted_bce(p[0], labels.clone(), weights.clone(), PROB_EPS),
            &[probs],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }
}

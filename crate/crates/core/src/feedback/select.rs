use crate::corpus::PropertyKind;
use crate::depgraph::{DependencyEdge, EdgeProvenance};
use crate::model::{ConfidenceClass, Prediction, Thresholds};

/// Every (pair, property) of a prediction set, routed by confidence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Routed {
    pub accepted: Vec<DependencyEdge>,
    pub low_confidence: Vec<DependencyEdge>,
    pub rejected: Vec<DependencyEdge>,
}

fn by_confidence_desc(edges: &mut [DependencyEdge]) {
    edges.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.key().cmp(&b.key()))
    });
}

pub fn route_predictions(predictions: &[Prediction], t: &Thresholds) -> Routed {
    let mut r = Routed::default();
    for p in predictions {
        for (kind, &prob) in PropertyKind::ALL.iter().zip(&p.probs) {
            let e = DependencyEdge::new(&p.source, &p.destination, *kind, prob, EdgeProvenance::Model);
            match ConfidenceClass::classify(prob, t) {
                ConfidenceClass::Accepted => r.accepted.push(e),
                ConfidenceClass::LowConfidence => r.low_confidence.push(e),
                ConfidenceClass::Rejected => r.rejected.push(e),
            }
        }
    }
    by_confidence_desc(&mut r.accepted);
    by_confidence_desc(&mut r.low_confidence);
    by_confidence_desc(&mut r.rejected);
    r
}

/// Edges with probability in `[low, high)`, most probable first.
pub fn select_low_confidence(predictions: &[Prediction], t: &Thresholds) -> Vec<DependencyEdge> {
    route_predictions(predictions, t).low_confidence
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_membership() {
        let t = Thresholds::default();
        let p = Prediction::new("a", "b", [0.95, 0.5, 0.1, 0.7, 0.3, 0.2999], 0, &t);
        let low = select_low_confidence(std::slice::from_ref(&p), &t);
        let got: Vec<(PropertyKind, f64)> = low.iter().map(|e| (e.property, e.confidence)).collect();
        assert_eq!(got, [(PropertyKind::Integrity, 0.5), (PropertyKind::Include, 0.3)]);
        let r = route_predictions(&[p], &t);
        assert_eq!(r.accepted.len() + r.low_confidence.len() + r.rejected.len(), 6);
        assert_eq!(r.accepted.len(), 2);
    }

    #[test]
    fn empty_band() {
        let t = Thresholds::default();
        let p = Prediction::new("a", "b", [0.9, 0.1, 0.0, 0.99, 0.2, 0.05], 0, &t);
        assert!(select_low_confidence(&[p], &t).is_empty());
    }
}

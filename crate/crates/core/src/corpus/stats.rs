use std::collections::BTreeMap;

use crate::corpus::sample::{AnnotatedSample, PropertyKind, NUM_PROPERTIES};
use crate::training::loss::ClassStats;

/// Per-property positive and negative counts.
pub fn class_stats(samples: &[AnnotatedSample]) -> ClassStats {
    let mut n_pos = vec![0; NUM_PROPERTIES];
    for s in samples {
        for (p, &v) in s.labels.0.iter().enumerate() {
            n_pos[p] += usize::from(v);
        }
    }
    let n_neg = n_pos.iter().map(|p| samples.len() - p).collect();
    ClassStats {
        n_pos,
        n_neg,
        total: samples.len(),
    }
}

/// Exact-combination counts: each sample with at least one true property
/// increments the count of its full property set.
pub fn intersection_counts(samples: &[AnnotatedSample]) -> BTreeMap<Vec<PropertyKind>, usize> {
    let mut out = BTreeMap::new();
    for s in samples.iter().filter(|s| s.labels.any()) {
        *out.entry(s.labels.kinds()).or_insert(0) += 1;
    }
    out
}

use crate::corpus::{AnnotatedSample, SampleProvenance};
use crate::depgraph::{DependencyGraph, EdgeProvenance, EdgeStatus};
use crate::feedback::evidence::{EvidenceRecord, Verdict};
use crate::feedback::store::GroundTruthStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ApplySummary {
    pub confirmed: usize,
    pub refuted: usize,
    /// Records whose edge is not in the graph.
    pub absent: usize,
}

/// Appends every record to `store` and updates matching edges: refuted
/// marks the edge refuted, confirmed sets confidence 1.0 and upgrades
/// provenance. Edges are never removed or created.
pub fn apply_evidence(
    graph: &mut DependencyGraph,
    store: &mut GroundTruthStore,
    records: &[EvidenceRecord],
) -> ApplySummary {
    let mut summary = ApplySummary::default();
    for r in records {
        store.append(r.clone());
        let Some(edge) = graph.get_mut(&r.key()) else {
            summary.absent += 1;
            continue;
        };
        match r.verdict {
            Verdict::Refuted => {
                edge.status = EdgeStatus::Refuted;
                summary.refuted += 1;
            }
            Verdict::Confirmed => {
                edge.confidence = 1.0;
                edge.provenance = EdgeProvenance::EvidenceConfirmed;
                summary.confirmed += 1;
            }
        }
    }
    summary
}

/// Copies of the `base` rows touched by `records`, relabeled by the
/// verdicts (in record order) and marked as evidence.
pub fn evidence_samples(base: &[AnnotatedSample], records: &[EvidenceRecord]) -> Vec<AnnotatedSample> {
    with_evidence(base, records)
        .into_iter()
        .filter(|s| s.provenance == SampleProvenance::Evidence)
        .collect()
}

/// `base` with every row touched by `records` relabeled and marked as
/// evidence. Pairs without a base row are skipped.
pub fn with_evidence(base: &[AnnotatedSample], records: &[EvidenceRecord]) -> Vec<AnnotatedSample> {
    let mut out = base.to_vec();
    for r in records {
        for s in out
            .iter_mut()
            .filter(|s| s.source == r.source && s.destination == r.destination)
        {
            s.labels.set(r.property, r.verdict == Verdict::Confirmed);
            s.provenance = SampleProvenance::Evidence;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Labels, PropertyKind};
    use crate::depgraph::{DependencyEdge, EdgeKey};

    fn rec(v: Verdict, s: &str, d: &str) -> EvidenceRecord {
        EvidenceRecord {
            source: s.into(),
            destination: d.into(),
            property: PropertyKind::Integrity,
            verdict: v,
            evidence_ref: "simulated:integrity".into(),
            timestamp: "t0001".into(),
            detail: String::new(),
        }
    }

    fn graph() -> DependencyGraph {
        let mut g = DependencyGraph::new();
        g.insert(DependencyEdge::new(
            "a",
            "b",
            PropertyKind::Integrity,
            0.5,
            EdgeProvenance::Model,
        ))
        .unwrap();
        g
    }

    #[test]
    fn refute_absent_edge() {
        let mut g = graph();
        let mut st = GroundTruthStore::new();
        let s = apply_evidence(&mut g, &mut st, &[rec(Verdict::Refuted, "x", "y")]);
        assert_eq!(s.absent, 1);
        assert_eq!(g, graph());
        assert_eq!(st.len(), 1);
    }

    #[test]
    fn confirm_twice_is_idempotent_on_graph() {
        let mut g = graph();
        let mut st = GroundTruthStore::new();
        let r = [rec(Verdict::Confirmed, "a", "b")];
        apply_evidence(&mut g, &mut st, &r);
        let once = g.clone();
        apply_evidence(&mut g, &mut st, &r);
        assert_eq!(g, once);
        let e = g.get(&EdgeKey::new("a", "b", PropertyKind::Integrity)).unwrap();
        assert_eq!(e.confidence, 1.0);
        assert_eq!(e.provenance, EdgeProvenance::EvidenceConfirmed);
        assert_eq!(st.len(), 2);
        assert_ne!(st.entries()[0].seq, st.entries()[1].seq);
    }

    #[test]
    fn refutation_flags_edge() {
        let mut g = graph();
        apply_evidence(&mut g, &mut GroundTruthStore::new(), &[rec(Verdict::Refuted, "a", "b")]);
        assert_eq!(g.active_edges().count(), 0);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn relabels_samples() {
        let base = vec![AnnotatedSample {
            doc_id: "d".into(),
            section_id: "s".into(),
            context: "a b".into(),
            source: "a".into(),
            destination: "b".into(),
            labels: Labels::from_kinds(&[PropertyKind::Include]),
            provenance: SampleProvenance::Expert,
        }];
        let ev = evidence_samples(&base, &[rec(Verdict::Confirmed, "a", "b")]);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].labels.kinds(), [PropertyKind::Integrity, PropertyKind::Include]);
        assert_eq!(ev[0].provenance, SampleProvenance::Evidence);
        assert!(evidence_samples(&base, &[rec(Verdict::Refuted, "q", "r")]).is_empty());
    }
}

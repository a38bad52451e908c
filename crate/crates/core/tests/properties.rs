use std::collections::BTreeSet;

use proptest::prelude::*;

use protodep::corpus::PropertyKind;
use protodep::depgraph::{
    intent_filter, merge_graphs, DependencyEdge, DependencyGraph, EdgeProvenance, EdgeStatus, FlowGraph, FlowMessage,
};
use protodep::formalgen::{emit_formal_model, parse_formal_model};
use protodep::training::{auc, roc_curve, trapezoid_area};

const IDS: [&str; 6] = ["KgNB", "KRRCint", "COUNT", "ue-Identity", "RRCSetup", "waitTime"];

fn edge() -> impl Strategy<Value = DependencyEdge> {
    (0..IDS.len(), 1..IDS.len(), 0..6usize, 0..=8u8, 0..3usize, any::<bool>()).prop_map(
        |(s, off, p, c, prov, refuted)| {
            let d = (s + off) % IDS.len();
            let prov = [
                EdgeProvenance::Model,
                EdgeProvenance::Expert,
                EdgeProvenance::EvidenceConfirmed,
            ][prov];
            let mut e = DependencyEdge::new(IDS[s], IDS[d], PropertyKind::ALL[p], f64::from(c) / 8.0, prov);
            if refuted {
                e.status = EdgeStatus::Refuted;
            }
            e
        },
    )
}

fn graph() -> impl Strategy<Value = DependencyGraph> {
    (
        prop::collection::vec(edge(), 0..10),
        prop::collection::vec(0..IDS.len(), 0..3),
    )
        .prop_map(|(edges, lone)| {
            let mut g = DependencyGraph::new();
            for e in edges {
                g.insert(e).unwrap();
            }
            for i in lone {
                g.add_node(IDS[i]).unwrap();
            }
            g
        })
}

fn flow() -> impl Strategy<Value = FlowGraph> {
    let msg = (0..3usize, 0..3usize, prop::collection::vec(any::<bool>(), IDS.len()));
    prop::collection::vec(msg, 1..6).prop_map(|msgs| {
        let entities = ["UE", "gNB", "AMF"];
        let messages = msgs
            .into_iter()
            .enumerate()
            .map(|(i, (s, r, mask))| {
                let ids: Vec<&str> = IDS.iter().zip(&mask).filter(|(_, &m)| m).map(|(id, _)| *id).collect();
                FlowMessage::new(entities[s], entities[r], &format!("Msg{i}"), &ids)
            })
            .collect();
        FlowGraph::new(messages).unwrap()
    })
}

fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut doubled = 0u64;
    let mut pairs = 0u64;
    for (i, &a) in scores.iter().enumerate() {
        for (j, &b) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1;
                doubled += match a.partial_cmp(&b).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    doubled as f64 / (2 * pairs) as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn merge_is_commutative(a in graph(), b in graph()) {
        prop_assert_eq!(merge_graphs(&a, &b), merge_graphs(&b, &a));
    }

    #[test]
    fn merge_is_associative(a in graph(), b in graph(), c in graph()) {
        prop_assert_eq!(
            merge_graphs(&merge_graphs(&a, &b), &c),
            merge_graphs(&a, &merge_graphs(&b, &c))
        );
    }

    #[test]
    fn merge_is_idempotent(a in graph()) {
        prop_assert_eq!(merge_graphs(&a, &a), a);
    }

    #[test]
    fn refuted_survives_merge(a in graph(), b in graph()) {
        let m = merge_graphs(&a, &b);
        for e in a.edges().chain(b.edges()) {
            let merged = m.get(&e.key()).unwrap();
            prop_assert!(merged.confidence >= e.confidence);
            if e.status == EdgeStatus::Refuted {
                prop_assert_eq!(merged.status, EdgeStatus::Refuted);
            }
        }
    }

    #[test]
    fn filter_is_idempotent_and_shrinking(g in graph(), f in flow()) {
        let once = intent_filter(&g, &f);
        let twice = intent_filter(&once.graph, &f);
        prop_assert_eq!(&twice.graph, &once.graph);
        prop_assert!(twice.removed.is_empty());
        prop_assert_eq!(once.graph.edge_count() + once.removed.len(), g.edge_count());
        for e in once.graph.edges() {
            prop_assert_eq!(g.get(&e.key()), Some(e));
        }
    }

    #[test]
    fn graph_text_round_trips(g in graph()) {
        prop_assert_eq!(DependencyGraph::from_text(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn formal_model_round_trips(g in graph(), f in flow()) {
        let filtered = intent_filter(&g, &f).graph;
        let text = emit_formal_model(&filtered, &f).unwrap();
        prop_assert_eq!(&emit_formal_model(&filtered, &f).unwrap(), &text);
        let (back, back_flow) = parse_formal_model(&text).unwrap();
        prop_assert_eq!(back.active_keys(), filtered.active_keys());
        prop_assert_eq!(back_flow.to_text(), f.to_text());
    }

    #[test]
    fn auc_matches_pair_counting(
        points in prop::collection::vec((0..5u8, any::<bool>()), 2..14)
    ) {
        let scores: Vec<f64> = points.iter().map(|(s, _)| f64::from(*s) / 4.0).collect();
        let labels: Vec<bool> = points.iter().map(|(_, l)| *l).collect();
        let classes: BTreeSet<bool> = labels.iter().copied().collect();
        prop_assume!(classes.len() == 2);
        let a = auc(&scores, &labels).unwrap();
        prop_assert_eq!(a, brute_auc(&scores, &labels));
        let roc = roc_curve(&scores, &labels);
        prop_assert!((trapezoid_area(&roc) - a).abs() < 1e-12);
    }
}

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use protodep::corpus::{class_stats, generate_pairs, load_annotations, section_identifiers, PropertyKind};
use protodep::depgraph::{
    intent_filter, to_dot, DependencyGraph, EdgeKey, EdgeProvenance, EdgeStatus, FlowGraph, RemovalReason,
};
use protodep::feedback::{feedback_round, GroundTruthStore, ScriptTemplate, TruthTable, Verdict};
use protodep::formalgen::{emit_formal_model, parse_formal_model};
use protodep::model::{Prediction, Thresholds};

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

#[test]
fn mini_corpus_shape() {
    let labeled = load_annotations(&data("mini_corpus.jsonl")).unwrap();
    assert_eq!(labeled.len(), 32);
    let labels: usize = labeled.iter().map(|s| s.labels.kinds().len()).sum();
    assert_eq!(labels, 36);
    let sections = section_identifiers(&labeled);
    let sizes: Vec<usize> = sections.iter().map(|s| s.identifiers.len()).collect();
    assert_eq!(sizes, vec![12, 11]);
    let pairs = generate_pairs(&sections, &labeled);
    assert_eq!(pairs.len(), 12 * 11 + 11 * 10);
    let stats = class_stats(&pairs);
    assert_eq!(stats.total, pairs.len());
    assert_eq!(stats.n_pos.iter().sum::<usize>(), 36);
}

#[test]
fn separable_corpus_shape() {
    let samples = load_annotations(&data("separable_corpus.jsonl")).unwrap();
    assert_eq!(samples.len(), 50);
    assert_eq!(samples.iter().filter(|s| s.labels.any()).count(), 32);
}

#[test]
fn oracle_table_confirms_exactly_the_expert_labels() {
    let labeled = load_annotations(&data("mini_corpus.jsonl")).unwrap();
    let table = TruthTable::load(&data("oracle_table.tsv")).unwrap();
    let pairs = generate_pairs(&section_identifiers(&labeled), &labeled);
    for s in &pairs {
        for k in PropertyKind::ALL {
            let key = EdgeKey::new(&s.source, &s.destination, k);
            assert_eq!(table.lookup(&key), Some(s.labels.get(k)), "{key}");
        }
    }
}

#[test]
fn intent_fixture_removals_have_expected_reasons() {
    let raw = DependencyGraph::load(&data("intent/raw_graph.txt")).unwrap();
    let flow = FlowGraph::load(&data("intent/flow.tsv")).unwrap();
    let expected = DependencyGraph::load(&data("intent/expected_graph.txt")).unwrap();
    let out = intent_filter(&raw, &flow);
    assert_eq!(out.graph.active_keys(), expected.active_keys());
    let ghost = out.removed.iter().find(|r| r.key.source == "ghostField").unwrap();
    assert_eq!(ghost.reason, RemovalReason::SourceAbsent);
    let backwards = out
        .removed
        .iter()
        .find(|r| r.key.source == "SecurityModeComplete" && r.key.destination == "KRRCint")
        .unwrap();
    assert_eq!(backwards.reason, RemovalReason::NoFlowPath);
    assert_eq!(out.removed.len() + out.graph.edge_count(), raw.edge_count());
}

#[test]
fn connection_graph_emits_three_queries_and_parses_back() {
    let g = DependencyGraph::load(&data("rrc_connection_graph.txt")).unwrap();
    let flow = FlowGraph::load(&data("rrc_flow.tsv")).unwrap();
    let text = emit_formal_model(&g, &flow).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("query ")).count(), 3);
    assert_eq!(text.lines().filter(|l| l.starts_with("term ")).count(), 8);
    let (back, back_flow) = parse_formal_model(&text).unwrap();
    assert_eq!(back.active_keys(), g.active_keys());
    assert_eq!(back_flow.to_text(), flow.to_text());
}

#[test]
fn connection_graph_dot_clusters_includes() {
    let g = DependencyGraph::load(&data("rrc_connection_graph.txt")).unwrap();
    let dot = to_dot(&g);
    assert_eq!(dot.matches("subgraph").count(), 3);
    assert_eq!(dot.matches(" -> ").count(), g.edge_count());
    assert_eq!(dot, to_dot(&DependencyGraph::from_text(&g.to_text()).unwrap()));
}

#[test]
fn feedback_round_on_shipped_oracle() {
    let t = Thresholds::default();
    let mut probs = [0.05; 6];
    probs[PropertyKind::Generate.ordinal()] = 0.5;
    probs[PropertyKind::Integrity.ordinal()] = 0.45;
    let preds = vec![Prediction::new("KgNB", "KRRCint", probs, 0, &t)];
    let template = ScriptTemplate::new(&std::fs::read_to_string(data("probe_template.txt")).unwrap()).unwrap();
    let table = TruthTable::load(&data("oracle_table.tsv")).unwrap();
    let mut graph = DependencyGraph::new();
    let mut store = GroundTruthStore::new();
    let round = feedback_round(&mut graph, &mut store, &preds, &t, &template, &table).unwrap();

    assert_eq!(round.probes.len(), 2);
    assert_eq!(round.scripts.len(), 2);
    assert!(round.scripts.iter().all(|(id, s)| s.contains(id.as_str())));
    assert_eq!((round.summary.confirmed, round.summary.refuted), (1, 1));
    let gen = graph
        .get(&EdgeKey::new("KgNB", "KRRCint", PropertyKind::Generate))
        .unwrap();
    assert_eq!(gen.confidence, 1.0);
    assert_eq!(gen.provenance, EdgeProvenance::EvidenceConfirmed);
    let integ = graph
        .get(&EdgeKey::new("KgNB", "KRRCint", PropertyKind::Integrity))
        .unwrap();
    assert_eq!(integ.status, EdgeStatus::Refuted);
    assert_eq!(store.len(), 2);
    let verdicts: BTreeSet<Verdict> = round.records.iter().map(|r| r.verdict).collect();
    assert_eq!(verdicts.len(), 2);
}

use crate::depgraph::{DependencyEdge, DependencyGraph};
use crate::error::Result;
use crate::feedback::apply::{apply_evidence, ApplySummary};
use crate::feedback::evidence::{parse_evidence_log, EvidenceRecord};
use crate::feedback::oracle::{run_oracle, TruthTable};
use crate::feedback::script::{emit_test_script, probe_id, ScriptTemplate};
use crate::feedback::select::select_low_confidence;
use crate::feedback::store::GroundTruthStore;
use crate::model::{Prediction, Thresholds};

/// Everything produced by one pass of the evidence loop.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackRound {
    pub probes: Vec<DependencyEdge>,
    /// `(probe id, script)` per probe.
    pub scripts: Vec<(String, String)>,
    /// Simulated platform log in the evidence grammar.
    pub log: String,
    pub records: Vec<EvidenceRecord>,
    pub summary: ApplySummary,
}

/// Adds the low-confidence band to `graph` as candidate edges, probes each
/// one against `table`, and applies the parsed log back onto the graph.
pub fn feedback_round(
    graph: &mut DependencyGraph,
    store: &mut GroundTruthStore,
    predictions: &[Prediction],
    thresholds: &Thresholds,
    template: &ScriptTemplate,
    table: &TruthTable,
) -> Result<FeedbackRound> {
    let probes = select_low_confidence(predictions, thresholds);
    for e in &probes {
        graph.insert(e.clone())?;
    }
    let scripts = probes
        .iter()
        .map(|e| (probe_id(&e.key()), emit_test_script(e, template)))
        .collect();
    let answers = run_oracle(&probes, table)?;
    let log: String = answers
        .iter()
        .map(|r| r.to_log_line(&probe_id(&r.key())) + "\n")
        .collect();
    let records = parse_evidence_log(&log)?.records;
    let summary = apply_evidence(graph, store, &records);
    Ok(FeedbackRound {
        probes,
        scripts,
        log,
        records,
        summary,
    })
}

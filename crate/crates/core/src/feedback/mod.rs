//! Evidence loop: route low-confidence edges to probes, parse probe
//! results, and fold verdicts into the graph and the ground-truth store.

mod apply;
mod evidence;
mod oracle;
mod round;
mod script;
mod select;
mod store;

pub use apply::{apply_evidence, evidence_samples, with_evidence, ApplySummary};
pub use evidence::{parse_evidence_log, EvidenceRecord, ParsedLog, Verdict};
pub use oracle::{run_oracle, simulated_oracle, TruthTable};
pub use round::{feedback_round, FeedbackRound};
pub use script::{emit_test_script, probe_id, probe_stanza, ScriptTemplate, DEFAULT_TEMPLATE};
pub use select::{route_predictions, select_low_confidence, Routed};
pub use store::{GroundTruthStore, StoreEntry};

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::PropertyKind;
use crate::depgraph::{DependencyEdge, EdgeKey};
use crate::error::{Error, Result};
use crate::feedback::evidence::{EvidenceRecord, Verdict};

/// Ground truth for the simulated platform: per-key truth values plus an
/// optional default.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TruthTable {
    pub entries: BTreeMap<EdgeKey, bool>,
    pub default: Option<bool>,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

impl TruthTable {
    /// Lines `source<TAB>destination<TAB>property<TAB>true|false`, or
    /// `default<TAB>true|false`. `#` lines and blank lines are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut t = TruthTable::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            let f: Vec<&str> = line.split('\t').collect();
            match f.as_slice() {
                ["default", v] => {
                    t.default = Some(parse_bool(v).ok_or_else(|| err(format!("bad truth value {v:?}")))?);
                }
                [src, dst, prop, v] => {
                    let p: PropertyKind = prop.parse().map_err(|e: Error| err(e.to_string()))?;
                    let v = parse_bool(v).ok_or_else(|| err(format!("bad truth value {v:?}")))?;
                    if t.entries.insert(EdgeKey::new(src, dst, p), v).is_some() {
                        return Err(err(format!("duplicate entry {src} -> {dst} [{p}]")));
                    }
                }
                _ => return Err(err(format!("expected 2 or 4 tab-separated fields, got {}", f.len()))),
            }
        }
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_text(&text)
    }

    pub fn lookup(&self, key: &EdgeKey) -> Option<bool> {
        self.entries.get(key).copied().or(self.default)
    }
}

/// Stand-in for the experiment platform: answers from the truth table.
pub fn simulated_oracle(edge: &DependencyEdge, table: &TruthTable) -> Result<EvidenceRecord> {
    let key = edge.key();
    let truth = table
        .lookup(&key)
        .ok_or_else(|| Error::Lookup(format!("no truth value for {key} and no default")))?;
    Ok(EvidenceRecord {
        source: edge.source.clone(),
        destination: edge.destination.clone(),
        property: edge.property,
        verdict: if truth { Verdict::Confirmed } else { Verdict::Refuted },
        evidence_ref: format!("simulated:{}:{}:{}", edge.property, edge.source, edge.destination),
        timestamp: String::from("t0000"),
        detail: String::from("simulated"),
    })
}

/// Queries the oracle for every edge in parallel. Records come back in key
/// order with logical timestamps `t0001`, `t0002`, ….
pub fn run_oracle(edges: &[DependencyEdge], table: &TruthTable) -> Result<Vec<EvidenceRecord>> {
    let mut sorted: Vec<&DependencyEdge> = edges.iter().collect();
    sorted.sort_by_key(|e| e.key());
    sorted.dedup_by_key(|e| e.key());
    let mut records = sorted
        .par_iter()
        .map(|e| simulated_oracle(e, table))
        .collect::<Result<Vec<_>>>()?;
    for (i, r) in records.iter_mut().enumerate() {
        r.timestamp = format!("t{:04}", i + 1);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depgraph::EdgeProvenance;

    fn edge(s: &str, d: &str) -> DependencyEdge {
        DependencyEdge::new(s, d, PropertyKind::Integrity, 0.5, EdgeProvenance::Model)
    }

    #[test]
    fn verdicts_from_table() {
        let t = TruthTable::from_text("a\tb\tintegrity\tfalse\nc\td\tintegrity\ttrue\n").unwrap();
        assert_eq!(simulated_oracle(&edge("a", "b"), &t).unwrap().verdict, Verdict::Refuted);
        let r = simulated_oracle(&edge("c", "d"), &t).unwrap();
        assert_eq!(r.verdict, Verdict::Confirmed);
        assert_eq!(r.evidence_ref, "simulated:integrity:c:d");
        assert!(matches!(simulated_oracle(&edge("x", "y"), &t), Err(Error::Lookup(_))));
    }

    #[test]
    fn default_row() {
        let t = TruthTable::from_text("# table\ndefault\tfalse\n").unwrap();
        assert_eq!(simulated_oracle(&edge("x", "y"), &t).unwrap().verdict, Verdict::Refuted);
    }

    #[test]
    fn run_is_sorted() {
        let t = TruthTable::from_text("default\ttrue\n").unwrap();
        let r = run_oracle(&[edge("b", "c"), edge("a", "b")], &t).unwrap();
        assert_eq!(r[0].source, "a");
        assert_eq!(r[1].timestamp, "t0002");
    }
}

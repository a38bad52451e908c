use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::PropertyKind;
use crate::error::{Error, Result};
use crate::model::Prediction;

const HEADER: &str = "# depgraph v1";

/// Ordered by trust: `Model < Expert < EvidenceConfirmed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeProvenance {
    Model,
    Expert,
    EvidenceConfirmed,
}

impl EdgeProvenance {
    pub fn name(self) -> &'static str {
        match self {
            EdgeProvenance::Model => "model",
            EdgeProvenance::Expert => "expert",
            EdgeProvenance::EvidenceConfirmed => "evidence-confirmed",
        }
    }
}

impl FromStr for EdgeProvenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model" => Ok(EdgeProvenance::Model),
            "expert" => Ok(EdgeProvenance::Expert),
            "evidence-confirmed" => Ok(EdgeProvenance::EvidenceConfirmed),
            _ => Err(Error::Input(format!("unknown provenance {s:?}"))),
        }
    }
}

/// `Refuted` orders above `Active` so that `max` lets refutation win.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeStatus {
    Active,
    Refuted,
}

impl EdgeStatus {
    pub fn name(self) -> &'static str {
        match self {
            EdgeStatus::Active => "active",
            EdgeStatus::Refuted => "refuted",
        }
    }
}

impl FromStr for EdgeStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "active" => Ok(EdgeStatus::Active),
            "refuted" => Ok(EdgeStatus::Refuted),
            _ => Err(Error::Input(format!("unknown edge status {s:?}"))),
        }
    }
}

/// `(source, destination, property)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeKey {
    pub source: String,
    pub destination: String,
    pub property: PropertyKind,
}

impl EdgeKey {
    pub fn new(source: &str, destination: &str, property: PropertyKind) -> Self {
        EdgeKey {
            source: source.to_owned(),
            destination: destination.to_owned(),
            property,
        }
    }
}

impl fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {} [{}]", self.source, self.destination, self.property)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyEdge {
    pub source: String,
    pub destination: String,
    pub property: PropertyKind,
    pub confidence: f64,
    pub provenance: EdgeProvenance,
    pub status: EdgeStatus,
}

impl DependencyEdge {
    pub fn new(
        source: &str,
        destination: &str,
        property: PropertyKind,
        confidence: f64,
        provenance: EdgeProvenance,
    ) -> Self {
        DependencyEdge {
            source: source.to_owned(),
            destination: destination.to_owned(),
            property,
            confidence,
            provenance,
            status: EdgeStatus::Active,
        }
    }

    pub fn key(&self) -> EdgeKey {
        EdgeKey::new(&self.source, &self.destination, self.property)
    }

    pub fn is_active(&self) -> bool {
        self.status == EdgeStatus::Active
    }

    /// Max confidence, higher provenance, refutation dominant.
    pub fn merged(&self, other: &DependencyEdge) -> DependencyEdge {
        DependencyEdge {
            confidence: self.confidence.max(other.confidence),
            provenance: self.provenance.max(other.provenance),
            status: self.status.max(other.status),
            ..self.clone()
        }
    }
}

fn check_identifier(id: &str) -> Result<()> {
    if id.is_empty() || id.contains(['\t', '\n', '\r']) {
        return Err(Error::Input(format!("invalid identifier {id:?}")));
    }
    Ok(())
}

/// Identifiers and at most one edge per [`EdgeKey`]. Every edge endpoint is
/// a node.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DependencyGraph {
    nodes: BTreeSet<String>,
    edges: BTreeMap<EdgeKey, DependencyEdge>,
}

impl DependencyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: &str) -> Result<()> {
        check_identifier(id)?;
        self.nodes.insert(id.to_owned());
        Ok(())
    }

    /// Inserts `edge`, merging with an existing edge of the same key.
    pub fn insert(&mut self, edge: DependencyEdge) -> Result<()> {
        if !(0.0..=1.0).contains(&edge.confidence) {
            return Err(Error::Input(format!("confidence {} outside [0, 1]", edge.confidence)));
        }
        if edge.source == edge.destination {
            return Err(Error::Input(format!("self edge on {:?}", edge.source)));
        }
        self.add_node(&edge.source)?;
        self.add_node(&edge.destination)?;
        let key = edge.key();
        let merged = match self.edges.get(&key) {
            Some(old) => old.merged(&edge),
            None => edge,
        };
        self.edges.insert(key, merged);
        Ok(())
    }

    /// Replaces the edge stored under the key of `edge`.
    pub fn replace(&mut self, edge: DependencyEdge) -> Result<()> {
        let key = edge.key();
        self.edges.remove(&key);
        self.insert(edge)
    }

    pub fn get(&self, key: &EdgeKey) -> Option<&DependencyEdge> {
        self.edges.get(key)
    }

    pub fn get_mut(&mut self, key: &EdgeKey) -> Option<&mut DependencyEdge> {
        self.edges.get_mut(key)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }

    pub fn contains_node(&self, id: &str) -> bool {
        self.nodes.contains(id)
    }

    /// All edges in key order, refuted ones included.
    pub fn edges(&self) -> impl Iterator<Item = &DependencyEdge> {
        self.edges.values()
    }

    pub fn active_edges(&self) -> impl Iterator<Item = &DependencyEdge> {
        self.edges.values().filter(|e| e.is_active())
    }

    pub fn active_keys(&self) -> BTreeSet<EdgeKey> {
        self.active_edges().map(DependencyEdge::key).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(crate) fn retain_edges<F: FnMut(&DependencyEdge) -> bool>(&mut self, mut f: F) {
        self.edges.retain(|_, e| f(e));
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER}\n");
        for n in &self.nodes {
            out.push_str(&format!("node\t{n}\n"));
        }
        for e in self.edges.values() {
            out.push_str(&format!(
                "edge\t{}\t{}\t{}\t{}\t{}\t{}\n",
                e.source,
                e.destination,
                e.property,
                e.confidence,
                e.provenance.name(),
                e.status.name()
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim_end() == HEADER => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected header {HEADER:?}"),
                })
            }
        }
        let mut g = DependencyGraph::new();
        for (i, line) in lines {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse { line: line_no, msg };
            let f: Vec<&str> = line.split('\t').collect();
            match f.as_slice() {
                ["node", id] => g.add_node(id).map_err(|e| err(e.to_string()))?,
                ["edge", src, dst, prop, conf, prov, status] => {
                    let property: PropertyKind = prop.parse().map_err(|e: Error| err(e.to_string()))?;
                    let confidence: f64 = conf.parse().map_err(|_| err(format!("bad confidence {conf:?}")))?;
                    let mut edge = DependencyEdge::new(
                        src,
                        dst,
                        property,
                        confidence,
                        prov.parse().map_err(|e: Error| err(e.to_string()))?,
                    );
                    edge.status = status.parse().map_err(|e: Error| err(e.to_string()))?;
                    if g.edges.contains_key(&edge.key()) {
                        return Err(err(format!("duplicate edge {}", edge.key())));
                    }
                    g.insert(edge).map_err(|e| err(e.to_string()))?;
                }
                _ => return Err(err(format!("unrecognized record {line:?}"))),
            }
        }
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// One model edge per (pair, property) with probability at least `tau`.
/// Every pair's identifiers become nodes.
pub fn build_graph(predictions: &[Prediction], tau: f64) -> Result<DependencyGraph> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Config(format!("acceptance threshold {tau} outside (0, 1)")));
    }
    let mut g = DependencyGraph::new();
    for p in predictions {
        g.add_node(&p.source)?;
        g.add_node(&p.destination)?;
        for (kind, &prob) in PropertyKind::ALL.iter().zip(&p.probs) {
            if prob >= tau {
                g.insert(DependencyEdge::new(
                    &p.source,
                    &p.destination,
                    *kind,
                    prob,
                    EdgeProvenance::Model,
                ))?;
            }
        }
    }
    Ok(g)
}

pub fn merge_graphs(a: &DependencyGraph, b: &DependencyGraph) -> DependencyGraph {
    let mut out = a.clone();
    out.nodes.extend(b.nodes.iter().cloned());
    for (k, e) in &b.edges {
        let merged = match out.edges.get(k) {
            Some(old) => old.merged(e),
            None => e.clone(),
        };
        out.edges.insert(k.clone(), merged);
    }
    out
}

/// Active-edge key differences between a prediction and a reference.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphDiff {
    /// In the reference, not predicted.
    pub missing: Vec<EdgeKey>,
    /// Predicted, not in the reference.
    pub extra: Vec<EdgeKey>,
}

pub fn graph_diff(predicted: &DependencyGraph, ground_truth: &DependencyGraph) -> GraphDiff {
    let p = predicted.active_keys();
    let t = ground_truth.active_keys();
    GraphDiff {
        missing: t.difference(&p).cloned().collect(),
        extra: p.difference(&t).cloned().collect(),
    }
}

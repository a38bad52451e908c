use std::fmt;

use crate::depgraph::flow::FlowGraph;
use crate::depgraph::graph::{DependencyGraph, EdgeKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemovalReason {
    SourceAbsent,
    DestinationAbsent,
    NoFlowPath,
}

impl fmt::Display for RemovalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RemovalReason::SourceAbsent => "source absent from flow",
            RemovalReason::DestinationAbsent => "destination absent from flow",
            RemovalReason::NoFlowPath => "no message chain from source to destination",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Removal {
    pub key: EdgeKey,
    pub reason: RemovalReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub graph: DependencyGraph,
    pub removed: Vec<Removal>,
}

impl FilterOutcome {
    /// One tab-separated line per removed edge.
    pub fn report(&self) -> String {
        self.removed
            .iter()
            .map(|r| {
                format!(
                    "{}\t{}\t{}\t{}\n",
                    r.key.source, r.key.destination, r.key.property, r.reason
                )
            })
            .collect()
    }
}

/// Keeps an edge when both endpoints occur in the flow and some message
/// carrying the destination is reachable from a message carrying the source.
/// Nodes are left untouched.
pub fn intent_filter(g: &DependencyGraph, flow: &FlowGraph) -> FilterOutcome {
    let reach = flow.reachability();
    let mut removed = Vec::new();
    let mut graph = g.clone();
    graph.retain_edges(|e| {
        let src = flow.occurrences(&e.source);
        let dst = flow.occurrences(&e.destination);
        let reason = if src.is_empty() {
            Some(RemovalReason::SourceAbsent)
        } else if dst.is_empty() {
            Some(RemovalReason::DestinationAbsent)
        } else if !src.iter().any(|&i| dst.iter().any(|&j| reach[i][j])) {
            Some(RemovalReason::NoFlowPath)
        } else {
            None
        };
        if let Some(reason) = reason {
            removed.push(Removal { key: e.key(), reason });
        }
        reason.is_none()
    });
    FilterOutcome { graph, removed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PropertyKind;
    use crate::depgraph::flow::FlowMessage;
    use crate::depgraph::graph::{DependencyEdge, EdgeProvenance};

    fn edge(s: &str, d: &str, p: PropertyKind) -> DependencyEdge {
        DependencyEdge::new(s, d, p, 0.9, EdgeProvenance::Model)
    }

    #[test]
    fn keeps_only_supported_edge() {
        let mut g = DependencyGraph::new();
        g.insert(edge("a", "b", PropertyKind::Include)).unwrap();
        g.insert(edge("c", "d", PropertyKind::Integrity)).unwrap();
        let flow = FlowGraph::new(vec![FlowMessage::new("UE", "gNB", "msg", &["a", "b"])]).unwrap();
        let out = intent_filter(&g, &flow);
        assert_eq!(
            out.graph.active_keys().into_iter().collect::<Vec<_>>(),
            [EdgeKey::new("a", "b", PropertyKind::Include)]
        );
        assert_eq!(out.removed.len(), 1);
        assert_eq!(out.removed[0].reason, RemovalReason::SourceAbsent);
    }

    #[test]
    fn backwards_edge_removed() {
        let mut g = DependencyGraph::new();
        g.insert(edge("b", "a", PropertyKind::Generate)).unwrap();
        g.insert(edge("a", "b", PropertyKind::Generate)).unwrap();
        let flow = FlowGraph::new(vec![
            FlowMessage::new("UE", "gNB", "m1", &["a"]),
            FlowMessage::new("gNB", "UE", "m2", &["b"]),
        ])
        .unwrap();
        let out = intent_filter(&g, &flow);
        assert_eq!(out.graph.edge_count(), 1);
        assert_eq!(out.removed[0].reason, RemovalReason::NoFlowPath);
    }
}

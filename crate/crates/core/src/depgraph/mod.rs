//! Typed dependency graphs: construction from predictions, merging,
//! flow-based intent filtering, diffing, and DOT output.

mod dot;
mod filter;
mod flow;
mod graph;

pub use dot::{to_dot, to_dot_with, DotOptions};
pub use filter::{intent_filter, FilterOutcome, Removal, RemovalReason};
pub use flow::{FlowGraph, FlowMessage};
pub use graph::{
    build_graph, graph_diff, merge_graphs, DependencyEdge, DependencyGraph, EdgeKey, EdgeProvenance, EdgeStatus,
    GraphDiff,
};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::corpus::PropertyKind;
use crate::depgraph::graph::{DependencyEdge, DependencyGraph, EdgeProvenance};

#[derive(Debug, Clone, Copy, Default)]
pub struct DotOptions {
    /// Draw refuted edges in red instead of omitting them.
    pub show_refuted: bool,
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn style(p: PropertyKind) -> &'static str {
    match p {
        PropertyKind::Confidentiality => "style=bold, arrowhead=diamond",
        PropertyKind::Integrity => "style=solid, arrowhead=normal",
        PropertyKind::Authentication => "style=dashed, arrowhead=vee",
        PropertyKind::Accounting => "style=solid, arrowhead=dot",
        PropertyKind::Include => "style=dotted, arrowhead=odiamond",
        PropertyKind::Generate => "style=dashed, arrowhead=onormal",
    }
}

fn color(e: &DependencyEdge) -> &'static str {
    if !e.is_active() {
        return "red";
    }
    match e.provenance {
        EdgeProvenance::Model => "black",
        EdgeProvenance::Expert => "blue",
        EdgeProvenance::EvidenceConfirmed => "darkgreen",
    }
}

pub fn to_dot(g: &DependencyGraph) -> String {
    to_dot_with(g, DotOptions::default())
}

/// Nodes sorted; each Include source gets a box cluster around what it
/// includes; every edge is one labeled statement in key order.
pub fn to_dot_with(g: &DependencyGraph, opts: DotOptions) -> String {
    let mut out = String::from("digraph protodep {\n");
    if g.is_empty() {
        out.push_str("}\n");
        return out;
    }
    out.push_str("  rankdir=LR;\n  node [shape=ellipse];\n");
    for n in g.nodes() {
        let _ = writeln!(out, "  {};", quote(n));
    }
    let shown: Vec<&DependencyEdge> = g.edges().filter(|e| e.is_active() || opts.show_refuted).collect();
    let mut clusters: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in shown
        .iter()
        .filter(|e| e.property == PropertyKind::Include && e.is_active())
    {
        clusters.entry(&e.source).or_default().push(&e.destination);
    }
    for (i, (src, members)) in clusters.iter().enumerate() {
        let _ = writeln!(out, "  subgraph \"cluster_{i}\" {{");
        let _ = writeln!(out, "    label={};\n    shape=box;\n    style=rounded;", quote(src));
        for m in members {
            let _ = writeln!(out, "    {};", quote(m));
        }
        out.push_str("  }\n");
    }
    for e in shown {
        let _ = writeln!(
            out,
            "  {} -> {} [label=\"{} {}\", {}, color={}];",
            quote(&e.source),
            quote(&e.destination),
            e.property,
            e.confidence,
            style(e.property),
            color(e)
        );
    }
    out.push_str("}\n");
    out
}

//! Formal-model emission in a small applied-pi-style grammar, its parser,
//! and a plain-text review report.
//!
//! ```text
//! (* protodep formal model v1 *)
//! name n0 "CipherAlgorithm".
//! process p1 = out("UE", "gNB", n3, (n0, n1)).
//! term include n3 n0.
//! query integrity n1 n0: event(accept(n0)) ==> event(protect(n1, n0)).
//! ```
//!
//! Names are the sorted union of graph nodes, flow identifiers and flow
//! commands. Include and Generate edges become `term` lines; the other four
//! properties become one `query` each. Refuted edges are never written.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::corpus::PropertyKind;
use crate::depgraph::{DependencyEdge, DependencyGraph, EdgeProvenance, FlowGraph, FlowMessage, GraphDiff};
use crate::error::{Error, Result};

pub const HEADER: &str = "(* protodep formal model v1 *)";

/// Query body for a security property; `None` for structural ones.
pub fn query_formula(p: PropertyKind, src: &str, dst: &str) -> Option<String> {
    Some(match p {
        PropertyKind::Confidentiality => format!("not attacker({dst})"),
        PropertyKind::Integrity => format!("event(accept({dst})) ==> event(protect({src}, {dst}))"),
        PropertyKind::Authentication => format!("event(accept({dst})) ==> event(send({src}))"),
        PropertyKind::Accounting => format!("event(count({dst}, c)) ==> fresh(c, {src})"),
        PropertyKind::Include | PropertyKind::Generate => return None,
    })
}

fn check_name(s: &str) -> Result<()> {
    if s.contains(['"', '\n', '\r']) {
        return Err(Error::Input(format!("identifier {s:?} cannot be quoted")));
    }
    Ok(())
}

fn active_edges_outside_flow<'a>(g: &'a DependencyGraph, flow: &FlowGraph) -> Vec<&'a DependencyEdge> {
    g.active_edges()
        .filter(|e| !flow.mentions(&e.source) || !flow.mentions(&e.destination))
        .collect()
}

pub fn emit_formal_model(g: &DependencyGraph, flow: &FlowGraph) -> Result<String> {
    let bad = active_edges_outside_flow(g, flow);
    if !bad.is_empty() {
        return Err(Error::Consistency(bad.iter().map(|e| e.key().to_string()).collect()));
    }
    let mut names: BTreeSet<&str> = g.nodes().collect();
    for m in &flow.messages {
        names.insert(&m.command);
        names.extend(m.identifiers.iter().map(String::as_str));
        check_name(&m.sender)?;
        check_name(&m.receiver)?;
    }
    let index: BTreeMap<&str, String> = names.iter().enumerate().map(|(i, n)| (*n, format!("n{i}"))).collect();

    let mut out = format!("{HEADER}\n");
    for (n, id) in &index {
        check_name(n)?;
        let _ = writeln!(out, "name {id} \"{n}\".");
    }
    for (i, m) in flow.messages.iter().enumerate() {
        let args: Vec<&str> = m.identifiers.iter().map(|x| index[x.as_str()].as_str()).collect();
        let _ = writeln!(
            out,
            "process p{} = out(\"{}\", \"{}\", {}, ({})).",
            i + 1,
            m.sender,
            m.receiver,
            index[m.command.as_str()],
            args.join(", ")
        );
    }
    let (structural, security): (Vec<&DependencyEdge>, Vec<&DependencyEdge>) =
        g.active_edges().partition(|e| e.property.is_structural());
    for e in structural {
        let _ = writeln!(
            out,
            "term {} {} {}.",
            e.property,
            index[e.source.as_str()],
            index[e.destination.as_str()]
        );
    }
    for e in security {
        let (s, d) = (&index[e.source.as_str()], &index[e.destination.as_str()]);
        let f = query_formula(e.property, s, d).expect("security property");
        let _ = writeln!(out, "query {} {s} {d}: {f}.", e.property);
    }
    Ok(out)
}

struct Cursor<'a> {
    rest: &'a str,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn eat(&mut self, lit: &str) -> Result<()> {
        match self.rest.strip_prefix(lit) {
            Some(r) => {
                self.rest = r;
                Ok(())
            }
            None => Err(self.err(format!("expected {lit:?} at {:?}", self.rest))),
        }
    }

    fn word(&mut self) -> Result<&'a str> {
        let end = self
            .rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(self.rest.len());
        if end == 0 {
            return Err(self.err(format!("expected a word at {:?}", self.rest)));
        }
        let (w, r) = self.rest.split_at(end);
        self.rest = r;
        Ok(w)
    }

    fn quoted(&mut self) -> Result<&'a str> {
        self.eat("\"")?;
        let end = self.rest.find('"').ok_or_else(|| self.err("unterminated string"))?;
        let (s, r) = self.rest.split_at(end);
        self.rest = &r[1..];
        Ok(s)
    }

    fn finish(&self) -> Result<()> {
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(self.err(format!("trailing text {:?}", self.rest)))
        }
    }
}

/// Recovers the active-edge graph and the flow skeleton. Edges come back
/// with confidence 1.0 and model provenance; nodes are the declared names.
pub fn parse_formal_model(text: &str) -> Result<(DependencyGraph, FlowGraph)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header {HEADER:?}"),
            })
        }
    }
    let mut names: BTreeMap<String, String> = BTreeMap::new();
    let mut graph = DependencyGraph::new();
    let mut messages = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut c = Cursor {
            rest: line,
            line: i + 1,
        };
        let resolve = |c: &Cursor, id: &str| -> Result<String> {
            names
                .get(id)
                .cloned()
                .ok_or_else(|| c.err(format!("undeclared name {id}")))
        };
        match c.word()? {
            "name" => {
                c.eat(" ")?;
                let id = c.word()?.to_owned();
                c.eat(" ")?;
                let n = c.quoted()?;
                c.eat(".")?;
                c.finish()?;
                if id != format!("n{}", names.len()) {
                    return Err(c.err(format!("name {id} out of sequence")));
                }
                graph.add_node(n).map_err(|e| c.err(e.to_string()))?;
                names.insert(id, n.to_owned());
            }
            "process" => {
                c.eat(" ")?;
                let pid = c.word()?;
                if pid != format!("p{}", messages.len() + 1) {
                    return Err(c.err(format!("process {pid} out of sequence")));
                }
                c.eat(" = out(")?;
                let sender = c.quoted()?.to_owned();
                c.eat(", ")?;
                let receiver = c.quoted()?.to_owned();
                c.eat(", ")?;
                let w = c.word()?;
                let command = resolve(&c, w)?;
                c.eat(", (")?;
                let mut identifiers = Vec::new();
                while !c.rest.starts_with(')') {
                    if !identifiers.is_empty() {
                        c.eat(", ")?;
                    }
                    let w = c.word()?;
                    identifiers.push(resolve(&c, w)?);
                }
                c.eat(")).")?;
                c.finish()?;
                messages.push(FlowMessage {
                    sender,
                    receiver,
                    command,
                    identifiers,
                });
            }
            kw @ ("term" | "query") => {
                c.eat(" ")?;
                let prop: PropertyKind = c.word()?.parse().map_err(|e: Error| c.err(e.to_string()))?;
                if (kw == "term") != prop.is_structural() {
                    return Err(c.err(format!("{prop} cannot appear in a {kw} line")));
                }
                c.eat(" ")?;
                let s_id = c.word()?;
                c.eat(" ")?;
                let d_id = c.word()?;
                let (src, dst) = (resolve(&c, s_id)?, resolve(&c, d_id)?);
                if kw == "query" {
                    let f = query_formula(prop, s_id, d_id).expect("security property");
                    c.eat(": ")?;
                    c.eat(&f)?;
                }
                c.eat(".")?;
                c.finish()?;
                let edge = DependencyEdge::new(&src, &dst, prop, 1.0, EdgeProvenance::Model);
                if graph.get(&edge.key()).is_some() {
                    return Err(c.err(format!("duplicate edge {}", edge.key())));
                }
                graph.insert(edge).map_err(|e| c.err(e.to_string()))?;
            }
            other => return Err(c.err(format!("unknown declaration {other:?}"))),
        }
    }
    let flow = FlowGraph::new(messages)?;
    Ok((graph, flow))
}

/// Per-property edge counts, optional diff against a reference, and the
/// low-confidence list.
pub fn emit_report(g: &DependencyGraph, diff: Option<&GraphDiff>, low_confidence: &[DependencyEdge]) -> String {
    let mut out = String::from("protodep dependency report\n\n");
    let _ = writeln!(
        out,
        "nodes: {}\nactive edges: {}\nrefuted edges: {}\n",
        g.node_count(),
        g.active_edges().count(),
        g.edges().filter(|e| !e.is_active()).count()
    );
    out.push_str("edges per property:\n");
    for p in PropertyKind::ALL {
        let n = g.active_edges().filter(|e| e.property == p).count();
        let _ = writeln!(out, "  {:<16}{n}", p.name());
    }
    if let Some(d) = diff {
        let _ = writeln!(out, "\nextra (predicted, not in reference): {}", d.extra.len());
        for k in &d.extra {
            let _ = writeln!(out, "  {k}");
        }
        let _ = writeln!(out, "missing (in reference, not predicted): {}", d.missing.len());
        for k in &d.missing {
            let _ = writeln!(out, "  {k}");
        }
    }
    let _ = writeln!(out, "\nlow confidence: {}", low_confidence.len());
    for e in low_confidence {
        let _ = writeln!(out, "  {} ({})", e.key(), e.confidence);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depgraph::{graph_diff, EdgeKey, EdgeStatus};

    fn flow() -> FlowGraph {
        FlowGraph::new(vec![
            FlowMessage::new("UE", "gNB", "RRCSetupRequest", &["ue-Identity", "establishmentCause"]),
            FlowMessage::new("gNB", "UE", "SecurityModeCommand", &["KRRCenc", "CipherAlgorithm"]),
        ])
        .unwrap()
    }

    fn edge(s: &str, d: &str, p: PropertyKind) -> DependencyEdge {
        DependencyEdge::new(s, d, p, 0.8, EdgeProvenance::Model)
    }

    #[test]
    fn empty_graph_declarations_only() {
        let text = emit_formal_model(&DependencyGraph::new(), &flow()).unwrap();
        assert_eq!(text.matches("\nquery ").count(), 0);
        assert_eq!(text.matches("\nname ").count(), 6);
    }

    #[test]
    fn one_secrecy_query() {
        let mut g = DependencyGraph::new();
        g.insert(edge("KRRCenc", "CipherAlgorithm", PropertyKind::Confidentiality))
            .unwrap();
        let text = emit_formal_model(&g, &flow()).unwrap();
        let queries: Vec<&str> = text.lines().filter(|l| l.starts_with("query")).collect();
        assert_eq!(queries, ["query confidentiality n1 n0: not attacker(n0)."]);
        assert!(text.contains("name n0 \"CipherAlgorithm\"."));
    }

    #[test]
    fn round_trip_and_refuted_hidden() {
        let mut g = DependencyGraph::new();
        g.insert(edge("RRCSetupRequest", "ue-Identity", PropertyKind::Include))
            .unwrap();
        g.insert(edge("KRRCenc", "CipherAlgorithm", PropertyKind::Integrity))
            .unwrap();
        let mut r = edge("KRRCenc", "ue-Identity", PropertyKind::Accounting);
        r.status = EdgeStatus::Refuted;
        g.insert(r).unwrap();
        let text = emit_formal_model(&g, &flow()).unwrap();
        assert!(!text.contains("accounting"));
        let (pg, pf) = parse_formal_model(&text).unwrap();
        assert_eq!(pg.active_keys(), g.active_keys());
        assert_eq!(pf, flow());
        assert_eq!(emit_formal_model(&pg, &pf).unwrap(), text);
    }

    #[test]
    fn tampered_query_rejected() {
        let mut g = DependencyGraph::new();
        g.insert(edge("KRRCenc", "CipherAlgorithm", PropertyKind::Integrity))
            .unwrap();
        let text = emit_formal_model(&g, &flow()).unwrap().replace("protect(", "protekt(");
        let last = text.lines().count();
        assert!(matches!(parse_formal_model(&text), Err(Error::Parse { line, .. }) if line == last));
    }

    #[test]
    fn edge_outside_flow_is_inconsistent() {
        let mut g = DependencyGraph::new();
        g.insert(edge("KRRCenc", "ghost", PropertyKind::Integrity)).unwrap();
        match emit_formal_model(&g, &flow()) {
            Err(Error::Consistency(v)) => assert_eq!(v, ["KRRCenc -> ghost [integrity]"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn report_lists_extras() {
        let mut pred = DependencyGraph::new();
        pred.insert(edge("a", "b", PropertyKind::Integrity)).unwrap();
        pred.insert(edge("a", "c", PropertyKind::Generate)).unwrap();
        let d = graph_diff(&pred, &DependencyGraph::new());
        let rep = emit_report(&pred, Some(&d), &[]);
        assert!(rep.contains("extra (predicted, not in reference): 2"));
        assert!(rep.contains(&EdgeKey::new("a", "c", PropertyKind::Generate).to_string()));
        let empty = emit_report(&DependencyGraph::new(), None, &[]);
        assert!(empty.contains("integrity       0"));
        assert_eq!(rep, emit_report(&pred, Some(&d), &[]));
    }
}

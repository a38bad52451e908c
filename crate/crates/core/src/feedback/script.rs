use std::collections::BTreeSet;

use crate::corpus::PropertyKind;
use crate::depgraph::{DependencyEdge, EdgeKey};
use crate::error::{Error, Result};

const REQUIRED: [&str; 3] = ["source", "destination", "property"];
const KNOWN: [&str; 6] = ["source", "destination", "property", "probe", "probe_id", "confidence"];

/// Built-in template used when none is supplied.
pub const DEFAULT_TEMPLATE: &str = "\
# probe {probe_id}
# dependency under test: {source} -> {destination} ({property}, confidence {confidence})
target {source}
observe {destination}
{probe}
";

/// Mutation stanza per property; may itself use `{source}`/`{destination}`.
pub fn probe_stanza(p: PropertyKind) -> &'static str {
    match p {
        PropertyKind::Confidentiality => {
            "mutate capture-plaintext {destination}\nexpect absent-if-protected-by {source}"
        }
        PropertyKind::Integrity => "mutate flip-payload-bits {destination}\nexpect reject-if-protected-by {source}",
        PropertyKind::Authentication => "mutate forge-origin {source}\nexpect auth-failure-on {destination}",
        PropertyKind::Accounting => "mutate replay-stale-counter {destination}\nexpect counter-mismatch-on {source}",
        PropertyKind::Include => "mutate drop-field {destination}\nexpect decode-failure-on {source}",
        PropertyKind::Generate => "mutate perturb-input {source}\nexpect value-change-on {destination}",
    }
}

/// Whitespace-free probe identifier of an edge.
pub fn probe_id(key: &EdgeKey) -> String {
    format!("{}:{}:{}", key.property, key.source, key.destination)
}

/// A script template with `{name}` placeholders.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptTemplate {
    text: String,
}

fn placeholders(text: &str) -> Result<BTreeSet<&str>> {
    let mut out = BTreeSet::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| Error::Template("unterminated placeholder".into()))?;
        out.insert(&after[..close]);
        rest = &after[close + 1..];
    }
    Ok(out)
}

impl ScriptTemplate {
    pub fn new(text: &str) -> Result<Self> {
        let found = placeholders(text)?;
        for name in &found {
            if !KNOWN.contains(name) {
                return Err(Error::Template(format!("unknown placeholder {{{name}}}")));
            }
        }
        for name in REQUIRED {
            if !found.contains(name) {
                return Err(Error::Template(format!("missing placeholder {{{name}}}")));
            }
        }
        Ok(ScriptTemplate { text: text.to_owned() })
    }
}

impl Default for ScriptTemplate {
    fn default() -> Self {
        ScriptTemplate::new(DEFAULT_TEMPLATE).expect("built-in template is valid")
    }
}

pub fn emit_test_script(edge: &DependencyEdge, template: &ScriptTemplate) -> String {
    template
        .text
        .replace("{probe}", probe_stanza(edge.property))
        .replace("{probe_id}", &probe_id(&edge.key()))
        .replace("{confidence}", &edge.confidence.to_string())
        .replace("{property}", edge.property.name())
        .replace("{source}", &edge.source)
        .replace("{destination}", &edge.destination)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depgraph::EdgeProvenance;

    fn edge(p: PropertyKind) -> DependencyEdge {
        DependencyEdge::new("KRRCenc", "CipherAlgorithm", p, 0.5, EdgeProvenance::Model)
    }

    #[test]
    fn integrity_script() {
        let s = emit_test_script(&edge(PropertyKind::Integrity), &ScriptTemplate::default());
        assert!(s.contains("KRRCenc") && s.contains("CipherAlgorithm"));
        assert!(s.contains("flip-payload-bits CipherAlgorithm"));
        assert!(!s.contains('{'));
        assert_eq!(
            s,
            emit_test_script(&edge(PropertyKind::Integrity), &ScriptTemplate::default())
        );
    }

    #[test]
    fn six_distinct_stanzas() {
        let all: BTreeSet<&str> = PropertyKind::ALL.iter().map(|&p| probe_stanza(p)).collect();
        assert_eq!(all.len(), 6);
    }

    #[test]
    fn template_errors() {
        assert!(matches!(
            ScriptTemplate::new("{source} {property}"),
            Err(Error::Template(_))
        ));
        assert!(matches!(
            ScriptTemplate::new("{source} {destination} {property} {bogus}"),
            Err(Error::Template(_))
        ));
        assert!(matches!(ScriptTemplate::new("{source"), Err(Error::Template(_))));
    }
}

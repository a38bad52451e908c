use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::PropertyKind;
use crate::depgraph::EdgeKey;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Confirmed,
    Refuted,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Confirmed => "confirmed",
            Verdict::Refuted => "refuted",
        })
    }
}

impl FromStr for Verdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "confirmed" => Ok(Verdict::Confirmed),
            "refuted" => Ok(Verdict::Refuted),
            _ => Err(Error::Input(format!("unknown verdict {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub source: String,
    pub destination: String,
    pub property: PropertyKind,
    pub verdict: Verdict,
    pub evidence_ref: String,
    pub timestamp: String,
    pub detail: String,
}

impl EvidenceRecord {
    pub fn key(&self) -> EdgeKey {
        EdgeKey::new(&self.source, &self.destination, self.property)
    }

    /// Renders the record in the evidence log grammar.
    pub fn to_log_line(&self, probe_id: &str) -> String {
        let mut line = format!(
            "{} PROBE {} {} -> {} {} VERDICT {}",
            self.timestamp, probe_id, self.source, self.destination, self.property, self.verdict
        );
        if !self.detail.is_empty() {
            line.push(' ');
            line.push_str(&self.detail);
        }
        line
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedLog {
    pub records: Vec<EvidenceRecord>,
    /// Lines without a probe result.
    pub unmatched: usize,
}

/// Parses probe-result lines of the form
///
/// ```text
/// <timestamp> PROBE <probe-id> <source> -> <destination> <property> VERDICT <confirmed|refuted> [detail…]
/// ```
///
/// Lines not containing ` PROBE ` are counted and skipped. A line that
/// contains it but does not fit the grammar is a parse error.
pub fn parse_evidence_log(text: &str) -> Result<ParsedLog> {
    let mut out = ParsedLog::default();
    for (i, line) in text.lines().enumerate() {
        if !line.contains(" PROBE ") {
            out.unmatched += 1;
            continue;
        }
        let err = |msg: &str| Error::Parse {
            line: i + 1,
            msg: msg.to_owned(),
        };
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() < 9 || t[1] != "PROBE" || t[4] != "->" || t[7] != "VERDICT" {
            return Err(err(
                "expected '<ts> PROBE <id> <src> -> <dst> <property> VERDICT <verdict>'",
            ));
        }
        let property: PropertyKind = t[6].parse().map_err(|_| err(&format!("unknown property {:?}", t[6])))?;
        let verdict: Verdict = t[8].parse().map_err(|_| err(&format!("unknown verdict {:?}", t[8])))?;
        out.records.push(EvidenceRecord {
            source: t[3].to_owned(),
            destination: t[5].to_owned(),
            property,
            verdict,
            evidence_ref: format!("log:{}:{}", i + 1, t[2]),
            timestamp: t[0].to_owned(),
            detail: t[9..].join(" "),
        });
    }
    Ok(out)
}

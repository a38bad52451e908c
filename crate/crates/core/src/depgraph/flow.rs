use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const HEADER: &str = "# flowgraph v1";

/// One observed message between two entities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowMessage {
    pub sender: String,
    pub receiver: String,
    pub command: String,
    pub identifiers: Vec<String>,
}

impl FlowMessage {
    pub fn new(sender: &str, receiver: &str, command: &str, identifiers: &[&str]) -> Self {
        FlowMessage {
            sender: sender.to_owned(),
            receiver: receiver.to_owned(),
            command: command.to_owned(),
            identifiers: identifiers.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// The command name counts as occurring in its own message.
    pub fn mentions(&self, id: &str) -> bool {
        self.command == id || self.identifiers.iter().any(|x| x == id)
    }
}

/// Ordered message sequence observed on the test platform.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FlowGraph {
    pub messages: Vec<FlowMessage>,
}

impl FlowGraph {
    pub fn new(messages: Vec<FlowMessage>) -> Result<Self> {
        for (i, m) in messages.iter().enumerate() {
            let fields = [&m.sender, &m.receiver, &m.command];
            if fields.iter().any(|f| f.is_empty() || f.contains(['\t', '\n', ','])) {
                return Err(Error::Input(format!(
                    "message {} has an empty or malformed field",
                    i + 1
                )));
            }
            if m.identifiers
                .iter()
                .any(|x| x.is_empty() || x.contains(['\t', '\n', ',']))
            {
                return Err(Error::Input(format!("message {} has a malformed identifier", i + 1)));
            }
        }
        Ok(FlowGraph { messages })
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn entities(&self) -> BTreeSet<&str> {
        self.messages
            .iter()
            .flat_map(|m| [m.sender.as_str(), m.receiver.as_str()])
            .collect()
    }

    /// Indices of the messages mentioning `id`.
    pub fn occurrences(&self, id: &str) -> Vec<usize> {
        (0..self.messages.len())
            .filter(|&i| self.messages[i].mentions(id))
            .collect()
    }

    pub fn mentions(&self, id: &str) -> bool {
        self.messages.iter().any(|m| m.mentions(id))
    }

    /// `reach[i][j]`: `i == j`, or a chain `i = k0 < k1 < … < kn = j` links
    /// them where each message's receiver sends the next one.
    pub fn reachability(&self) -> Vec<Vec<bool>> {
        let n = self.messages.len();
        let mut reach = vec![vec![false; n]; n];
        for (i, row) in reach.iter_mut().enumerate() {
            row[i] = true;
            for j in i + 1..n {
                row[j] = (i..j).any(|k| row[k] && self.messages[k].receiver == self.messages[j].sender);
            }
        }
        reach
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER}\n");
        for m in &self.messages {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                m.sender,
                m.receiver,
                m.command,
                m.identifiers.join(",")
            ));
        }
        out
    }

    /// Tab-separated `sender receiver command id1,id2,…`; `#` lines and
    /// blank lines are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut messages = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            let (s, r, c, ids) = match f.as_slice() {
                [s, r, c] => (*s, *r, *c, ""),
                [s, r, c, ids] => (*s, *r, *c, *ids),
                _ => {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("expected 3 or 4 tab-separated fields, got {}", f.len()),
                    })
                }
            };
            if s.is_empty() || r.is_empty() || c.is_empty() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "sender, receiver and command must be nonempty".into(),
                });
            }
            let identifiers = ids
                .split(',')
                .map(str::trim)
                .filter(|x| !x.is_empty())
                .map(str::to_owned)
                .collect();
            messages.push(FlowMessage {
                sender: s.to_owned(),
                receiver: r.to_owned(),
                command: c.to_owned(),
                identifiers,
            });
        }
        Ok(FlowGraph { messages })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flow() -> FlowGraph {
        FlowGraph::new(vec![
            FlowMessage::new("UE", "gNB", "m1", &["a"]),
            FlowMessage::new("gNB", "AMF", "m2", &["b"]),
            FlowMessage::new("UE", "gNB", "m3", &["c"]),
            FlowMessage::new("AMF", "UE", "m4", &["d"]),
        ])
        .unwrap()
    }

    #[test]
    fn chain_reachability() {
        let r = flow().reachability();
        assert!(r[0][1]);
        assert!(r[0][3]);
        assert!(!r[0][2]);
        assert!(!r[1][0]);
        assert!(r[2][2]);
    }

    #[test]
    fn command_counts_as_occurrence() {
        assert_eq!(flow().occurrences("m2"), [1]);
        assert!(!flow().mentions("zz"));
    }

    #[test]
    fn text_round_trip() {
        let f = flow();
        assert_eq!(FlowGraph::from_text(&f.to_text()).unwrap(), f);
        assert!(matches!(
            FlowGraph::from_text("a\tb\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}

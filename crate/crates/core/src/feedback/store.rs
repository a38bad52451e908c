use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use crate::corpus::PropertyKind;
use crate::error::{Error, Result};
use crate::feedback::evidence::{EvidenceRecord, Verdict};

const HEADER: &str = "seq\tsource\tdestination\tproperty\tverdict\tevidence_ref\ttimestamp\tdetail";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreEntry {
    /// Logical time of insertion, strictly increasing.
    pub seq: u64,
    pub record: EvidenceRecord,
}

/// Append-only verdict log. Conflicting verdicts for one key sit side by
/// side, ordered by `seq`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthStore {
    entries: Vec<StoreEntry>,
    persisted: usize,
}

impl GroundTruthStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[StoreEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn append(&mut self, record: EvidenceRecord) -> u64 {
        let seq = self.entries.last().map_or(1, |e| e.seq + 1);
        self.entries.push(StoreEntry { seq, record });
        seq
    }

    fn line(e: &StoreEntry) -> String {
        let r = &e.record;
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            e.seq, r.source, r.destination, r.property, r.verdict, r.evidence_ref, r.timestamp, r.detail
        )
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER}\n");
        for e in &self.entries {
            out.push_str(&Self::line(e));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            None => return Ok(Self::new()),
            Some((_, h)) if h == HEADER => {}
            Some(_) => {
                return Err(Error::Parse {
                    line: 1,
                    msg: "missing ground-truth store header".into(),
                })
            }
        }
        let mut store = Self::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            let f: Vec<&str> = line.split('\t').collect();
            let [seq, src, dst, prop, verdict, eref, ts, detail] = f.as_slice() else {
                return Err(err(format!("expected 8 fields, got {}", f.len())));
            };
            let seq: u64 = seq.parse().map_err(|_| err(format!("bad sequence number {seq:?}")))?;
            if store.entries.last().is_some_and(|e| e.seq >= seq) {
                return Err(err("sequence numbers must increase".into()));
            }
            let property: PropertyKind = prop.parse().map_err(|e: Error| err(e.to_string()))?;
            let verdict: Verdict = verdict.parse().map_err(|e: Error| err(e.to_string()))?;
            store.entries.push(StoreEntry {
                seq,
                record: EvidenceRecord {
                    source: src.to_string(),
                    destination: dst.to_string(),
                    property,
                    verdict,
                    evidence_ref: eref.to_string(),
                    timestamp: ts.to_string(),
                    detail: detail.to_string(),
                },
            });
        }
        store.persisted = store.entries.len();
        Ok(store)
    }

    /// Loads `path`, or starts empty when it does not exist.
    pub fn open(path: &Path) -> Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(text) => Self::from_text(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(Error::io(path.display().to_string(), e)),
        }
    }

    /// Appends entries added since the last load or flush.
    pub fn flush(&mut self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path.display().to_string(), e);
        let fresh = !path.exists() || std::fs::metadata(path).map_err(io)?.len() == 0;
        let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        let mut buf = String::new();
        if fresh {
            buf.push_str(HEADER);
            buf.push('\n');
        }
        for e in &self.entries[self.persisted..] {
            buf.push_str(&Self::line(e));
        }
        f.write_all(buf.as_bytes()).map_err(io)?;
        self.persisted = self.entries.len();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(v: Verdict) -> EvidenceRecord {
        EvidenceRecord {
            source: "a".into(),
            destination: "b".into(),
            property: PropertyKind::Integrity,
            verdict: v,
            evidence_ref: "simulated:a:b:integrity".into(),
            timestamp: "t1".into(),
            detail: "payload mutated".into(),
        }
    }

    #[test]
    fn conflicting_verdicts_kept() {
        let mut s = GroundTruthStore::new();
        assert_eq!(s.append(rec(Verdict::Confirmed)), 1);
        assert_eq!(s.append(rec(Verdict::Refuted)), 2);
        assert_eq!(s.len(), 2);
        assert_eq!(
            GroundTruthStore::from_text(&s.to_text()).unwrap().entries(),
            s.entries()
        );
    }

    #[test]
    fn flush_only_grows() {
        let dir = std::env::temp_dir().join(format!("protodep-store-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("truth.tsv");
        let _ = std::fs::remove_file(&path);
        let mut s = GroundTruthStore::open(&path).unwrap();
        s.append(rec(Verdict::Confirmed));
        s.flush(&path).unwrap();
        let n1 = std::fs::metadata(&path).unwrap().len();
        let mut s2 = GroundTruthStore::open(&path).unwrap();
        s2.append(rec(Verdict::Refuted));
        s2.flush(&path).unwrap();
        s2.flush(&path).unwrap();
        let n2 = std::fs::metadata(&path).unwrap().len();
        assert!(n2 > n1);
        let back = GroundTruthStore::open(&path).unwrap();
        assert_eq!(back.entries().iter().map(|e| e.seq).collect::<Vec<_>>(), [1, 2]);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}

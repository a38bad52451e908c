use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_PROPERTIES: usize = 6;

/// The six directed dependency relations, in their fixed ordinal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertyKind {
    Confidentiality,
    Integrity,
    Authentication,
    Accounting,
    Include,
    Generate,
}

impl PropertyKind {
    pub const ALL: [PropertyKind; NUM_PROPERTIES] = [
        PropertyKind::Confidentiality,
        PropertyKind::Integrity,
        PropertyKind::Authentication,
        PropertyKind::Accounting,
        PropertyKind::Include,
        PropertyKind::Generate,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            PropertyKind::Confidentiality => "confidentiality",
            PropertyKind::Integrity => "integrity",
            PropertyKind::Authentication => "authentication",
            PropertyKind::Accounting => "accounting",
            PropertyKind::Include => "include",
            PropertyKind::Generate => "generate",
        }
    }

    /// Include and Generate describe data shape rather than a security goal.
    pub fn is_structural(self) -> bool {
        matches!(self, PropertyKind::Include | PropertyKind::Generate)
    }
}

impl fmt::Display for PropertyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PropertyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PropertyKind::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Input(format!("unknown property '{s}'")))
    }
}

/// One boolean per [`PropertyKind`], serialized as the list of true names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Labels(pub [bool; NUM_PROPERTIES]);

impl Labels {
    pub fn none() -> Self {
        Labels::default()
    }

    pub fn from_kinds(kinds: &[PropertyKind]) -> Self {
        let mut l = Labels::none();
        for k in kinds {
            l.0[k.ordinal()] = true;
        }
        l
    }

    pub fn get(&self, k: PropertyKind) -> bool {
        self.0[k.ordinal()]
    }

    pub fn set(&mut self, k: PropertyKind, v: bool) {
        self.0[k.ordinal()] = v;
    }

    pub fn any(&self) -> bool {
        self.0.iter().any(|&b| b)
    }

    pub fn kinds(&self) -> Vec<PropertyKind> {
        PropertyKind::ALL.into_iter().filter(|k| self.get(*k)).collect()
    }

    pub fn as_f64(&self) -> [f64; NUM_PROPERTIES] {
        self.0.map(|b| if b { 1.0 } else { 0.0 })
    }
}

impl Serialize for Labels {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.kinds().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Labels {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let kinds = Vec::<PropertyKind>::deserialize(d)?;
        Ok(Labels::from_kinds(&kinds))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleProvenance {
    Expert,
    GeneratedNegative,
    Evidence,
}

/// One labeled (context, source, destination) record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedSample {
    pub doc_id: String,
    pub section_id: String,
    pub context: String,
    pub source: String,
    pub destination: String,
    pub labels: Labels,
    pub provenance: SampleProvenance,
}

impl AnnotatedSample {
    pub fn key(&self) -> (&str, &str, &str) {
        (&self.doc_id, &self.source, &self.destination)
    }

    pub fn section_key(&self) -> (&str, &str) {
        (&self.doc_id, &self.section_id)
    }

    pub fn validate(&self) -> Result<()> {
        if self.source == self.destination {
            return Err(Error::Input(format!(
                "source and destination are both '{}'",
                self.source
            )));
        }
        if self.source.trim().is_empty() || self.destination.trim().is_empty() {
            return Err(Error::Input("empty identifier".into()));
        }
        match self.provenance {
            SampleProvenance::GeneratedNegative if self.labels.any() => Err(Error::Input(format!(
                "generated negative {} -> {} carries labels",
                self.source, self.destination
            ))),
            SampleProvenance::Expert if !self.labels.any() => Err(Error::Input(format!(
                "expert record {} -> {} has no labels",
                self.source, self.destination
            ))),
            _ => Ok(()),
        }
    }
}

pub const ANNOTATION_SCHEMA: &str = "protodep.annotations";
pub const ANNOTATION_VERSION: u32 = 1;

// On-disk records. A `section` record supplies the context for following
// samples of the same (doc, section) that omit it.
#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Record {
    Header {
        schema: String,
        version: u32,
    },
    Section {
        doc_id: String,
        section_id: String,
        context: String,
    },
    Sample {
        doc_id: String,
        section_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        context: Option<String>,
        source: String,
        destination: String,
        labels: Labels,
        provenance: SampleProvenance,
    },
}

/// Parses the line-delimited annotation format. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_annotations(text: &str) -> Result<Vec<AnnotatedSample>> {
    let mut contexts: BTreeMap<(String, String), String> = BTreeMap::new();
    let mut out = Vec::new();
    let mut lines_of: BTreeMap<(String, String, String), Vec<usize>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let record: Record = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        match record {
            Record::Header { schema, version } => {
                if schema != ANNOTATION_SCHEMA || version != ANNOTATION_VERSION {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("unsupported schema {schema} v{version}"),
                    });
                }
            }
            Record::Section {
                doc_id,
                section_id,
                context,
            } => {
                contexts.insert((doc_id, section_id), context);
            }
            Record::Sample {
                doc_id,
                section_id,
                context,
                source,
                destination,
                labels,
                provenance,
            } => {
                let context = match context {
                    Some(c) => c,
                    None => contexts
                        .get(&(doc_id.clone(), section_id.clone()))
                        .cloned()
                        .ok_or_else(|| Error::Parse {
                            line: lineno,
                            msg: format!("no context for section {doc_id}/{section_id}"),
                        })?,
                };
                let sample = AnnotatedSample {
                    doc_id,
                    section_id,
                    context,
                    source,
                    destination,
                    labels,
                    provenance,
                };
                sample.validate().map_err(|e| Error::Parse {
                    line: lineno,
                    msg: e.to_string(),
                })?;
                lines_of
                    .entry((sample.doc_id.clone(), sample.source.clone(), sample.destination.clone()))
                    .or_default()
                    .push(lineno);
                out.push(sample);
            }
        }
    }
    let dups: Vec<String> = lines_of
        .into_iter()
        .filter(|(_, l)| l.len() > 1)
        .map(|((doc, s, d), l)| {
            let lines: Vec<String> = l.iter().map(|n| n.to_string()).collect();
            format!("{doc}:{s}->{d} (lines {})", lines.join(","))
        })
        .collect();
    if !dups.is_empty() {
        return Err(Error::Duplicate(dups));
    }
    Ok(out)
}

pub fn load_annotations(path: &Path) -> Result<Vec<AnnotatedSample>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_annotations(&text)
}

/// Serializes samples; the first context seen for each section becomes its
/// section record and samples repeat their context only when it differs.
pub fn format_annotations(samples: &[AnnotatedSample]) -> String {
    let mut out = String::new();
    let header = Record::Header {
        schema: ANNOTATION_SCHEMA.into(),
        version: ANNOTATION_VERSION,
    };
    push_record(&mut out, &header);
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    let mut contexts: BTreeMap<(String, String), String> = BTreeMap::new();
    for s in samples {
        let key = (s.doc_id.clone(), s.section_id.clone());
        if seen.insert(key.clone()) {
            contexts.insert(key, s.context.clone());
            push_record(
                &mut out,
                &Record::Section {
                    doc_id: s.doc_id.clone(),
                    section_id: s.section_id.clone(),
                    context: s.context.clone(),
                },
            );
        }
    }
    for s in samples {
        let section_ctx = &contexts[&(s.doc_id.clone(), s.section_id.clone())];
        push_record(
            &mut out,
            &Record::Sample {
                doc_id: s.doc_id.clone(),
                section_id: s.section_id.clone(),
                context: (section_ctx != &s.context).then(|| s.context.clone()),
                source: s.source.clone(),
                destination: s.destination.clone(),
                labels: s.labels,
                provenance: s.provenance,
            },
        );
    }
    out
}

fn push_record(out: &mut String, r: &Record) {
    out.push_str(&serde_json::to_string(r).expect("records serialize"));
    out.push('\n');
}

pub fn save_annotations(path: &Path, samples: &[AnnotatedSample]) -> Result<()> {
    std::fs::write(path, format_annotations(samples)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(src: &str, dst: &str, kinds: &[PropertyKind]) -> AnnotatedSample {
        AnnotatedSample {
            doc_id: "38.331".into(),
            section_id: "5.3.3".into(),
            context: "The UE shall set the contents of RRCSetupRequest message".into(),
            source: src.into(),
            destination: dst.into(),
            labels: Labels::from_kinds(kinds),
            provenance: if kinds.is_empty() {
                SampleProvenance::GeneratedNegative
            } else {
                SampleProvenance::Expert
            },
        }
    }

    #[test]
    fn property_ordinals_are_fixed() {
        let names: Vec<&str> = PropertyKind::ALL.iter().map(|p| p.name()).collect();
        assert_eq!(
            names,
            [
                "confidentiality",
                "integrity",
                "authentication",
                "accounting",
                "include",
                "generate"
            ]
        );
        for (i, p) in PropertyKind::ALL.iter().enumerate() {
            assert_eq!(p.ordinal(), i);
            assert_eq!(PropertyKind::from_ordinal(i), Some(*p));
            assert_eq!(p.name().parse::<PropertyKind>().unwrap(), *p);
        }
    }

    #[test]
    fn empty_file_is_empty_list() {
        assert!(parse_annotations("").unwrap().is_empty());
    }

    #[test]
    fn self_pair_is_validation_error() {
        let text = r#"{"type":"sample","doc_id":"d","section_id":"s","context":"x","source":"a","destination":"a","labels":["include"],"provenance":"expert"}"#;
        let err = parse_annotations(text).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn include_record_parses() {
        let text = concat!(
            r#"{"type":"header","schema":"protodep.annotations","version":1}"#,
            "\n",
            r#"{"type":"section","doc_id":"38.331","section_id":"5.3.3","context":"establishmentCause is set in RRCSetupRequest"}"#,
            "\n",
            r#"{"type":"sample","doc_id":"38.331","section_id":"5.3.3","source":"RRCSetupRequest","destination":"establishmentCause","labels":["include"],"provenance":"expert"}"#,
        );
        let s = parse_annotations(text).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].labels.0, [false, false, false, false, true, false]);
        assert!(s[0].context.contains("establishmentCause"));
    }

    #[test]
    fn duplicates_listed() {
        let a = sample("a", "b", &[PropertyKind::Include]);
        let text = format_annotations(&[a.clone(), a]);
        match parse_annotations(&text).unwrap_err() {
            Error::Duplicate(d) => assert_eq!(d.len(), 1),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "\n{\"type\":\"sample\",\n";
        assert!(matches!(parse_annotations(text), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn roundtrip_with_mixed_contexts() {
        let a = sample("a", "b", &[PropertyKind::Include, PropertyKind::Integrity]);
        let mut b = sample("b", "a", &[]);
        b.context = "different text".into();
        let samples = vec![a, b];
        let text = format_annotations(&samples);
        assert_eq!(parse_annotations(&text).unwrap(), samples);
    }

    #[test]
    fn provenance_label_invariant() {
        let mut s = sample("a", "b", &[]);
        s.provenance = SampleProvenance::Expert;
        assert!(s.validate().is_err());
        let mut s = sample("a", "b", &[PropertyKind::Generate]);
        s.provenance = SampleProvenance::GeneratedNegative;
        assert!(s.validate().is_err());
        let mut s = sample("a", "b", &[]);
        s.provenance = SampleProvenance::Evidence;
        assert!(s.validate().is_ok());
    }
}

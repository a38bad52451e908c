use std::collections::BTreeSet;

use crate::corpus::sample::{AnnotatedSample, Labels, SampleProvenance};

/// The identifiers of one document section together with its text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionIdentifiers {
    pub doc_id: String,
    pub section_id: String,
    pub context: String,
    pub identifiers: Vec<String>,
}

/// Collects, per section in order of first appearance, the identifiers used
/// by the samples (source before destination, first occurrence wins).
pub fn section_identifiers(samples: &[AnnotatedSample]) -> Vec<SectionIdentifiers> {
    let mut out: Vec<SectionIdentifiers> = Vec::new();
    for s in samples {
        let idx = match out
            .iter()
            .position(|x| x.doc_id == s.doc_id && x.section_id == s.section_id)
        {
            Some(i) => i,
            None => {
                out.push(SectionIdentifiers {
                    doc_id: s.doc_id.clone(),
                    section_id: s.section_id.clone(),
                    context: s.context.clone(),
                    identifiers: Vec::new(),
                });
                out.len() - 1
            }
        };
        for id in [&s.source, &s.destination] {
            if !out[idx].identifiers.contains(id) {
                out[idx].identifiers.push(id.clone());
            }
        }
    }
    out
}

/// Completes a labeled set with all-false records for every ordered pair of
/// a section's identifiers not already covered. Output is the input samples
/// in their order followed by the new negatives, section by section in
/// (source index, destination index) order.
pub fn generate_pairs(sections: &[SectionIdentifiers], positives: &[AnnotatedSample]) -> Vec<AnnotatedSample> {
    let covered: BTreeSet<(&str, &str, &str, &str)> = positives
        .iter()
        .map(|s| {
            (
                s.doc_id.as_str(),
                s.section_id.as_str(),
                s.source.as_str(),
                s.destination.as_str(),
            )
        })
        .collect();
    let mut out = positives.to_vec();
    for sec in sections {
        let mut ids: Vec<&String> = Vec::new();
        for id in &sec.identifiers {
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
        for (i, src) in ids.iter().enumerate() {
            for (j, dst) in ids.iter().enumerate() {
                if i == j {
                    continue;
                }
                let key = (sec.doc_id.as_str(), sec.section_id.as_str(), src.as_str(), dst.as_str());
                if covered.contains(&key) {
                    continue;
                }
                out.push(AnnotatedSample {
                    doc_id: sec.doc_id.clone(),
                    section_id: sec.section_id.clone(),
                    context: sec.context.clone(),
                    source: (*src).clone(),
                    destination: (*dst).clone(),
                    labels: Labels::none(),
                    provenance: SampleProvenance::GeneratedNegative,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::sample::PropertyKind;

    fn section(ids: &[&str]) -> SectionIdentifiers {
        SectionIdentifiers {
            doc_id: "d".into(),
            section_id: "1".into(),
            context: "ctx".into(),
            identifiers: ids.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn positive(src: &str, dst: &str) -> AnnotatedSample {
        AnnotatedSample {
            doc_id: "d".into(),
            section_id: "1".into(),
            context: "ctx".into(),
            source: src.into(),
            destination: dst.into(),
            labels: Labels::from_kinds(&[PropertyKind::Include]),
            provenance: SampleProvenance::Expert,
        }
    }

    #[test]
    fn four_identifiers_two_positives() {
        let pos = vec![positive("a", "b"), positive("c", "a")];
        let out = generate_pairs(&[section(&["a", "b", "c", "d"])], &pos);
        assert_eq!(out.len(), 12);
        let negatives = out
            .iter()
            .filter(|s| s.provenance == SampleProvenance::GeneratedNegative)
            .count();
        assert_eq!(negatives, 10);
        assert!(out.iter().all(|s| s.validate().is_ok()));
    }

    #[test]
    fn single_identifier_has_no_pairs() {
        assert!(generate_pairs(&[section(&["a"])], &[]).is_empty());
    }

    #[test]
    fn regeneration_idempotent() {
        let secs = [section(&["a", "b", "c"])];
        let once = generate_pairs(&secs, &[positive("b", "c")]);
        let twice = generate_pairs(&secs, &once);
        assert_eq!(once, twice);
    }

    #[test]
    fn duplicate_identifiers_are_ignored() {
        let out = generate_pairs(&[section(&["a", "b", "a"])], &[]);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn section_identifier_collection() {
        let mut other = positive("x", "y");
        other.section_id = "2".into();
        let secs = section_identifiers(&[positive("a", "b"), other, positive("b", "c")]);
        assert_eq!(secs.len(), 2);
        assert_eq!(secs[0].identifiers, ["a", "b", "c"]);
        assert_eq!(secs[1].identifiers, ["x", "y"]);
    }
}

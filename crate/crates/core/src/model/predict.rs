use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attention::Mode;
use crate::corpus::NUM_PROPERTIES;
use crate::error::{Error, Result};
use crate::model::config::{CalConfig, Thresholds};
use crate::model::forward::{cal_forward_on, encode_context_on, encode_query_on, query_ids};
use crate::model::params::ModelParams;
use crate::model::segment::{segment_document, Segment};
use crate::model::vocab::{split_tokens, tokenize, Vocab};
use crate::numkit::{Matrix, Tape};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConfidenceClass {
    Accepted,
    LowConfidence,
    Rejected,
}

impl ConfidenceClass {
    /// `p < low` rejected, `low ≤ p < high` low confidence, `p ≥ high` accepted.
    pub fn classify(p: f64, t: &Thresholds) -> Self {
        if p >= t.high {
            ConfidenceClass::Accepted
        } else if p >= t.low {
            ConfidenceClass::LowConfidence
        } else {
            ConfidenceClass::Rejected
        }
    }
}

/// Per-pair property probabilities and their confidence routing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    #[serde(default)]
    pub doc_id: String,
    #[serde(default)]
    pub section_id: String,
    pub source: String,
    pub destination: String,
    /// Ordered as [`crate::corpus::PropertyKind::ALL`].
    pub probs: [f64; NUM_PROPERTIES],
    /// Segment holding the highest property probability.
    pub segment_id: usize,
    pub classes: [ConfidenceClass; NUM_PROPERTIES],
}

impl Prediction {
    pub fn new(
        source: &str,
        destination: &str,
        probs: [f64; NUM_PROPERTIES],
        segment_id: usize,
        thresholds: &Thresholds,
    ) -> Self {
        Prediction {
            doc_id: String::new(),
            section_id: String::new(),
            source: source.to_owned(),
            destination: destination.to_owned(),
            probs,
            segment_id,
            classes: probs.map(|p| ConfidenceClass::classify(p, thresholds)),
        }
    }

    pub fn with_section(mut self, doc_id: &str, section_id: &str) -> Self {
        self.doc_id = doc_id.to_owned();
        self.section_id = section_id.to_owned();
        self
    }
}

/// Result of merging per-segment probability vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedProbs {
    pub probs: Vec<f64>,
    /// Per property, the first segment attaining the maximum.
    pub argmax: Vec<usize>,
    /// First segment attaining the overall maximum.
    pub segment_id: usize,
}

/// Per-property maximum over segments; ties resolve to the lowest index.
pub fn merge_segment_probs(per_segment: &[Vec<f64>]) -> MergedProbs {
    let width = per_segment.first().map_or(0, Vec::len);
    let mut probs = vec![f64::NEG_INFINITY; width];
    let mut argmax = vec![0; width];
    let mut best = (0, f64::NEG_INFINITY);
    for (s, row) in per_segment.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if p > probs[j] {
                probs[j] = p;
                argmax[j] = s;
            }
            if p > best.1 {
                best = (s, p);
            }
        }
    }
    MergedProbs {
        probs,
        argmax,
        segment_id: best.0,
    }
}

/// Trained or initialized classifier together with its vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct CalModel<T> {
    pub config: CalConfig,
    pub vocab: Vocab,
    pub params: ModelParams<Matrix<T>>,
}

/// A tokenized document and its segmentation.
pub struct SegmentedDoc {
    pub ids: Vec<usize>,
    pub tokens: Vec<String>,
    pub segments: Vec<Segment>,
}

impl<T: Scalar> CalModel<T> {
    pub fn new(config: CalConfig, vocab: Vocab, seed: u64) -> Result<Self> {
        let params = ModelParams::init(&config, vocab.len(), seed)?;
        Ok(CalModel { config, vocab, params })
    }

    pub fn segment(&self, doc: &str) -> Result<SegmentedDoc> {
        let tokens: Vec<String> = split_tokens(doc).into_iter().map(str::to_owned).collect();
        if tokens.is_empty() {
            return Err(Error::Input("empty document".into()));
        }
        let ids = tokenize(doc, &self.vocab, usize::MAX);
        let segments = segment_document(ids.len(), self.config.max_seq_len, self.config.segment_overlap)?;
        Ok(SegmentedDoc { ids, tokens, segments })
    }

    /// Context encodings of every segment, in segment order.
    pub fn encode_segments(&self, doc: &SegmentedDoc) -> Result<Vec<Matrix<T>>> {
        doc.segments
            .par_iter()
            .map(|seg| {
                let mut tape = Tape::new();
                let p = self.params.register(&mut tape);
                let out = encode_context_on(&mut tape, seg.slice(&doc.ids), &p, &self.config, &mut Mode::Eval)?;
                Ok(tape.value(out).clone())
            })
            .collect()
    }

    /// Probabilities for one pair against one encoded segment.
    pub fn pair_probs(&self, ctx: &Matrix<T>, source: &str, destination: &str) -> Result<Vec<f64>> {
        let ids = query_ids(source, destination, &self.vocab, &self.config);
        let mut tape = Tape::new();
        let p = self.params.register(&mut tape);
        let c = tape.constant(ctx.clone());
        let q = encode_query_on(&mut tape, &ids, &p, &self.config)?;
        let out = cal_forward_on(&mut tape, c, q, &p, &mut Mode::Eval)?;
        Ok(tape.value(out.probs).data().iter().map(|v| v.as_f64()).collect())
    }

    fn merged_prediction(
        &self,
        contexts: &[Matrix<T>],
        source: &str,
        destination: &str,
        thresholds: &Thresholds,
    ) -> Result<Prediction> {
        let per_segment = contexts
            .iter()
            .map(|c| self.pair_probs(c, source, destination))
            .collect::<Result<Vec<_>>>()?;
        let merged = merge_segment_probs(&per_segment);
        let mut probs = [0.0; NUM_PROPERTIES];
        probs.copy_from_slice(&merged.probs);
        Ok(Prediction::new(
            source,
            destination,
            probs,
            merged.segment_id,
            thresholds,
        ))
    }

    /// Segments `doc`, scores every segment, and merges by per-property max.
    pub fn predict_pair(
        &self,
        doc: &str,
        source: &str,
        destination: &str,
        thresholds: &Thresholds,
    ) -> Result<Prediction> {
        thresholds.validate()?;
        let seg = self.segment(doc)?;
        let contexts = self.encode_segments(&seg)?;
        self.merged_prediction(&contexts, source, destination, thresholds)
    }

    /// One prediction per ordered pair of distinct identifiers, ordered by
    /// (source index, destination index).
    pub fn predict_all_pairs(
        &self,
        doc: &str,
        identifiers: &[String],
        thresholds: &Thresholds,
    ) -> Result<Vec<Prediction>> {
        thresholds.validate()?;
        if identifiers.len() < 2 {
            return Err(Error::Input(format!(
                "need at least 2 identifiers, got {}",
                identifiers.len()
            )));
        }
        let seg = self.segment(doc)?;
        let contexts = self.encode_segments(&seg)?;
        let pairs: Vec<(&String, &String)> = identifiers
            .iter()
            .enumerate()
            .flat_map(|(i, s)| {
                identifiers
                    .iter()
                    .enumerate()
                    .filter(move |(j, _)| *j != i)
                    .map(move |(_, d)| (s, d))
            })
            .collect();
        pairs
            .par_iter()
            .map(|(s, d)| self.merged_prediction(&contexts, s, d, thresholds))
            .collect()
    }

    /// Averaged cross-attention map of a pair against the segment that
    /// produced its top probability.
    pub fn attention_map(&self, doc: &str, source: &str, destination: &str) -> Result<AttentionMap> {
        let seg = self.segment(doc)?;
        let contexts = self.encode_segments(&seg)?;
        let pred = self.merged_prediction(&contexts, source, destination, &Thresholds::default())?;
        let segment = seg.segments[pred.segment_id];
        let q_ids = query_ids(source, destination, &self.vocab, &self.config);
        let scores = export_attention_map(segment.slice(&seg.ids), &q_ids, &self.params, &self.config)?;
        let half = (self.config.max_seq_len - 1) / 2;
        let mut query_tokens: Vec<String> = split_tokens(source).into_iter().take(half).map(str::to_owned).collect();
        query_tokens.push("<sep>".into());
        query_tokens.extend(split_tokens(destination).into_iter().take(half).map(str::to_owned));
        Ok(AttentionMap {
            query_tokens,
            context_tokens: segment.slice(&seg.tokens).to_vec(),
            scores: Matrix::from_vec(
                scores.rows(),
                scores.cols(),
                scores.data().iter().map(|v| v.as_f64()).collect(),
            )?,
        })
    }
}

/// Mean over cross layers and heads of the `m × n` attention scores.
pub fn export_attention_map<T: Scalar>(
    ctx_ids: &[usize],
    qry_ids: &[usize],
    params: &ModelParams<Matrix<T>>,
    cfg: &CalConfig,
) -> Result<Matrix<T>> {
    let mut tape = Tape::new();
    let p = params.register(&mut tape);
    let ctx = encode_context_on(&mut tape, ctx_ids, &p, cfg, &mut Mode::Eval)?;
    let qry = encode_query_on(&mut tape, qry_ids, &p, cfg)?;
    let out = cal_forward_on(&mut tape, ctx, qry, &p, &mut Mode::Eval)?;
    let mut acc = Matrix::zeros(qry_ids.len(), ctx_ids.len());
    let mut count = 0usize;
    for layer in &out.cross_scores {
        for &s in layer {
            acc.add_assign(tape.value(s));
            count += 1;
        }
    }
    Ok(acc.scale(T::one() / T::from_usize(count.max(1)).unwrap()))
}

/// Query-by-context attention grid with token labels.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    pub query_tokens: Vec<String>,
    pub context_tokens: Vec<String>,
    pub scores: Matrix<f64>,
}

impl AttentionMap {
    /// Tab-separated grid: a header row of context tokens, then one row per
    /// query token starting with that token.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("query\\context");
        for t in &self.context_tokens {
            s.push('\t');
            s.push_str(t);
        }
        s.push('\n');
        for (i, q) in self.query_tokens.iter().enumerate() {
            s.push_str(q);
            for v in self.scores.row(i) {
                s.push_str(&format!("\t{v:.6}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn format_predictions(preds: &[Prediction]) -> String {
    let mut out = String::new();
    for p in preds {
        out.push_str(&serde_json::to_string(p).expect("prediction serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_predictions(text: &str) -> Result<Vec<Prediction>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_bands() {
        let t = Thresholds::new(0.3, 0.9).unwrap();
        assert_eq!(ConfidenceClass::classify(0.95, &t), ConfidenceClass::Accepted);
        assert_eq!(ConfidenceClass::classify(0.9, &t), ConfidenceClass::Accepted);
        assert_eq!(ConfidenceClass::classify(0.3, &t), ConfidenceClass::LowConfidence);
        assert_eq!(ConfidenceClass::classify(0.29, &t), ConfidenceClass::Rejected);
    }

    #[test]
    fn max_merge_rule() {
        let m = merge_segment_probs(&[vec![0.2], vec![0.7], vec![0.4]]);
        assert_eq!(m.probs, [0.7]);
        assert_eq!(m.segment_id, 1);
    }

    #[test]
    fn single_segment_merge_is_identity() {
        let row = vec![0.1, 0.5, 0.9, 0.3, 0.2, 0.0];
        let m = merge_segment_probs(std::slice::from_ref(&row));
        assert_eq!(m.probs, row);
        assert_eq!(m.segment_id, 0);
    }

    #[test]
    fn merge_ties_go_to_lowest_index() {
        let m = merge_segment_probs(&[vec![0.5, 0.1], vec![0.5, 0.2]]);
        assert_eq!(m.argmax, [0, 1]);
        assert_eq!(m.segment_id, 0);
    }

    #[test]
    fn predictions_file_roundtrip() {
        let t = Thresholds::default();
        let preds = vec![
            Prediction::new("a", "b", [0.1, 0.2, 0.3, 0.4, 0.5, 0.987654321], 0, &t).with_section("d", "5.3.3"),
            Prediction::new("b", "a", [0.0; 6], 2, &t),
        ];
        assert_eq!(parse_predictions(&format_predictions(&preds)).unwrap(), preds);
    }
}

//! The cross/self-attention classifier: vocabulary, segmentation, forward
//! pass, prediction with confidence routing, attention maps, checkpoints.

mod checkpoint;
mod config;
mod forward;
mod params;
mod predict;
mod segment;
mod vocab;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use config::{CalConfig, Thresholds};
pub use forward::{
    cal_forward, cal_forward_on, encode_context, encode_context_on, encode_query, encode_query_on, query_ids, CalOutput,
};
pub use params::{ModelParams, WeightSource};
pub use predict::{
    export_attention_map, format_predictions, merge_segment_probs, parse_predictions, AttentionMap, CalModel,
    ConfidenceClass, MergedProbs, Prediction, SegmentedDoc,
};
pub use segment::{anchor_segment, segment_document, Segment};
pub use vocab::{build_vocab, split_tokens, tokenize, Vocab, PAD, SEP, UNK};

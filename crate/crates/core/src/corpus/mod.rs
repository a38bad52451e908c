//! Annotated identifier pairs: schema, file format, pair generation,
//! imbalance statistics, and the train/validation split.

mod pairs;
mod sample;
mod split;
mod stats;

pub use pairs::{generate_pairs, section_identifiers, SectionIdentifiers};
pub use sample::{
    format_annotations, load_annotations, parse_annotations, save_annotations, AnnotatedSample, Labels, PropertyKind,
    SampleProvenance, ANNOTATION_SCHEMA, ANNOTATION_VERSION, NUM_PROPERTIES,
};
pub use split::split;
pub use stats::{class_stats, intersection_counts};

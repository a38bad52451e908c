//! Attention-based extraction of formal dependency properties between
//! protocol identifiers, plus the dependency-graph, evidence-feedback, and
//! formal-model tooling around it.
//!
//! The numeric stack is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which the pipeline and CLI use.

pub mod attention;
pub mod corpus;
pub mod depgraph;
pub mod error;
pub mod feedback;
pub mod formalgen;
pub mod model;
pub mod numkit;
pub mod scalar;
pub mod training;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

pub type Matrix = numkit::Matrix<f64>;
pub type Matrix32 = numkit::Matrix<f32>;
pub type Tape = numkit::Tape<f64>;

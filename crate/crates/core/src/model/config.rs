use serde::{Deserialize, Serialize};

use crate::corpus::NUM_PROPERTIES;
use crate::error::{Error, Result};

/// Shape of the classifier stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalConfig {
    pub embed_dim: usize,
    pub context_layers: usize,
    pub context_heads: usize,
    pub cross_layers: usize,
    pub cross_heads: usize,
    pub self_layers: usize,
    pub self_heads: usize,
    pub max_seq_len: usize,
    pub dropout: f64,
    pub ffn_width: usize,
    pub num_properties: usize,
    /// Tokens shared by consecutive context segments.
    pub segment_overlap: usize,
    /// Mask future positions in the context encoder.
    pub causal_context: bool,
}

impl Default for CalConfig {
    fn default() -> Self {
        CalConfig {
            embed_dim: 64,
            context_layers: 2,
            context_heads: 4,
            cross_layers: 2,
            cross_heads: 4,
            self_layers: 2,
            self_heads: 4,
            max_seq_len: 128,
            dropout: 0.1,
            ffn_width: 256,
            num_properties: NUM_PROPERTIES,
            segment_overlap: 16,
            causal_context: false,
        }
    }
}

impl CalConfig {
    /// GPT-2-small-sized backbone with 6-layer, 6-head cross and self stacks.
    pub fn full_size() -> Self {
        CalConfig {
            embed_dim: 768,
            context_layers: 12,
            context_heads: 12,
            cross_layers: 6,
            cross_heads: 6,
            self_layers: 6,
            self_heads: 6,
            max_seq_len: 1024,
            dropout: 0.1,
            ffn_width: 3072,
            num_properties: NUM_PROPERTIES,
            segment_overlap: 128,
            causal_context: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("embed_dim", self.embed_dim),
            ("context_layers", self.context_layers),
            ("context_heads", self.context_heads),
            ("cross_layers", self.cross_layers),
            ("cross_heads", self.cross_heads),
            ("self_layers", self.self_layers),
            ("self_heads", self.self_heads),
            ("ffn_width", self.ffn_width),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        for (name, h) in [
            ("context_heads", self.context_heads),
            ("cross_heads", self.cross_heads),
            ("self_heads", self.self_heads),
        ] {
            if !self.embed_dim.is_multiple_of(h) {
                return Err(Error::Config(format!(
                    "{name} = {h} does not divide embed_dim {}",
                    self.embed_dim
                )));
            }
        }
        if self.max_seq_len < 8 {
            return Err(Error::Config("max_seq_len must be at least 8".into()));
        }
        if self.segment_overlap >= self.max_seq_len {
            return Err(Error::Config("segment_overlap must be below max_seq_len".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        if self.num_properties != NUM_PROPERTIES {
            return Err(Error::Config(format!("num_properties must be {NUM_PROPERTIES}")));
        }
        Ok(())
    }
}

/// Confidence band edges: below `low` is rejected, at or above `high` accepted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub low: f64,
    pub high: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { low: 0.3, high: 0.7 }
    }
}

impl Thresholds {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        let t = Thresholds { low, high };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.low) || !(0.0..=1.0).contains(&self.high) || self.low >= self.high {
            return Err(Error::Config(format!(
                "thresholds must satisfy 0 <= low < high <= 1, got ({}, {})",
                self.low, self.high
            )));
        }
        Ok(())
    }
}

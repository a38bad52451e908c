use rand::{Rng as _, SeedableRng};

use crate::attention::{BlockParams, LayerNormParams, Rng};
use crate::error::Result;
use crate::model::config::CalConfig;
use crate::numkit::{init_with, InitScheme, Matrix, Tape, Var};
use crate::scalar::Scalar;

/// All learnable weights of the classifier, generic over the leaf type so
/// the same structure holds values, tape handles, gradients, or optimizer
/// moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<L> {
    pub token_embedding: L,
    pub position_embedding: L,
    pub context_blocks: Vec<BlockParams<L>>,
    pub context_norm: LayerNormParams<L>,
    pub cross_blocks: Vec<BlockParams<L>>,
    pub self_blocks: Vec<BlockParams<L>>,
    pub output_norm: LayerNormParams<L>,
    pub classifier_w: L,
    pub classifier_b: L,
}

impl<L> ModelParams<L> {
    pub fn map<M, F: FnMut(&L) -> M>(&self, f: &mut F) -> ModelParams<M> {
        ModelParams {
            token_embedding: f(&self.token_embedding),
            position_embedding: f(&self.position_embedding),
            context_blocks: self.context_blocks.iter().map(|b| b.map(f)).collect(),
            context_norm: self.context_norm.map(f),
            cross_blocks: self.cross_blocks.iter().map(|b| b.map(f)).collect(),
            self_blocks: self.self_blocks.iter().map(|b| b.map(f)).collect(),
            output_norm: self.output_norm.map(f),
            classifier_w: f(&self.classifier_w),
            classifier_b: f(&self.classifier_b),
        }
    }

    /// Leaves in a fixed canonical order (the checkpoint order).
    pub fn leaves(&self) -> Vec<&L> {
        let mut out = vec![&self.token_embedding, &self.position_embedding];
        for b in &self.context_blocks {
            b.visit(&mut out);
        }
        self.context_norm.visit(&mut out);
        for b in &self.cross_blocks {
            b.visit(&mut out);
        }
        for b in &self.self_blocks {
            b.visit(&mut out);
        }
        self.output_norm.visit(&mut out);
        out.push(&self.classifier_w);
        out.push(&self.classifier_b);
        out
    }

    pub fn leaves_mut(&mut self) -> Vec<&mut L> {
        let mut out = vec![&mut self.token_embedding, &mut self.position_embedding];
        for b in &mut self.context_blocks {
            b.visit_mut(&mut out);
        }
        self.context_norm.visit_mut(&mut out);
        for b in &mut self.cross_blocks {
            b.visit_mut(&mut out);
        }
        for b in &mut self.self_blocks {
            b.visit_mut(&mut out);
        }
        self.output_norm.visit_mut(&mut out);
        out.push(&mut self.classifier_w);
        out.push(&mut self.classifier_b);
        out
    }
}

fn uniform<T: Scalar>(rows: usize, cols: usize, bound: f64, rng: &mut Rng) -> Matrix<T> {
    let data = (0..rows * cols)
        .map(|_| T::from_f64_lossy(rng.gen_range(-bound..=bound)))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("length matches shape")
}

impl<T: Scalar> ModelParams<Matrix<T>> {
    pub fn init(config: &CalConfig, vocab_size: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::seed_from_u64(seed);
        let d = config.embed_dim;
        let blocks = |n: usize, heads: usize, rng: &mut Rng| -> Result<Vec<BlockParams<Matrix<T>>>> {
            (0..n)
                .map(|_| BlockParams::init(d, heads, config.ffn_width, rng))
                .collect()
        };
        Ok(ModelParams {
            token_embedding: uniform(vocab_size, d, 0.5, &mut rng),
            position_embedding: uniform(config.max_seq_len, d, 0.1, &mut rng),
            context_blocks: blocks(config.context_layers, config.context_heads, &mut rng)?,
            context_norm: LayerNormParams::identity(d),
            cross_blocks: blocks(config.cross_layers, config.cross_heads, &mut rng)?,
            self_blocks: blocks(config.self_layers, config.self_heads, &mut rng)?,
            output_norm: LayerNormParams::identity(d),
            classifier_w: init_with(d, config.num_properties, InitScheme::UniformScaled, &mut rng),
            classifier_b: Matrix::zeros(1, config.num_properties),
        })
    }

    /// Same structure filled with zeros (gradient accumulators, moments).
    pub fn zeros_like(&self) -> Self {
        self.map(&mut |m: &Matrix<T>| Matrix::zeros(m.rows(), m.cols()))
    }

    pub fn register(&self, tape: &mut Tape<T>) -> ModelParams<Var> {
        self.map(&mut |m: &Matrix<T>| tape.param(m.clone()))
    }

    pub fn parameter_count(&self) -> usize {
        self.leaves().iter().map(|m| m.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.leaves().iter().all(|m| m.is_finite())
    }
}

/// A source of pretrained weights that can overwrite a freshly initialized
/// parameter set of matching shape. Only checkpoints produced by this crate
/// are read today; see [`crate::model::load_checkpoint`].
pub trait WeightSource<T: Scalar> {
    fn load_into(&self, params: &mut ModelParams<Matrix<T>>) -> Result<()>;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_order_matches_map_order() {
        let cfg = CalConfig {
            embed_dim: 8,
            context_heads: 2,
            cross_heads: 2,
            self_heads: 2,
            ffn_width: 16,
            max_seq_len: 16,
            segment_overlap: 4,
            ..CalConfig::default()
        };
        let p: ModelParams<Matrix<f64>> = ModelParams::init(&cfg, 10, 1).unwrap();
        let mut counter = 0usize;
        let numbered = p.map(&mut |_| {
            counter += 1;
            counter
        });
        let order: Vec<usize> = numbered.leaves().into_iter().copied().collect();
        assert_eq!(order, (1..=order.len()).collect::<Vec<_>>());
        assert_eq!(p.leaves().len(), p.clone().leaves_mut().len());
    }

    #[test]
    fn init_is_seeded() {
        let cfg = CalConfig::default();
        let a: ModelParams<Matrix<f64>> = ModelParams::init(&cfg, 20, 7).unwrap();
        let b: ModelParams<Matrix<f64>> = ModelParams::init(&cfg, 20, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.is_finite());
    }
}

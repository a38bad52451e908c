//! Scaled dot-product attention and the pre-norm transformer blocks built on it.

use rand::Rng as _;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numkit::{init_with, InitScheme, Matrix, Tape, Var};
use crate::scalar::Scalar;

/// Random source used for dropout masks and initialization.
pub type Rng = ChaCha8Rng;

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams<L> {
    pub w_q: L,
    pub w_k: L,
    pub w_v: L,
}

/// Per-head projections plus the output projection from the concatenated
/// heads back to the model width.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams<L> {
    pub heads: Vec<HeadParams<L>>,
    pub w_o: L,
    pub b_o: L,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams<L> {
    pub gain: L,
    pub bias: L,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardParams<L> {
    pub w1: L,
    pub b1: L,
    pub w2: L,
    pub b2: L,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams<L> {
    pub ln_attn: LayerNormParams<L>,
    pub attention: AttentionParams<L>,
    pub ln_ffn: LayerNormParams<L>,
    pub ffn: FeedForwardParams<L>,
}

impl<L> HeadParams<L> {
    pub fn map<M, F: FnMut(&L) -> M>(&self, f: &mut F) -> HeadParams<M> {
        HeadParams {
            w_q: f(&self.w_q),
            w_k: f(&self.w_k),
            w_v: f(&self.w_v),
        }
    }

    pub fn visit<'a>(&'a self, out: &mut Vec<&'a L>) {
        out.extend([&self.w_q, &self.w_k, &self.w_v]);
    }

    pub fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut L>) {
        out.extend([&mut self.w_q, &mut self.w_k, &mut self.w_v]);
    }
}

impl<L> AttentionParams<L> {
    pub fn map<M, F: FnMut(&L) -> M>(&self, f: &mut F) -> AttentionParams<M> {
        AttentionParams {
            heads: self.heads.iter().map(|h| h.map(f)).collect(),
            w_o: f(&self.w_o),
            b_o: f(&self.b_o),
        }
    }

    pub fn visit<'a>(&'a self, out: &mut Vec<&'a L>) {
        for h in &self.heads {
            h.visit(out);
        }
        out.extend([&self.w_o, &self.b_o]);
    }

    pub fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut L>) {
        for h in &mut self.heads {
            h.visit_mut(out);
        }
        out.extend([&mut self.w_o, &mut self.b_o]);
    }
}

impl<L> LayerNormParams<L> {
    pub fn map<M, F: FnMut(&L) -> M>(&self, f: &mut F) -> LayerNormParams<M> {
        LayerNormParams {
            gain: f(&self.gain),
            bias: f(&self.bias),
        }
    }

    pub fn visit<'a>(&'a self, out: &mut Vec<&'a L>) {
        out.extend([&self.gain, &self.bias]);
    }

    pub fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut L>) {
        out.extend([&mut self.gain, &mut self.bias]);
    }
}

impl<L> FeedForwardParams<L> {
    pub fn map<M, F: FnMut(&L) -> M>(&self, f: &mut F) -> FeedForwardParams<M> {
        FeedForwardParams {
            w1: f(&self.w1),
            b1: f(&self.b1),
            w2: f(&self.w2),
            b2: f(&self.b2),
        }
    }

    pub fn visit<'a>(&'a self, out: &mut Vec<&'a L>) {
        out.extend([&self.w1, &self.b1, &self.w2, &self.b2]);
    }

    pub fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut L>) {
        out.extend([&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]);
    }
}

impl<L> BlockParams<L> {
    pub fn map<M, F: FnMut(&L) -> M>(&self, f: &mut F) -> BlockParams<M> {
        BlockParams {
            ln_attn: self.ln_attn.map(f),
            attention: self.attention.map(f),
            ln_ffn: self.ln_ffn.map(f),
            ffn: self.ffn.map(f),
        }
    }

    pub fn visit<'a>(&'a self, out: &mut Vec<&'a L>) {
        self.ln_attn.visit(out);
        self.attention.visit(out);
        self.ln_ffn.visit(out);
        self.ffn.visit(out);
    }

    pub fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut L>) {
        self.ln_attn.visit_mut(out);
        self.attention.visit_mut(out);
        self.ln_ffn.visit_mut(out);
        self.ffn.visit_mut(out);
    }
}

impl<T: Scalar> LayerNormParams<Matrix<T>> {
    pub fn identity(d: usize) -> Self {
        LayerNormParams {
            gain: Matrix::filled(1, d, T::one()),
            bias: Matrix::zeros(1, d),
        }
    }
}

impl<T: Scalar> BlockParams<Matrix<T>> {
    /// Randomly initialized block of width `d`, `heads` heads of width
    /// `d / heads`, and feed-forward hidden width `ffn_width`.
    pub fn init(d: usize, heads: usize, ffn_width: usize, rng: &mut Rng) -> Result<Self> {
        if heads == 0 || !d.is_multiple_of(heads) {
            return Err(Error::Config(format!("{heads} heads do not divide width {d}")));
        }
        let dh = d / heads;
        let u = InitScheme::UniformScaled;
        let heads = (0..heads)
            .map(|_| HeadParams {
                w_q: init_with(d, dh, u, rng),
                w_k: init_with(d, dh, u, rng),
                w_v: init_with(d, dh, u, rng),
            })
            .collect();
        Ok(BlockParams {
            ln_attn: LayerNormParams::identity(d),
            attention: AttentionParams {
                heads,
                w_o: init_with(d, d, u, rng),
                b_o: Matrix::zeros(1, d),
            },
            ln_ffn: LayerNormParams::identity(d),
            ffn: FeedForwardParams {
                w1: init_with(d, ffn_width, u, rng),
                b1: Matrix::zeros(1, ffn_width),
                w2: init_with(ffn_width, d, u, rng),
                b2: Matrix::zeros(1, d),
            },
        })
    }

    pub fn register(&self, tape: &mut Tape<T>) -> BlockParams<Var> {
        self.map(&mut |m: &Matrix<T>| tape.param(m.clone()))
    }
}

/// Whether sub-layer outputs get dropout.
pub enum Mode<'a> {
    Eval,
    Train { dropout: f64, rng: &'a mut Rng },
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train { .. })
    }

    /// Inverted dropout: kept entries are scaled by 1/(1−p).
    pub fn dropout<T: Scalar>(&mut self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        match self {
            Mode::Eval => Ok(x),
            Mode::Train { dropout, .. } if *dropout <= 0.0 => Ok(x),
            Mode::Train { dropout, rng } => {
                let (r, c) = tape.shape(x);
                let keep = T::lit(1.0 / (1.0 - *dropout));
                let p = *dropout;
                let mask = (0..r * c)
                    .map(|_| if rng.gen::<f64>() < p { T::zero() } else { keep })
                    .collect();
                tape.mul_const(x, Matrix::from_vec(r, c, mask)?)
            }
        }
    }
}

/// `scores = softmax(q·kᵀ/√d_q)`, `out = scores·v`.
pub fn attention_core<T: Scalar>(tape: &mut Tape<T>, q: Var, k: Var, v: Var, causal: bool) -> Result<(Var, Var)> {
    let (qs, ks, vs) = (tape.shape(q), tape.shape(k), tape.shape(v));
    if qs.1 != ks.1 {
        return Err(Error::shape("attention_core q/k", qs, ks));
    }
    if ks.0 != vs.0 {
        return Err(Error::shape("attention_core k/v", ks, vs));
    }
    let logits = tape.matmul_t(q, k)?;
    let scaled = tape.scale(logits, T::one() / T::from_usize(qs.1).unwrap().sqrt());
    let scores = tape.softmax_rows_masked(scaled, causal);
    let out = tape.matmul(scores, v)?;
    Ok((scores, out))
}

/// Output of a multi-head attention call: projected output and per-head scores.
pub struct HeadsOutput {
    pub out: Var,
    pub scores: Vec<Var>,
}

/// Concatenated heads of `attention_core(x_q·w_q, x_kv·w_k, x_kv·w_v)`, then
/// the output projection. Self-attention is `x_q == x_kv`.
pub fn multi_head<T: Scalar>(
    tape: &mut Tape<T>,
    x_q: Var,
    x_kv: Var,
    p: &AttentionParams<Var>,
    causal: bool,
) -> Result<HeadsOutput> {
    let mut outs = Vec::with_capacity(p.heads.len());
    let mut scores = Vec::with_capacity(p.heads.len());
    for h in &p.heads {
        let q = tape.matmul(x_q, h.w_q)?;
        let k = tape.matmul(x_kv, h.w_k)?;
        let v = tape.matmul(x_kv, h.w_v)?;
        let (s, o) = attention_core(tape, q, k, v, causal)?;
        scores.push(s);
        outs.push(o);
    }
    let concat = if outs.len() == 1 {
        outs[0]
    } else {
        tape.concat_cols(&outs)?
    };
    let out = tape.linear(concat, p.w_o, p.b_o)?;
    Ok(HeadsOutput { out, scores })
}

fn layer_norm<T: Scalar>(tape: &mut Tape<T>, x: Var, p: &LayerNormParams<Var>) -> Result<Var> {
    tape.layer_norm(x, p.gain, p.bias, T::lit(LN_EPS))
}

fn feed_forward<T: Scalar>(tape: &mut Tape<T>, x: Var, p: &FeedForwardParams<Var>) -> Result<Var> {
    let h = tape.linear(x, p.w1, p.b1)?;
    let h = tape.gelu(h);
    tape.linear(h, p.w2, p.b2)
}

/// Output of one transformer block.
pub struct BlockOutput {
    pub out: Var,
    pub scores: Vec<Var>,
}

/// Self-attention block: `x' = x + attn(ln(x))`, `out = x' + ffn(ln(x'))`.
pub fn encoder_block<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    p: &BlockParams<Var>,
    mode: &mut Mode<'_>,
    causal: bool,
) -> Result<BlockOutput> {
    let h = layer_norm(tape, x, &p.ln_attn)?;
    let attn = multi_head(tape, h, h, &p.attention, causal)?;
    finish_block(tape, x, attn, p, mode)
}

/// Cross-attention block; queries from `x_q`, keys and values from `x_ctx`.
/// The residual runs along the query stream, so the output is `n1×d`.
pub fn cross_block<T: Scalar>(
    tape: &mut Tape<T>,
    x_q: Var,
    x_ctx: Var,
    p: &BlockParams<Var>,
    mode: &mut Mode<'_>,
) -> Result<BlockOutput> {
    let hq = layer_norm(tape, x_q, &p.ln_attn)?;
    let hc = if x_ctx == x_q {
        hq
    } else {
        layer_norm(tape, x_ctx, &p.ln_attn)?
    };
    let attn = multi_head(tape, hq, hc, &p.attention, false)?;
    finish_block(tape, x_q, attn, p, mode)
}

fn finish_block<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    attn: HeadsOutput,
    p: &BlockParams<Var>,
    mode: &mut Mode<'_>,
) -> Result<BlockOutput> {
    let a = mode.dropout(tape, attn.out)?;
    let x1 = tape.add(x, a)?;
    let h = layer_norm(tape, x1, &p.ln_ffn)?;
    let f = feed_forward(tape, h, &p.ffn)?;
    let f = mode.dropout(tape, f)?;
    let out = tape.add(x1, f)?;
    Ok(BlockOutput {
        out,
        scores: attn.scores,
    })
}

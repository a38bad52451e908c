use crate::attention::{cross_block, encoder_block, Mode};
use crate::error::{Error, Result};
use crate::model::config::CalConfig;
use crate::model::params::ModelParams;
use crate::model::vocab::{tokenize, Vocab, SEP};
use crate::numkit::{Matrix, Tape, Var};
use crate::scalar::Scalar;

const LN_EPS: f64 = 1e-5;

fn embed<T: Scalar>(tape: &mut Tape<T>, ids: &[usize], p: &ModelParams<Var>, cfg: &CalConfig) -> Result<Var> {
    if ids.len() > cfg.max_seq_len {
        return Err(Error::SequenceTooLong {
            len: ids.len(),
            max: cfg.max_seq_len,
        });
    }
    if ids.is_empty() {
        return Err(Error::Input("cannot embed an empty token sequence".into()));
    }
    let tok = tape.gather_rows(p.token_embedding, ids)?;
    let positions: Vec<usize> = (0..ids.len()).collect();
    let pos = tape.gather_rows(p.position_embedding, &positions)?;
    tape.add(tok, pos)
}

/// Token plus position embedding through the context encoder stack and its
/// final normalization; `n × d`.
pub fn encode_context_on<T: Scalar>(
    tape: &mut Tape<T>,
    ids: &[usize],
    p: &ModelParams<Var>,
    cfg: &CalConfig,
    mode: &mut Mode<'_>,
) -> Result<Var> {
    let mut x = embed(tape, ids, p, cfg)?;
    for block in &p.context_blocks {
        x = encoder_block(tape, x, block, mode, cfg.causal_context)?.out;
    }
    tape.layer_norm(x, p.context_norm.gain, p.context_norm.bias, T::lit(LN_EPS))
}

/// Token ids of `source <sep> destination`. Each identifier keeps at most
/// `(max_seq_len − 1) / 2` tokens.
pub fn query_ids(source: &str, destination: &str, vocab: &Vocab, cfg: &CalConfig) -> Vec<usize> {
    let half = (cfg.max_seq_len - 1) / 2;
    let mut ids = tokenize(source, vocab, half);
    ids.push(SEP);
    ids.extend(tokenize(destination, vocab, half));
    ids
}

pub fn encode_query_on<T: Scalar>(
    tape: &mut Tape<T>,
    ids: &[usize],
    p: &ModelParams<Var>,
    cfg: &CalConfig,
) -> Result<Var> {
    embed(tape, ids, p, cfg)
}

/// Handles produced by one classifier pass.
pub struct CalOutput {
    pub logits: Var,
    /// 1 × num_properties sigmoid outputs.
    pub probs: Var,
    /// Per cross layer, per head, the `m × n` score matrices.
    pub cross_scores: Vec<Vec<Var>>,
}

/// Query stream through the cross blocks against `ctx`, then the self
/// blocks, output norm, mean pooling over query positions, and the linear
/// head with a per-property sigmoid.
pub fn cal_forward_on<T: Scalar>(
    tape: &mut Tape<T>,
    ctx: Var,
    qry: Var,
    p: &ModelParams<Var>,
    mode: &mut Mode<'_>,
) -> Result<CalOutput> {
    let mut x = qry;
    let mut cross_scores = Vec::with_capacity(p.cross_blocks.len());
    for block in &p.cross_blocks {
        let out = cross_block(tape, x, ctx, block, mode)?;
        cross_scores.push(out.scores);
        x = out.out;
    }
    for block in &p.self_blocks {
        x = encoder_block(tape, x, block, mode, false)?.out;
    }
    let x = tape.layer_norm(x, p.output_norm.gain, p.output_norm.bias, T::lit(LN_EPS))?;
    let pooled = tape.mean_rows(x);
    let logits = tape.linear(pooled, p.classifier_w, p.classifier_b)?;
    let probs = tape.sigmoid(logits);
    Ok(CalOutput {
        logits,
        probs,
        cross_scores,
    })
}

/// Value-level context encoding.
pub fn encode_context<T: Scalar>(
    ids: &[usize],
    params: &ModelParams<Matrix<T>>,
    cfg: &CalConfig,
    mode: &mut Mode<'_>,
) -> Result<Matrix<T>> {
    let mut tape = Tape::new();
    let p = params.register(&mut tape);
    let out = encode_context_on(&mut tape, ids, &p, cfg, mode)?;
    Ok(tape.value(out).clone())
}

/// Value-level query embedding of `source <sep> destination`.
pub fn encode_query<T: Scalar>(
    source: &str,
    destination: &str,
    vocab: &Vocab,
    params: &ModelParams<Matrix<T>>,
    cfg: &CalConfig,
) -> Result<Matrix<T>> {
    let ids = query_ids(source, destination, vocab, cfg);
    let mut tape = Tape::new();
    let p = params.register(&mut tape);
    let out = encode_query_on(&mut tape, &ids, &p, cfg)?;
    Ok(tape.value(out).clone())
}

/// Value-level classifier pass on precomputed context and query encodings.
pub fn cal_forward<T: Scalar>(
    ctx: &Matrix<T>,
    qry: &Matrix<T>,
    params: &ModelParams<Matrix<T>>,
    mode: &mut Mode<'_>,
) -> Result<Vec<T>> {
    let mut tape = Tape::new();
    let p = params.register(&mut tape);
    let c = tape.constant(ctx.clone());
    let q = tape.constant(qry.clone());
    let out = cal_forward_on(&mut tape, c, q, &p, mode)?;
    Ok(tape.value(out.probs).data().to_vec())
}

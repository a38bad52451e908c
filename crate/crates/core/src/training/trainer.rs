use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attention::{Mode, Rng};
use crate::corpus::{class_stats, AnnotatedSample, NUM_PROPERTIES};
use crate::error::{Error, Result};
use crate::model::{
    anchor_segment, build_vocab, cal_forward_on, encode_context_on, encode_query_on, merge_segment_probs, query_ids,
    segment_document, tokenize, CalConfig, CalModel, Vocab, PAD, SEP, UNK,
};
use crate::numkit::{Matrix, Tape, Var};
use crate::scalar::Scalar;
use crate::training::loss::{balanced_bce, unweighted_bce, ClassStats, LossKind, PROB_EPS};
use crate::training::metrics::Metrics;
use crate::training::optim::{optimizer_step, OptimizerKind, OptimizerState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub loss: LossKind,
    /// Decision threshold for the accuracies in the history.
    pub eval_threshold: f64,
    /// Stop once train and validation accuracy both reach this value.
    pub target_accuracy: Option<f64>,
    pub selection: Selection,
}

/// Which epoch's parameters training returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// Highest validation accuracy, ties broken by train accuracy, then
    /// the earlier epoch. Train accuracy alone without a validation set.
    #[default]
    BestAccuracy,
    Last,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 3e-4,
            epochs: 100,
            batch_size: 16,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            loss: LossKind::Balanced,
            eval_threshold: 0.5,
            target_accuracy: None,
            selection: Selection::BestAccuracy,
        }
    }
}

impl TrainConfig {
    /// Settings used with the full-size configuration on the 16k-pair corpus.
    pub fn reference() -> Self {
        TrainConfig {
            learning_rate: 1e-7,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.eval_threshold) {
            return Err(Error::Config(format!(
                "eval_threshold {} outside [0, 1]",
                self.eval_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
    pub train_accuracy: f64,
    pub valid_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    /// Optimizer updates applied.
    pub steps: u64,
}

impl History {
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("epoch record serializes") + "\n")
            .collect()
    }
}

pub struct TrainOutcome<T> {
    /// Parameters of the epoch picked by [`TrainConfig::selection`].
    pub model: CalModel<T>,
    pub history: History,
}

struct Example<T> {
    context: usize,
    query: Vec<usize>,
    labels: Matrix<T>,
    weights: Matrix<T>,
}

struct Prepared<T> {
    contexts: Vec<Vec<usize>>,
    examples: Vec<Example<T>>,
}

/// Tokenizes every sample and picks, per sample, the context segment with
/// the most query tokens. Samples sharing a context segment share an index.
fn prepare<T: Scalar>(
    model: &CalModel<T>,
    samples: &[AnnotatedSample],
    stats: &ClassStats,
    loss: LossKind,
) -> Result<Prepared<T>> {
    let cfg = &model.config;
    let mut doc_cache: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut index: HashMap<(&str, usize), usize> = HashMap::new();
    let mut contexts = Vec::new();
    let mut examples = Vec::with_capacity(samples.len());
    for s in samples {
        if s.context.trim().is_empty() {
            return Err(Error::Input(format!("sample {:?} has no context", s.key())));
        }
        let ids = doc_cache
            .entry(s.context.as_str())
            .or_insert_with(|| tokenize(&s.context, &model.vocab, usize::MAX));
        let segments = segment_document(ids.len(), cfg.max_seq_len, cfg.segment_overlap)?;
        let query = query_ids(&s.source, &s.destination, &model.vocab, cfg);
        let needles: Vec<usize> = query
            .iter()
            .copied()
            .filter(|&t| t != PAD && t != UNK && t != SEP)
            .collect();
        let seg = anchor_segment(ids, &segments, &needles);
        let context = *index.entry((s.context.as_str(), seg)).or_insert_with(|| {
            contexts.push(segments[seg].slice(ids).to_vec());
            contexts.len() - 1
        });
        let y = s.labels.as_f64().map(T::from_f64_lossy);
        let labels = Matrix::from_vec(1, NUM_PROPERTIES, y.to_vec())?;
        let weights = match loss {
            LossKind::Balanced => stats.weight_matrix(&labels)?,
            LossKind::Unweighted => Matrix::filled(1, NUM_PROPERTIES, T::one()),
        };
        examples.push(Example {
            context,
            query,
            labels,
            weights,
        });
    }
    Ok(Prepared { contexts, examples })
}

/// Loss and summed gradients for one batch; the loss is divided by the
/// batch size. Context groups run in parallel and are reduced in order.
fn batch_gradients<T: Scalar>(
    model: &CalModel<T>,
    data: &Prepared<T>,
    batch: &[usize],
    rng: &mut Rng,
) -> Result<(f64, Vec<Matrix<T>>)> {
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for &i in batch {
        let c = data.examples[i].context;
        match groups.iter_mut().find(|(g, _)| *g == c) {
            Some((_, members)) => members.push(i),
            None => groups.push((c, vec![i])),
        }
    }
    let seeds: Vec<u64> = groups.iter().map(|_| rng.gen()).collect();
    let scale = T::one() / T::from_usize(batch.len()).unwrap();
    let cfg = &model.config;

    let parts: Vec<Result<(f64, Vec<Matrix<T>>)>> = groups
        .par_iter()
        .zip(seeds)
        .map(|((c, members), seed)| {
            let mut tape = Tape::new();
            let p = model.params.register(&mut tape);
            let mut drop_rng = Rng::seed_from_u64(seed);
            let mut mode = if cfg.dropout > 0.0 {
                Mode::Train {
                    dropout: cfg.dropout,
                    rng: &mut drop_rng,
                }
            } else {
                Mode::Eval
            };
            let ctx = encode_context_on(&mut tape, &data.contexts[*c], &p, cfg, &mut mode)?;
            let mut total: Option<Var> = None;
            for &i in members {
                let ex = &data.examples[i];
                let q = encode_query_on(&mut tape, &ex.query, &p, cfg)?;
                let out = cal_forward_on(&mut tape, ctx, q, &p, &mut mode)?;
                let l = tape.weighted_bce(out.probs, ex.labels.clone(), ex.weights.clone(), T::lit(PROB_EPS))?;
                total = Some(match total {
                    Some(t) => tape.add(t, l)?,
                    None => l,
                });
            }
            let loss = tape.scale(total.expect("group is non-empty"), scale);
            let value = tape.value(loss)[(0, 0)].as_f64();
            let mut grads = tape.backward(loss)?;
            let g = p.leaves().into_iter().map(|v| grads.take(&tape, *v)).collect();
            Ok((value, g))
        })
        .collect();

    let mut loss = 0.0;
    let mut sum: Option<Vec<Matrix<T>>> = None;
    for part in parts {
        let (l, g) = part?;
        loss += l;
        match sum.as_mut() {
            None => sum = Some(g),
            Some(acc) => {
                for (a, b) in acc.iter_mut().zip(&g) {
                    a.add_assign(b);
                }
            }
        }
    }
    Ok((loss, sum.unwrap_or_default()))
}

/// Merged per-property probabilities for each sample, in input order.
/// Each distinct context is segmented and encoded once.
pub fn predict_samples<T: Scalar>(
    model: &CalModel<T>,
    samples: &[AnnotatedSample],
) -> Result<Vec<[f64; NUM_PROPERTIES]>> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_context: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, s) in samples.iter().enumerate() {
        by_context
            .entry(s.context.as_str())
            .or_insert_with(|| {
                order.push(s.context.as_str());
                Vec::new()
            })
            .push(i);
    }
    let mut out = vec![[0.0; NUM_PROPERTIES]; samples.len()];
    for ctx in order {
        let doc = model.segment(ctx)?;
        let encoded = model.encode_segments(&doc)?;
        let members = &by_context[ctx];
        let probs: Vec<Result<[f64; NUM_PROPERTIES]>> = members
            .par_iter()
            .map(|&i| {
                let s = &samples[i];
                let per_segment = encoded
                    .iter()
                    .map(|c| model.pair_probs(c, &s.source, &s.destination))
                    .collect::<Result<Vec<_>>>()?;
                let merged = merge_segment_probs(&per_segment);
                let mut p = [0.0; NUM_PROPERTIES];
                p.copy_from_slice(&merged.probs);
                Ok(p)
            })
            .collect();
        for (&i, p) in members.iter().zip(probs) {
            out[i] = p?;
        }
    }
    Ok(out)
}

/// Metrics of `model` on `samples` at decision threshold `threshold`.
pub fn evaluate<T: Scalar>(model: &CalModel<T>, samples: &[AnnotatedSample], threshold: f64) -> Result<Metrics> {
    let probs = predict_samples(model, samples)?;
    let labels: Vec<[bool; NUM_PROPERTIES]> = samples.iter().map(|s| s.labels.0).collect();
    Ok(Metrics::compute(&probs, &labels, threshold))
}

fn dataset_loss(
    probs: &[[f64; NUM_PROPERTIES]],
    samples: &[AnnotatedSample],
    stats: &ClassStats,
    loss: LossKind,
) -> Result<f64> {
    let p = Matrix::from_vec(probs.len(), NUM_PROPERTIES, probs.iter().flatten().copied().collect())?;
    let y = Matrix::from_vec(
        samples.len(),
        NUM_PROPERTIES,
        samples.iter().flat_map(|s| s.labels.as_f64()).collect(),
    )?;
    match loss {
        LossKind::Balanced => balanced_bce(&p, &y, stats),
        LossKind::Unweighted => unweighted_bce(&p, &y),
    }
}

fn accuracy(probs: &[[f64; NUM_PROPERTIES]], samples: &[AnnotatedSample], threshold: f64) -> f64 {
    let labels: Vec<[bool; NUM_PROPERTIES]> = samples.iter().map(|s| s.labels.0).collect();
    Metrics::compute(probs, &labels, threshold).micro.accuracy
}

/// Vocabulary over every context, source and destination of `samples`.
pub fn sample_vocab(samples: &[AnnotatedSample], min_freq: usize) -> Result<Vocab> {
    let texts: Vec<&str> = samples
        .iter()
        .flat_map(|s| [s.context.as_str(), s.source.as_str(), s.destination.as_str()])
        .collect();
    build_vocab(&texts, min_freq)
}

/// Initializes a model from `config` and trains it.
pub fn train<T: Scalar>(
    train_set: &[AnnotatedSample],
    valid_set: &[AnnotatedSample],
    vocab: Vocab,
    config: CalConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let model = CalModel::new(config, vocab, train_cfg.seed)?;
    train_from(model, train_set, valid_set, train_cfg)
}

/// Trains starting from the parameters already in `model`.
pub fn train_from<T: Scalar>(
    mut model: CalModel<T>,
    train_set: &[AnnotatedSample],
    valid_set: &[AnnotatedSample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Input("empty training set".into()));
    }
    let stats = class_stats(train_set);
    let data = prepare(&model, train_set, &stats, cfg.loss)?;
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate)?;
    let mut rng = Rng::seed_from_u64(cfg.seed ^ 0x7261_696e);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = History::default();
    let mut best: Option<((f64, f64), CalModel<T>)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let (loss, grads) = batch_gradients(&model, &data, batch, &mut rng)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "training diverged at epoch {epoch}, batch {}: loss {loss}",
                    b + 1
                )));
            }
            let mut leaves = model.params.leaves_mut();
            optimizer_step(&mut leaves, &grads, &mut opt).map_err(|e| match e {
                Error::Numeric(m) => Error::Numeric(format!("epoch {epoch}, batch {}: {m}", b + 1)),
                other => other,
            })?;
            epoch_loss += loss * batch.len() as f64;
        }

        let train_probs = predict_samples(&model, train_set)?;
        let train_accuracy = accuracy(&train_probs, train_set, cfg.eval_threshold);
        let (valid_loss, valid_accuracy) = if valid_set.is_empty() {
            (None, None)
        } else {
            let vp = predict_samples(&model, valid_set)?;
            (
                Some(dataset_loss(&vp, valid_set, &stats, cfg.loss)?),
                Some(accuracy(&vp, valid_set, cfg.eval_threshold)),
            )
        };
        history.records.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / train_set.len() as f64,
            valid_loss,
            train_accuracy,
            valid_accuracy,
        });

        let score = (valid_accuracy.unwrap_or(train_accuracy), train_accuracy);
        let better = match cfg.selection {
            Selection::BestAccuracy => best.as_ref().is_none_or(|(s, _)| score > *s),
            Selection::Last => true,
        };
        if better {
            best = Some((score, model.clone()));
            history.best_epoch = epoch;
        }
        if let Some(target) = cfg.target_accuracy {
            if train_accuracy >= target && valid_accuracy.is_none_or(|v| v >= target) {
                break;
            }
        }
    }
    history.steps = opt.steps;
    let (_, model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome { model, history })
}

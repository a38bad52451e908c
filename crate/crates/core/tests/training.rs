use std::path::Path;

use protodep::corpus::{load_annotations, split, AnnotatedSample};
use protodep::model::{decode_checkpoint, encode_checkpoint, CalConfig, CalModel};
use protodep::training::{evaluate, predict_samples, sample_vocab, train, train_from, Selection, TrainConfig};
use protodep::ErrorKind;

fn separable() -> Vec<AnnotatedSample> {
    load_annotations(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/separable_corpus.jsonl")).unwrap()
}

fn desk() -> CalConfig {
    CalConfig {
        embed_dim: 32,
        context_layers: 1,
        context_heads: 2,
        cross_layers: 1,
        cross_heads: 2,
        self_layers: 1,
        self_heads: 2,
        ffn_width: 64,
        max_seq_len: 64,
        segment_overlap: 8,
        dropout: 0.0,
        ..CalConfig::default()
    }
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: 3e-3,
        epochs,
        batch_size: 16,
        seed: 3,
        ..TrainConfig::default()
    }
}

#[test]
fn separable_set_is_learned_within_200_epochs() {
    let samples = separable();
    let (tr, va) = split(&samples, 0.9, 3);
    let cfg = TrainConfig {
        epochs: 200,
        target_accuracy: Some(0.99),
        ..quick(200)
    };
    let out = train::<f64>(&tr, &va, sample_vocab(&samples, 1).unwrap(), desk(), &cfg).unwrap();
    let m = evaluate(&out.model, &tr, 0.5).unwrap();
    assert!(m.micro.accuracy >= 0.99, "{}", m.micro.accuracy);
    assert!(out.history.records.len() <= 200);
}

#[test]
fn same_seed_gives_identical_history_and_weights() {
    let samples = separable();
    let (tr, va) = split(&samples, 0.8, 1);
    let vocab = sample_vocab(&samples, 1).unwrap();
    let a = train::<f64>(&tr, &va, vocab.clone(), desk(), &quick(3)).unwrap();
    let b = train::<f64>(&tr, &va, vocab, desk(), &quick(3)).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(encode_checkpoint(&a.model), encode_checkpoint(&b.model));
}

#[test]
fn last_selection_keeps_final_epoch() {
    let samples = separable();
    let (tr, va) = split(&samples, 0.8, 1);
    let cfg = TrainConfig {
        selection: Selection::Last,
        ..quick(4)
    };
    let out = train::<f64>(&tr, &va, sample_vocab(&samples, 1).unwrap(), desk(), &cfg).unwrap();
    assert_eq!(out.history.best_epoch, 4);
    assert_eq!(out.history.records.len(), 4);
}

#[test]
fn best_selection_returns_recorded_best_epoch() {
    let samples = separable();
    let (tr, va) = split(&samples, 0.8, 2);
    let out = train::<f64>(&tr, &va, sample_vocab(&samples, 1).unwrap(), desk(), &quick(6)).unwrap();
    let best = out.history.best_epoch;
    let best_acc = out.history.records[best - 1].valid_accuracy.unwrap();
    assert!(out
        .history
        .records
        .iter()
        .all(|r| r.valid_accuracy.unwrap() <= best_acc));
    let m = evaluate(&out.model, &va, 0.5).unwrap();
    assert_eq!(m.micro.accuracy, best_acc);
}

#[test]
fn resumed_training_starts_from_given_parameters() {
    let samples = separable();
    let (tr, va) = split(&samples, 0.8, 1);
    let vocab = sample_vocab(&samples, 1).unwrap();
    let first = train::<f64>(&tr, &va, vocab, desk(), &quick(2)).unwrap();
    let before = predict_samples(&first.model, &va).unwrap();
    let restored: CalModel<f64> = decode_checkpoint(&encode_checkpoint(&first.model)).unwrap();
    assert_eq!(predict_samples(&restored, &va).unwrap(), before);
    let cont = train_from(restored, &tr, &va, &quick(1)).unwrap();
    assert_eq!(cont.history.records.len(), 1);
    assert_ne!(predict_samples(&cont.model, &va).unwrap(), before);
}

#[test]
fn bad_settings_are_config_errors() {
    let samples = separable();
    let vocab = sample_vocab(&samples, 1).unwrap();
    let bad_lr = TrainConfig {
        learning_rate: 0.0,
        ..quick(1)
    };
    let err = train::<f64>(&samples, &[], vocab.clone(), desk(), &bad_lr)
        .err()
        .unwrap();
    assert_eq!(err.kind(), ErrorKind::Config);
    let bad_heads = CalConfig {
        context_heads: 3,
        ..desk()
    };
    let err = train::<f64>(&samples, &[], vocab.clone(), bad_heads, &quick(1))
        .err()
        .unwrap();
    assert_eq!(err.kind(), ErrorKind::Config);
    let err = train::<f64>(&[], &[], vocab, desk(), &quick(1)).err().unwrap();
    assert_eq!(err.kind(), ErrorKind::Data);
}

#[test]
fn exploding_learning_rate_is_a_numeric_error() {
    let samples = separable();
    let cfg = TrainConfig {
        learning_rate: 1e300,
        optimizer: protodep::training::OptimizerKind::Sgd,
        ..quick(3)
    };
    let err = train::<f64>(&samples, &[], sample_vocab(&samples, 1).unwrap(), desk(), &cfg)
        .err()
        .unwrap();
    assert_eq!(err.kind(), ErrorKind::Numeric, "{err}");
}

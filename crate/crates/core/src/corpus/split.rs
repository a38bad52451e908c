use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::sample::{AnnotatedSample, NUM_PROPERTIES};

/// Seeded train/validation split, stratified on "has any positive label".
///
/// The training share of each stratum is `ceil(ratio · n)` for positives
/// and whatever remains of `round(ratio · total)` for negatives. Positives
/// that carry a property not yet present in the training set are placed
/// first, so every property with at least one positive reaches training.
pub fn split(samples: &[AnnotatedSample], ratio: f64, seed: u64) -> (Vec<AnnotatedSample>, Vec<AnnotatedSample>) {
    let ratio = ratio.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = (0..samples.len()).partition(|&i| samples[i].labels.any());
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    let total = samples.len();
    let mut n_train = (ratio * total as f64).round() as usize;
    if total >= 2 {
        n_train = n_train.clamp(1, total - 1);
    }
    let mut pos_train = ((ratio * pos.len() as f64).ceil() as usize).min(pos.len()).min(n_train);
    let mut neg_train = n_train - pos_train;
    if neg_train > neg.len() {
        neg_train = neg.len();
        pos_train = (n_train - neg_train).min(pos.len());
    }

    // Property-covering positives first, then the rest in shuffled order.
    let mut covered = [false; NUM_PROPERTIES];
    let mut ordered = Vec::with_capacity(pos.len());
    let mut rest = Vec::new();
    for &i in &pos {
        let adds = samples[i].labels.0.iter().zip(&covered).any(|(&l, &c)| l && !c);
        if adds {
            for (c, &l) in covered.iter_mut().zip(&samples[i].labels.0) {
                *c |= l;
            }
            ordered.push(i);
        } else {
            rest.push(i);
        }
    }
    ordered.extend(rest);

    let mut train_idx: Vec<usize> = ordered[..pos_train].iter().chain(&neg[..neg_train]).copied().collect();
    let mut valid_idx: Vec<usize> = ordered[pos_train..].iter().chain(&neg[neg_train..]).copied().collect();
    train_idx.shuffle(&mut rng);
    valid_idx.shuffle(&mut rng);
    (
        train_idx.iter().map(|&i| samples[i].clone()).collect(),
        valid_idx.iter().map(|&i| samples[i].clone()).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::sample::{Labels, PropertyKind, SampleProvenance};

    fn make(n: usize, positives: &[usize]) -> Vec<AnnotatedSample> {
        (0..n)
            .map(|i| {
                let pos = positives.contains(&i);
                AnnotatedSample {
                    doc_id: "d".into(),
                    section_id: "1".into(),
                    context: String::new(),
                    source: format!("s{i}"),
                    destination: format!("t{i}"),
                    labels: if pos {
                        Labels::from_kinds(&[PropertyKind::Integrity])
                    } else {
                        Labels::none()
                    },
                    provenance: if pos {
                        SampleProvenance::Expert
                    } else {
                        SampleProvenance::GeneratedNegative
                    },
                }
            })
            .collect()
    }

    #[test]
    fn nine_to_one() {
        let (t, v) = split(&make(10, &[]), 0.9, 1);
        assert_eq!((t.len(), v.len()), (9, 1));
    }

    #[test]
    fn deterministic() {
        let data = make(30, &[3, 7, 11]);
        assert_eq!(split(&data, 0.9, 5), split(&data, 0.9, 5));
        assert_ne!(split(&data, 0.9, 5).0, split(&data, 0.9, 6).0);
    }

    #[test]
    fn two_positives_land_in_train() {
        let data = make(20, &[4, 15]);
        for seed in 0..10 {
            let (t, v) = split(&data, 0.9, seed);
            assert_eq!((t.len(), v.len()), (18, 2));
            assert_eq!(t.iter().filter(|s| s.labels.any()).count(), 2);
        }
    }

    #[test]
    fn rare_property_reaches_train() {
        let mut data = make(20, &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
        data[9].labels = Labels::from_kinds(&[PropertyKind::Generate]);
        for seed in 0..10 {
            let (t, _) = split(&data, 0.5, seed);
            assert!(t.iter().any(|s| s.labels.get(PropertyKind::Generate)));
        }
    }
}

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::series::{DatasetSplit, Embedding};
use crate::{Error, Result};

/// Partitions subjects so that roughly `train_fraction` of the embeddings
/// land in the training side; no subject appears on both sides.
///
/// Subjects are visited in a seeded random order and each one joins the
/// training side when doing so moves the cumulative count closer to the
/// target.
pub fn subject_split(embeddings: &[Embedding], train_fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for e in embeddings {
        *counts.entry(e.subject_id).or_default() += 1;
    }
    if counts.len() < 2 {
        return Err(Error::invalid(format!(
            "subject-based split needs at least two subjects, found {}",
            counts.len()
        )));
    }

    let mut order: Vec<(u32, usize)> = counts.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let total: usize = order.iter().map(|(_, n)| n).sum();
    let target = train_fraction * total as f64;

    let mut train = BTreeSet::new();
    let mut cumulative = 0usize;
    for &(subject, n) in &order {
        let with = (cumulative + n) as f64 - target;
        let without = cumulative as f64 - target;
        if with.abs() <= without.abs() {
            train.insert(subject);
            cumulative += n;
        }
    }
    // Both sides must be populated.
    if train.is_empty() {
        train.insert(order[0].0);
    } else if train.len() == order.len() {
        let last = order.last().expect("two subjects").0;
        train.remove(&last);
    }

    Ok(partition(embeddings, |e| train.contains(&e.subject_id)))
}

/// Puts every embedding whose trial is in `test_trials` on the test side.
pub fn trial_split(embeddings: &[Embedding], test_trials: &[u32]) -> Result<DatasetSplit> {
    let split = partition(embeddings, |e| !test_trials.contains(&e.trial));
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::invalid(format!(
            "trial split on {test_trials:?} leaves one side empty"
        )));
    }
    Ok(split)
}

fn partition(embeddings: &[Embedding], is_train: impl Fn(&Embedding) -> bool) -> DatasetSplit {
    let (train, test): (Vec<Embedding>, Vec<Embedding>) = embeddings.iter().cloned().partition(|e| is_train(e));
    let subjects = |v: &[Embedding]| {
        v.iter()
            .map(|e| e.subject_id)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    };
    DatasetSplit {
        train_subjects: subjects(&train),
        test_subjects: subjects(&test),
        train,
        test,
    }
}

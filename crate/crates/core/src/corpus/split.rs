use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::CorpusError;

/// Seeded shuffle of `0..n` cut at `round(train_fraction · n)`.
///
/// With `labels`, each class is shuffled and cut on its own and the two
/// sides are shuffled again afterwards.
pub fn split_indices(
    n: usize,
    labels: Option<&[u8]>,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), CorpusError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(train_fraction));
    }
    if n < 2 {
        return Err(CorpusError::TooFewRecords(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cut = |len: usize| (train_fraction * len as f64).round() as usize;

    match labels {
        None => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let test = order.split_off(cut(n));
            Ok((order, test))
        }
        Some(labels) => {
            assert_eq!(labels.len(), n, "one label per record");
            let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
            for (i, &l) in labels.iter().enumerate() {
                by_class.entry(l).or_default().push(i);
            }
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for mut members in by_class.into_values() {
                members.shuffle(&mut rng);
                let rest = members.split_off(cut(members.len()));
                train.extend(members);
                test.extend(rest);
            }
            train.shuffle(&mut rng);
            test.shuffle(&mut rng);
            Ok((train, test))
        }
    }
}

/// Non-stratified [`split_indices`] applied to a slice.
pub fn split<T: Clone>(
    items: &[T],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>), CorpusError> {
    let (train, test) = split_indices(items.len(), None, train_fraction, seed)?;
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| items[i].clone()).collect();
    Ok((pick(train), pick(test)))
}

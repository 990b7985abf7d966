use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LabeledCorpus, LabeledRecord, NUM_CLASSES};

/// Two marker words per class, indexed by label code.
pub const CLASS_KEYWORDS: [[&str; 2]; NUM_CLASSES] = [
    ["gloomy", "tearful"],
    ["cheerful", "delighted"],
    ["adore", "cherish"],
    ["furious", "irate"],
    ["terrified", "dread"],
    ["astonished", "stunned"],
];

/// Neutral words shared by every class.
pub const FILLER_WORDS: [&str; 20] = [
    "morning", "street", "coffee", "window", "train", "office", "weekend", "phone", "garden",
    "letter", "music", "city", "river", "paper", "table", "story", "evening", "friend", "road",
    "market",
];

/// A class-balanced toy corpus: each record holds one or both keywords of
/// its class mixed into three to seven filler words.
pub fn synthetic_corpus(records: usize, seed: u64) -> LabeledCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<u8> = (0..records).map(|i| (i % NUM_CLASSES) as u8).collect();
    labels.shuffle(&mut rng);
    let records = labels
        .into_iter()
        .map(|label| {
            let keys = CLASS_KEYWORDS[label as usize];
            let mut words: Vec<&str> = match rng.random_range(0..3) {
                0 => vec![keys[0]],
                1 => vec![keys[1]],
                _ => keys.to_vec(),
            };
            let fillers = rng.random_range(3..=7);
            words.extend(
                (0..fillers).map(|_| *FILLER_WORDS.choose(&mut rng).expect("non-empty pool")),
            );
            words.shuffle(&mut rng);
            LabeledRecord::new(words.join(" "), label)
        })
        .collect();
    LabeledCorpus::new(records)
}

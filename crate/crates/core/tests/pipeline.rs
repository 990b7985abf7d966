use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sentigru::corpus::{synthetic_corpus, StopWords, Vocabulary, CLASS_KEYWORDS, LABEL_NAMES};
use sentigru::metrics::evaluate_predictions;
use sentigru::model::{inspect_sections, Classifier, Model, ModelConfig, ModelError};
use sentigru::trainer::{evaluate, fit, TrainConfig};

fn small_config() -> ModelConfig {
    ModelConfig {
        vocab_size: 64,
        embed_dim: 16,
        seq_len: 12,
        gru_units: [16, 8, 8],
        ..ModelConfig::paper()
    }
}

fn trained(
    records: usize,
    epochs: usize,
) -> (
    Classifier<f32>,
    Vec<usize>,
    Vec<sentigru::corpus::EncodedSequence>,
) {
    let corpus = synthetic_corpus(records, 5);
    let stop = StopWords::builtin();
    let tokens = corpus.tokenized(&stop);
    let vocab = Vocabulary::build(tokens.iter().map(Vec::as_slice), 64).unwrap();
    let data = corpus.encode(&vocab, &stop, 12).unwrap();
    let mut model = Model::<f32>::build(small_config(), 5).unwrap();
    let config = TrainConfig {
        epochs,
        batch_size: 32,
        learning_rate: 3e-3,
        seed: 5,
        ..TrainConfig::default()
    };
    let report = fit(&mut model, &data, &config).unwrap();
    let classifier = Classifier {
        model,
        vocab,
        stopwords: stop,
    };
    (classifier, report.validation_indices, data)
}

#[test]
fn trained_classifier_generalizes_to_held_out_records() {
    let (classifier, val_idx, data) = trained(240, 15);
    let val: Vec<_> = val_idx.iter().map(|&i| data[i].clone()).collect();
    let eval = evaluate(&classifier.model, &val, 64).unwrap();
    let truth: Vec<u8> = val.iter().map(|s| s.label).collect();
    let report = evaluate_predictions(&truth, &eval.predictions, 6).unwrap();
    assert!(
        report.accuracy > 0.9,
        "held-out accuracy {}",
        report.accuracy
    );
    assert_eq!(report.micro_avg.precision, report.accuracy);

    for (label, keys) in CLASS_KEYWORDS.iter().enumerate() {
        let p = classifier
            .predict(&format!("my {} morning coffee", keys[0]))
            .unwrap();
        assert_eq!(p.name, LABEL_NAMES[p.label as usize]);
        assert_eq!(p.label as usize, label, "{:?}", p);
    }
}

#[test]
fn saved_classifier_predicts_identically() {
    let (classifier, _, _) = trained(60, 2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    classifier.save(&path).unwrap();
    let loaded = Classifier::<f32>::load(&path).unwrap();
    assert_eq!(loaded.vocab, classifier.vocab);
    for text in [
        "so gloomy today",
        "",
        "the astonished friend",
        "zzz unseen words",
    ] {
        assert_eq!(
            loaded.predict(text).unwrap(),
            classifier.predict(text).unwrap()
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let ids: Vec<u32> = (0..12 * 100).map(|_| rng.random_range(0..64)).collect();
    let a = classifier.model.forward(&ids, 100).unwrap();
    let b = loaded.model.forward(&ids, 100).unwrap();
    let bits = |t: &sentigru::numerics::Tensor<f32>| {
        t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn corrupted_tensor_payload_is_rejected() {
    let (classifier, _, _) = trained(60, 1);
    let bytes = classifier.to_bytes();
    let sections = inspect_sections(&bytes).unwrap();
    let tensor_sections: Vec<_> = sections
        .iter()
        .enumerate()
        .filter(|(_, s)| s.tag == "TENS")
        .collect();
    assert!(!tensor_sections.is_empty());
    for &(index, s) in &tensor_sections {
        let mut corrupt = bytes.clone();
        corrupt[s.offset + s.len / 2] ^= 0x40;
        match Classifier::<f32>::from_bytes(&corrupt) {
            Err(ModelError::ChecksumMismatch { index: i, .. }) => assert_eq!(i, index),
            other => panic!(
                "section {index}: expected checksum failure, got {:?}",
                other.map(|_| ())
            ),
        }
    }
}

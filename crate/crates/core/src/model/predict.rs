use super::{Classifier, Model, ModelError};
use crate::corpus::{encode, preprocess, StopWords, Vocabulary, LABEL_NAMES};
use crate::numerics::{softmax_last_axis, Scalar};

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Prediction {
    pub label: u8,
    pub name: &'static str,
    pub probabilities: Vec<f64>,
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax<F: PartialOrd + Copy>(values: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// clean → tokenize → stopword filter → encode → infer → softmax → argmax.
pub fn predict<F: Scalar>(
    model: &Model<F>,
    vocab: &Vocabulary,
    stopwords: &StopWords,
    raw_text: &str,
) -> Result<Prediction, ModelError> {
    let tokens = preprocess(raw_text, stopwords);
    let ids = encode(&tokens, vocab, model.config().seq_len)
        .map_err(|e| ModelError::InvalidConfig(e.to_string()))?;
    let logits = model.forward(&ids, 1)?;
    let probabilities: Vec<f64> = softmax_last_axis(&logits)
        .data()
        .iter()
        .map(|p| p.to_f64_lossless())
        .collect();
    let label = argmax(&probabilities);
    Ok(Prediction {
        label: label as u8,
        name: LABEL_NAMES[label],
        probabilities,
    })
}

impl<F: Scalar> Classifier<F> {
    pub fn predict(&self, raw_text: &str) -> Result<Prediction, ModelError> {
        predict(&self.model, &self.vocab, &self.stopwords, raw_text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.1, 0.4, 0.4, 0.1]), 1);
        assert_eq!(argmax(&[2.0f32]), 0);
        assert_eq!(argmax(&[0.2, 0.2]), 0);
    }

    #[test]
    fn prediction_is_a_distribution_with_matching_name() {
        let config = ModelConfig {
            vocab_size: 10,
            embed_dim: 3,
            seq_len: 6,
            gru_units: [3, 2, 2],
            ..ModelConfig::paper()
        };
        let model = Model::<f32>::build(config, 4).unwrap();
        let toks = [vec!["feel".to_string(), "lost".to_string()]];
        let vocab = Vocabulary::build(toks.iter().map(Vec::as_slice), 10).unwrap();
        for text in ["I feel so lost!", "", "unknown words only"] {
            let p = predict(&model, &vocab, &StopWords::builtin(), text).unwrap();
            assert_eq!(p.probabilities.len(), 6);
            assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert_eq!(p.name, LABEL_NAMES[p.label as usize]);
            assert_eq!(p.label as usize, argmax(&p.probabilities));
        }
    }
}

use std::collections::HashMap;

use super::CorpusError;

pub const PAD_ID: u32 = 0;
pub const OOV_ID: u32 = 1;
pub const DEFAULT_VOCAB_SIZE: usize = 50_000;

const PAD_TOKEN: &str = "<pad>";
const OOV_TOKEN: &str = "<oov>";

/// Token to id map. Ids 0 and 1 are reserved for padding and unknown
/// tokens; corpus tokens get ids `2..len()` in descending frequency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
    max_size: usize,
}

/// A fixed-length id sequence with its class code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSequence {
    pub ids: Vec<u32>,
    pub label: u8,
}

impl Vocabulary {
    /// Keeps the `max_size − 2` most frequent tokens, ties broken
    /// lexicographically.
    pub fn build<'a, I, S>(sequences: I, max_size: usize) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        if max_size < 3 {
            return Err(CorpusError::VocabTooSmall(max_size));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for seq in sequences {
            for tok in seq {
                *counts.entry(tok.as_ref()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_size - 2);
        Ok(Self::from_ordered(
            ranked.into_iter().map(|(t, _)| t.to_owned()),
            max_size,
        ))
    }

    fn from_ordered(tokens: impl Iterator<Item = String>, max_size: usize) -> Self {
        let mut id_to_token = vec![PAD_TOKEN.to_owned(), OOV_TOKEN.to_owned()];
        id_to_token.extend(tokens);
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self {
            token_to_id,
            id_to_token,
            max_size,
        }
    }

    /// Number of ids in use, reserved ones included.
    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    /// Id of `token`, or [`OOV_ID`].
    pub fn id(&self, token: &str) -> u32 {
        self.get(token).unwrap_or(OOV_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    /// Corpus tokens in id order, reserved entries excluded.
    pub fn tokens(&self) -> impl Iterator<Item = (&str, u32)> {
        self.id_to_token
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, t)| (t.as_str(), i as u32))
    }

    /// `token<TAB>id` lines for every corpus token, in id order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (tok, id) in self.tokens() {
            out.push_str(tok);
            out.push('\t');
            out.push_str(&id.to_string());
            out.push('\n');
        }
        out
    }

    /// Inverse of [`Vocabulary::to_tsv`]. Ids must run densely from 2.
    pub fn from_tsv(text: &str, max_size: usize) -> Result<Self, CorpusError> {
        if max_size < 3 {
            return Err(CorpusError::VocabTooSmall(max_size));
        }
        let mut tokens = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let bad = |detail: String| CorpusError::MalformedVocabulary {
                line: i + 1,
                detail,
            };
            let (tok, id) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected token<TAB>id".into()))?;
            let id: usize = id
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad id {id:?}")))?;
            if id != tokens.len() + 2 {
                return Err(bad(format!("expected id {}, found {id}", tokens.len() + 2)));
            }
            if tok.is_empty() || !tok.bytes().all(|b| b.is_ascii_lowercase()) {
                return Err(bad(format!("token {tok:?} is not lowercase alphabetic")));
            }
            tokens.push(tok.to_owned());
        }
        if tokens.len() + 2 > max_size {
            return Err(CorpusError::MalformedVocabulary {
                line: tokens.len(),
                detail: format!("{} ids exceed max size {max_size}", tokens.len() + 2),
            });
        }
        let vocab = Self::from_ordered(tokens.into_iter(), max_size);
        if vocab.token_to_id.len() + 2 != vocab.len() {
            return Err(CorpusError::MalformedVocabulary {
                line: 0,
                detail: "duplicate token".into(),
            });
        }
        Ok(vocab)
    }
}

/// Maps tokens to ids, keeps the last `seq_len` of them and left-pads with
/// [`PAD_ID`] so the final real token sits at position `seq_len − 1`.
pub fn encode<S: AsRef<str>>(
    tokens: &[S],
    vocab: &Vocabulary,
    seq_len: usize,
) -> Result<Vec<u32>, CorpusError> {
    if seq_len == 0 {
        return Err(CorpusError::InvalidSeqLen);
    }
    let start = tokens.len().saturating_sub(seq_len);
    let kept = &tokens[start..];
    let mut ids = vec![PAD_ID; seq_len - kept.len()];
    ids.extend(kept.iter().map(|t| vocab.id(t.as_ref())));
    Ok(ids)
}

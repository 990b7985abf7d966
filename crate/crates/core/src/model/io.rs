//! Binary model file.
//!
//! ```text
//! magic      8 bytes   "SGRU\r\n\x1a\n"
//! version    u32 LE
//! sections   u32 LE    number of sections that follow
//! section*   tag [4] | payload length u64 LE | CRC-32 of payload u32 LE | payload
//! ```
//!
//! Sections, in order: `CONF` (key=value text), `VOCB` (u64 LE max size,
//! then `token<TAB>id` lines), `STOP` (stopwords, one per line), then one
//! `TENS` per weight tensor in stack order followed by the two batch-norm
//! moving statistics. A `TENS` payload is
//! `name length u16 | name | dtype u8 (4 or 8) | rank u8 | dims u32* | values`,
//! all little-endian.

use std::collections::HashMap;
use std::path::Path;

use super::{Model, ModelConfig, ModelError};
use crate::corpus::{StopWords, Vocabulary};
use crate::numerics::{Dtype, Scalar, Tensor};

pub const MAGIC: [u8; 8] = *b"SGRU\r\n\x1a\n";
pub const FORMAT_VERSION: u32 = 1;

/// A trained model with the preprocessing state needed to classify raw text.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier<F> {
    pub model: Model<F>,
    pub vocab: Vocabulary,
    pub stopwords: StopWords,
}

/// Location of one section inside an encoded model file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionInfo {
    pub tag: String,
    /// Byte offset of the payload.
    pub offset: usize,
    pub len: usize,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ModelError + '_ {
    move |source| ModelError::Io {
        path: path.display().to_string(),
        source,
    }
}

impl<F: Scalar> Classifier<F> {
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_bytes()).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        Self::from_bytes(&bytes)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut sections: Vec<([u8; 4], Vec<u8>)> = vec![
            (
                *b"CONF",
                config_to_text(self.model.config(), F::DTYPE).into_bytes(),
            ),
            (*b"VOCB", {
                let mut p = (self.vocab.max_size() as u64).to_le_bytes().to_vec();
                p.extend_from_slice(self.vocab.to_tsv().as_bytes());
                p
            }),
            (
                *b"STOP",
                self.stopwords.to_sorted_vec().join("\n").into_bytes(),
            ),
        ];
        for (name, tensor) in self.model.state_tensors() {
            sections.push((*b"TENS", encode_tensor(&name, tensor)));
        }

        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
        for (tag, payload) in sections {
            out.extend_from_slice(&tag);
            out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
            out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
            out.extend_from_slice(&payload);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let sections = read_sections(bytes)?;
        let find = |tag: &str, what: &str| {
            sections
                .iter()
                .find(|(t, _)| t == tag)
                .map(|(_, p)| *p)
                .ok_or_else(|| ModelError::Incomplete(what.to_string()))
        };

        let conf_text = std::str::from_utf8(find("CONF", "config section")?)
            .map_err(|_| ModelError::Malformed("config is not UTF-8".into()))?;
        let (config, dtype) = config_from_text(conf_text)?;
        if dtype != F::DTYPE {
            return Err(ModelError::DtypeMismatch {
                file: dtype.name(),
                requested: F::DTYPE.name(),
            });
        }

        let vocab_payload = find("VOCB", "vocabulary section")?;
        if vocab_payload.len() < 8 {
            return Err(ModelError::Malformed("vocabulary section too short".into()));
        }
        let max_size = u64::from_le_bytes(vocab_payload[..8].try_into().expect("8 bytes")) as usize;
        let vocab_text = std::str::from_utf8(&vocab_payload[8..])
            .map_err(|_| ModelError::Malformed("vocabulary is not UTF-8".into()))?;
        let vocab = Vocabulary::from_tsv(vocab_text, max_size)
            .map_err(|e| ModelError::Malformed(e.to_string()))?;
        if vocab.len() > config.vocab_size {
            return Err(ModelError::Malformed(format!(
                "vocabulary of {} exceeds embedding rows {}",
                vocab.len(),
                config.vocab_size
            )));
        }

        let stop_text = std::str::from_utf8(find("STOP", "stopword section")?)
            .map_err(|_| ModelError::Malformed("stopwords are not UTF-8".into()))?;
        let stopwords = StopWords::parse(stop_text);

        let mut tensors: HashMap<String, Tensor<F>> = HashMap::new();
        for (tag, payload) in &sections {
            if tag == "TENS" {
                let (name, t) = decode_tensor::<F>(payload)?;
                tensors.insert(name, t);
            }
        }

        // Seed is irrelevant: every tensor is overwritten below.
        let mut model = Model::<F>::build(config, 0)?;
        for (name, slot) in model.state_tensors_mut() {
            let t = tensors
                .remove(&name)
                .ok_or_else(|| ModelError::Incomplete(format!("tensor {name}")))?;
            if t.shape() != slot.shape() {
                return Err(ModelError::Malformed(format!(
                    "tensor {name} has shape {:?}, architecture expects {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t;
        }
        if let Some(extra) = tensors.keys().next() {
            return Err(ModelError::Malformed(format!("unexpected tensor {extra}")));
        }
        Ok(Self {
            model,
            vocab,
            stopwords,
        })
    }
}

/// Parameter precision recorded in a model file, without decoding weights.
pub fn read_precision(path: &Path) -> Result<Dtype, ModelError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let sections = read_sections(&bytes)?;
    let conf = sections
        .iter()
        .find(|(t, _)| t == "CONF")
        .ok_or_else(|| ModelError::Incomplete("config section".into()))?;
    let text = std::str::from_utf8(conf.1)
        .map_err(|_| ModelError::Malformed("config is not UTF-8".into()))?;
    Ok(config_from_text(text)?.1)
}

/// Section layout of an encoded file, checksums not verified.
pub fn inspect_sections(bytes: &[u8]) -> Result<Vec<SectionInfo>, ModelError> {
    Ok(walk(bytes)?
        .into_iter()
        .map(|(tag, offset, len, _)| SectionInfo { tag, offset, len })
        .collect())
}

fn walk(bytes: &[u8]) -> Result<Vec<(String, usize, usize, u32)>, ModelError> {
    if bytes.len() < MAGIC.len() {
        return Err(if MAGIC.starts_with(bytes) {
            ModelError::Truncated
        } else {
            ModelError::BadMagic
        });
    }
    if bytes[..8] != MAGIC {
        return Err(ModelError::BadMagic);
    }
    let mut cur = Cursor { bytes, pos: 8 };
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(ModelError::UnsupportedVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let count = cur.u32()? as usize;
    let mut out = Vec::new();
    for _ in 0..count {
        let tag = cur.take(4)?;
        let tag = String::from_utf8_lossy(tag).into_owned();
        let len = usize::try_from(cur.u64()?).map_err(|_| ModelError::Truncated)?;
        let crc = cur.u32()?;
        let offset = cur.pos;
        cur.take(len)?;
        out.push((tag, offset, len, crc));
    }
    if cur.pos != bytes.len() {
        return Err(ModelError::Malformed(format!(
            "{} trailing bytes after last section",
            bytes.len() - cur.pos
        )));
    }
    Ok(out)
}

fn read_sections(bytes: &[u8]) -> Result<Vec<(String, &[u8])>, ModelError> {
    walk(bytes)?
        .into_iter()
        .enumerate()
        .map(|(index, (tag, offset, len, crc))| {
            let payload = &bytes[offset..offset + len];
            if crc32fast::hash(payload) != crc {
                return Err(ModelError::ChecksumMismatch { index, tag });
            }
            Ok((tag, payload))
        })
        .collect()
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).ok_or(ModelError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(ModelError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ModelError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ModelError> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

fn encode_tensor<F: Scalar>(name: &str, t: &Tensor<F>) -> Vec<u8> {
    let mut p = Vec::with_capacity(name.len() + 16 + t.len() * F::DTYPE.byte_width());
    p.extend_from_slice(&(name.len() as u16).to_le_bytes());
    p.extend_from_slice(name.as_bytes());
    p.push(F::DTYPE.code());
    p.push(t.shape().len() as u8);
    for &d in t.shape() {
        p.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        v.write_le(&mut p);
    }
    p
}

fn decode_tensor<F: Scalar>(payload: &[u8]) -> Result<(String, Tensor<F>), ModelError> {
    let malformed = |m: &str| ModelError::Malformed(format!("tensor block: {m}"));
    let mut cur = Cursor {
        bytes: payload,
        pos: 0,
    };
    let name_len = cur.u16().map_err(|_| malformed("short header"))? as usize;
    let name = std::str::from_utf8(cur.take(name_len).map_err(|_| malformed("short name"))?)
        .map_err(|_| malformed("name is not UTF-8"))?
        .to_string();
    let dtype = Dtype::from_code(cur.u8().map_err(|_| malformed("short header"))?)
        .ok_or_else(|| malformed("unknown dtype"))?;
    if dtype != F::DTYPE {
        return Err(ModelError::DtypeMismatch {
            file: dtype.name(),
            requested: F::DTYPE.name(),
        });
    }
    let rank = cur.u8().map_err(|_| malformed("short header"))? as usize;
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(cur.u32().map_err(|_| malformed("short shape"))? as usize);
    }
    let width = dtype.byte_width();
    let count: usize = shape.iter().product();
    let raw = &payload[cur.pos..];
    if raw.len() != count * width {
        return Err(malformed(&format!(
            "{name}: {} value bytes for shape {shape:?}",
            raw.len()
        )));
    }
    let data = raw.chunks_exact(width).map(F::read_le).collect();
    let t = Tensor::from_vec(&shape, data).map_err(|e| malformed(&e.to_string()))?;
    Ok((name, t))
}

fn config_to_text(c: &ModelConfig, dtype: Dtype) -> String {
    format!(
        "precision={}\nvocab_size={}\nembed_dim={}\nseq_len={}\ngru_units={},{},{}\ndropout_rate={}\nnum_classes={}\nbatchnorm_momentum={}\nbatchnorm_epsilon={}\n",
        dtype.name(),
        c.vocab_size,
        c.embed_dim,
        c.seq_len,
        c.gru_units[0],
        c.gru_units[1],
        c.gru_units[2],
        c.dropout_rate,
        c.num_classes,
        c.batchnorm_momentum,
        c.batchnorm_epsilon,
    )
}

fn config_from_text(text: &str) -> Result<(ModelConfig, Dtype), ModelError> {
    let kv: HashMap<&str, &str> = text.lines().filter_map(|l| l.split_once('=')).collect();
    let get = |k: &str| {
        kv.get(k)
            .copied()
            .ok_or_else(|| ModelError::Malformed(format!("config lacks {k}")))
    };
    fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T, ModelError> {
        v.trim()
            .parse()
            .map_err(|_| ModelError::Malformed(format!("config {k}={v:?}")))
    }
    let dtype = match get("precision")? {
        "f32" => Dtype::F32,
        "f64" => Dtype::F64,
        other => return Err(ModelError::Malformed(format!("precision {other:?}"))),
    };
    let units: Vec<usize> = get("gru_units")?
        .split(',')
        .map(|u| num("gru_units", u))
        .collect::<Result<_, _>>()?;
    let gru_units: [usize; 3] = units
        .try_into()
        .map_err(|_| ModelError::Malformed("gru_units needs 3 entries".into()))?;
    let config = ModelConfig {
        vocab_size: num("vocab_size", get("vocab_size")?)?,
        embed_dim: num("embed_dim", get("embed_dim")?)?,
        seq_len: num("seq_len", get("seq_len")?)?,
        gru_units,
        dropout_rate: num("dropout_rate", get("dropout_rate")?)?,
        num_classes: num("num_classes", get("num_classes")?)?,
        batchnorm_momentum: num("batchnorm_momentum", get("batchnorm_momentum")?)?,
        batchnorm_epsilon: num("batchnorm_epsilon", get("batchnorm_epsilon")?)?,
    };
    config.validate()?;
    Ok((config, dtype))
}

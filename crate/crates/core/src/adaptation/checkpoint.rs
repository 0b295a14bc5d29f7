//! Binary checkpoint format:
//!
//! ```text
//! "MTHD" | version: u8 (=1) | header_len: u32 LE | header: UTF-8 JSON
//!        | parameter values: f64 LE, concatenated in manifest order
//! ```
//!
//! The header carries the model configuration, both vocabularies and the
//! ordered `(id, shape)` parameter manifest.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ParamSet, Tensor};
use crate::seq2seq::{ModelConfig, ModelParams};
use crate::textdata::Vocabulary;

pub const MAGIC: &[u8; 4] = b"MTHD";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    params: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    shape: Vec<usize>,
}

/// A model with the vocabularies it was trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: ModelParams,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
}

impl Checkpoint {
    pub fn new(model: ModelParams, src_vocab: Vocabulary, tgt_vocab: Vocabulary) -> Result<Self> {
        let c = model.config();
        if src_vocab.len() != c.vocab_size_src || tgt_vocab.len() != c.vocab_size_tgt {
            return Err(Error::Config(format!(
                "vocabulary sizes {}/{} do not match model {}/{}",
                src_vocab.len(),
                tgt_vocab.len(),
                c.vocab_size_src,
                c.vocab_size_tgt
            )));
        }
        if src_vocab.mode() != c.mode || tgt_vocab.mode() != c.mode {
            return Err(Error::Config(format!("vocabulary mode does not match model mode {}", c.mode)));
        }
        Ok(Checkpoint {
            model,
            src_vocab,
            tgt_vocab,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            config: self.model.config().clone(),
            src_vocab: self.src_vocab.clone(),
            tgt_vocab: self.tgt_vocab.clone(),
            params: self
                .model
                .params()
                .iter()
                .map(|p| ManifestEntry {
                    id: p.id.clone(),
                    shape: p.value.shape().to_vec(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let n_values: usize = self.model.params().iter().map(|p| p.value.len()).sum();
        let mut out = Vec::with_capacity(9 + json.len() + 8 * n_values);
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for p in self.model.params().iter() {
            for v in p.value.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 9 || &bytes[..4] != MAGIC {
            return Err(Error::Format("missing MTHD magic bytes".into()));
        }
        if bytes[4] != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: bytes[4],
                expected: FORMAT_VERSION,
            });
        }
        let header_len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let body = &bytes[9..];
        if body.len() < header_len {
            return Err(Error::Format("truncated header".into()));
        }
        let header: Header =
            serde_json::from_slice(&body[..header_len]).map_err(|e| Error::Format(format!("bad header: {e}")))?;
        let mut data = &body[header_len..];
        let mut params = ParamSet::new();
        for entry in &header.params {
            let n: usize = entry.shape.iter().product();
            if data.len() < 8 * n {
                return Err(Error::Format(format!("truncated values for {}", entry.id)));
            }
            let values = data[..8 * n]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            data = &data[8 * n..];
            params.register(&entry.id, Tensor::new(entry.shape.clone(), values)?)?;
        }
        if !data.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes", data.len())));
        }
        let model = ModelParams::from_parts(header.config, params)?;
        Checkpoint::new(model, header.src_vocab, header.tgt_vocab)
    }

    /// Writes to a sibling temporary file, then renames over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes();
        let file_name = path
            .file_name()
            .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
        let tmp = path.with_file_name(format!(".{}.tmp-{}", file_name.to_string_lossy(), std::process::id()));
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, path)
        };
        write().map_err(|e| {
            let _ = fs::remove_file(&tmp);
            Error::io(path, e)
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// FNV-1a over the serialized checkpoint.
    pub fn checksum(&self) -> u64 {
        fnv1a64(&self.to_bytes())
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    checkpoint.save(path)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path)
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

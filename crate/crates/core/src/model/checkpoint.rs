//! Single-file model container.
//!
//! Layout: the magic `MTLCQA1`, a little-endian `u32` header length, a JSON
//! header, then every tensor in canonical order as
//! `u32 name length, name bytes, u32 rank, u64 dims..., f32 values (LE)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::EncoderConfig;
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::tokenizer::Vocabulary;

pub const MAGIC: &[u8; 7] = b"MTLCQA1";
pub const FORMAT_VERSION: u32 = 1;

/// Trained parameters plus what is needed to run them on new text.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub vocab: Vocabulary,
    /// Optimizer steps taken when the checkpoint was written.
    pub step: u64,
    pub max_answer_len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    encoder: EncoderConfig,
    vocab: Vec<String>,
    step: u64,
    max_answer_len: usize,
}

impl Checkpoint {
    pub fn new(params: ModelParams, vocab: Vocabulary, step: u64, max_answer_len: usize) -> Result<Self> {
        if params.config.vocab_size != vocab.len() {
            return Err(Error::Checkpoint(format!(
                "model expects {} tokens but vocabulary has {}",
                params.config.vocab_size,
                vocab.len()
            )));
        }
        Ok(Checkpoint {
            params,
            vocab,
            step,
            max_answer_len,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&Header {
            format_version: FORMAT_VERSION,
            encoder: self.params.config.clone(),
            vocab: self.vocab.tokens().to_vec(),
            step: self.step,
            max_answer_len: self.max_answer_len,
        })?;
        let mut out = Vec::with_capacity(header.len() + 4 * self.params.num_parameters() + 64);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for t in self.params.tensors() {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in t.data {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Checkpoint("bad magic; not a model checkpoint".into()));
        }
        let header_len = r.u32()? as usize;
        let header: Header = serde_json::from_slice(r.take(header_len)?)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {}",
                header.format_version
            )));
        }
        header.encoder.validate()?;
        let vocab = Vocabulary::from_tokens(header.vocab)?;
        let mut params = ModelParams::zeros(&header.encoder);
        for t in params.tensors_mut() {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
            if name != t.name {
                return Err(Error::Checkpoint(format!(
                    "expected tensor {}, found {name}",
                    t.name
                )));
            }
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            if shape != t.shape {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {shape:?}, config implies {:?}",
                    t.shape
                )));
            }
            for x in t.data.iter_mut() {
                let b = r.take(4)?;
                *x = f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64;
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
        }
        Checkpoint::new(params, vocab, header.step, header.max_answer_len)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("file truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut a = [0u8; 8];
        a.copy_from_slice(self.take(8)?);
        Ok(u64::from_le_bytes(a))
    }
}

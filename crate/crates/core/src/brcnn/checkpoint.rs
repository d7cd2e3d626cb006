//! Binary checkpoint container.
//!
//! ```text
//! magic      4 bytes   "SRBR"
//! version    u32 LE    currently 1
//! schema_len u64 LE
//! schema     UTF-8 JSON {k, relations, word_vocab, rel_vocab, dims, alpha, strategy}
//! count      u32 LE    number of tensors
//! per tensor:
//!   name_len u32 LE, name UTF-8
//!   ndim     u32 LE, dims u64 LE × ndim
//!   data     f64 LE × product(dims), row-major
//! ```
//!
//! Tensors appear in the canonical parameter order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::Model;
use super::params::{expected_shapes, ModelDims, ModelParams, PARAM_NAMES};
use super::schema::{LabelSchema, Vocab};
use crate::error::{Error, Result};
use crate::neuralcore::Tensor;
use crate::structreg::CutStrategy;

pub const MAGIC: &[u8; 4] = b"SRBR";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSchema {
    pub k: usize,
    pub relations: Vec<String>,
    pub word_vocab: Vec<String>,
    pub rel_vocab: Vec<String>,
    pub dims: ModelDims,
    pub alpha: f64,
    /// `none` or the strategy's textual form.
    pub strategy: String,
}

pub fn to_bytes(model: &Model) -> Result<Vec<u8>> {
    let schema = CheckpointSchema {
        k: model.schema.k(),
        relations: model.schema.relations().to_vec(),
        word_vocab: model.word_vocab.items().to_vec(),
        rel_vocab: model.rel_vocab.items().to_vec(),
        dims: model.dims,
        alpha: model.alpha,
        strategy: model
            .strategy
            .map_or_else(|| "none".to_string(), |s| s.to_string()),
    };
    let json = serde_json::to_vec(&schema)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    let named = model.params.named();
    out.extend_from_slice(&(named.len() as u32).to_le_bytes());
    for (name, t) in named {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self, limit: usize) -> Result<usize> {
        let n = self.u64()? as usize;
        if n > limit {
            return Err(Error::Checkpoint(format!("length {n} exceeds remaining data")));
        }
        Ok(n)
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<Model> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let json_len = r.len(buf.len())?;
    let schema: CheckpointSchema = serde_json::from_slice(r.take(json_len)?)
        .map_err(|e| Error::Checkpoint(format!("schema block: {e}")))?;
    if schema.k != schema.relations.len() {
        return Err(Error::Schema(format!(
            "K = {} but {} relation names",
            schema.k,
            schema.relations.len()
        )));
    }
    let label_schema = LabelSchema::new(schema.relations.clone())?;
    let word_vocab = Vocab::from_items(schema.word_vocab.clone())?;
    let rel_vocab = Vocab::from_items(schema.rel_vocab.clone())?;
    let strategy = match schema.strategy.as_str() {
        "none" => None,
        s => Some(s.parse::<CutStrategy>()?),
    };

    let shapes = expected_shapes(&schema.dims, word_vocab.len(), rel_vocab.len(), schema.k);
    let count = r.u32()? as usize;
    if count != PARAM_NAMES.len() {
        return Err(Error::Schema(format!(
            "expected {} tensors, found {count}",
            PARAM_NAMES.len()
        )));
    }
    let mut tensors = Vec::with_capacity(count);
    for (expected_name, expected_shape) in PARAM_NAMES.iter().zip(&shapes) {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        if name != *expected_name {
            return Err(Error::Schema(format!(
                "expected tensor {expected_name:?}, found {name:?}"
            )));
        }
        let ndim = r.u32()? as usize;
        let shape: Vec<usize> = (0..ndim)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<Result<_>>()?;
        if &shape != expected_shape {
            return Err(Error::Schema(format!(
                "tensor {name} has shape {shape:?}, schema implies {expected_shape:?}"
            )));
        }
        let n: usize = shape.iter().product();
        let bytes = r.take(n * 8)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        tensors.push(Tensor::new(shape, data)?);
    }
    if r.pos != buf.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            buf.len() - r.pos
        )));
    }
    Ok(Model {
        schema: label_schema,
        word_vocab,
        rel_vocab,
        dims: schema.dims,
        alpha: schema.alpha,
        strategy,
        params: ModelParams::from_tensors(tensors)?,
    })
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model)?).map_err(|e| Error::from(e).in_file(path))
}

pub fn load(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| Error::from(e).in_file(path))?;
    from_bytes(&bytes).map_err(|e| e.in_file(path))
}

//! Named-tensor container and the `QVCW` v1 file format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "QVCW" | u32 version = 1 | u64 header_len | header_len bytes of JSON
//!        | payload (raw f32 LE) | u32 CRC32(payload)
//! ```
//!
//! The JSON header is `{"config": ModelConfig, "tensors": {name: {"dtype":
//! "f32", "shape": [...], "offset": bytes, "len": bytes}}}`. Tensors are
//! packed contiguously in name order.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::conv::{Conv1d, ConvParams, ConvTranspose1d, TransposeParams};
use crate::config::ModelConfig;
use crate::error::{Error, LoadError, Result};

pub const QVCW_MAGIC: &[u8; 4] = b"QVCW";
pub const QVCW_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Param {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub config: ModelConfig,
    tensors: BTreeMap<String, Param>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    tensors: BTreeMap<String, TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    dtype: String,
    shape: Vec<usize>,
    offset: u64,
    len: u64,
}

pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], LoadError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(LoadError::Truncated {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32, LoadError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, LoadError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes, pos: 0 }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

pub(crate) fn read_magic(cur: &mut Cursor<'_>, magic: &[u8; 4]) -> Result<(), LoadError> {
    let available = cur.bytes.len().min(4);
    let found = &cur.bytes[..available];
    if found != magic {
        return Err(LoadError::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: found.to_vec(),
        });
    }
    cur.take(4)?;
    Ok(())
}

pub(crate) fn f32_from_le(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

impl ModelWeights {
    pub fn new(config: ModelConfig) -> Self {
        ModelWeights {
            config,
            tensors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Result<()> {
        let name = name.into();
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::Shape(format!(
                "tensor {name:?}: shape {shape:?} needs {numel} values, got {}",
                data.len()
            )));
        }
        self.tensors.insert(name, Param { shape, data });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.tensors.get_mut(name)
    }

    pub fn remove(&mut self, name: &str) -> Option<Param> {
        self.tensors.remove(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Param)> {
        self.tensors.iter()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.values().map(Param::numel).sum()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut entries = BTreeMap::new();
        let mut offset = 0u64;
        for (name, p) in &self.tensors {
            let len = (p.data.len() * 4) as u64;
            entries.insert(
                name.clone(),
                TensorEntry {
                    dtype: "f32".into(),
                    shape: p.shape.clone(),
                    offset,
                    len,
                },
            );
            offset += len;
        }
        let header = Header {
            config: self.config.clone(),
            tensors: entries,
        };
        let json = serde_json::to_vec(&header)
            .map_err(|e| Error::Config(format!("cannot serialize header: {e}")))?;

        let mut payload = Vec::with_capacity(offset as usize);
        for p in self.tensors.values() {
            for v in &p.data {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut out = Vec::with_capacity(16 + json.len() + payload.len() + 4);
        out.extend_from_slice(QVCW_MAGIC);
        out.extend_from_slice(&QVCW_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&payload);
        out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
        Ok(out)
    }

    /// Decodes a container. Structural checks only: model-level validation
    /// (hop identity, tensor manifest) happens when a network is built.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor::new(bytes);
        read_magic(&mut cur, QVCW_MAGIC)?;
        let version = cur.u32()?;
        if version != QVCW_VERSION {
            return Err(LoadError::UnsupportedVersion {
                format: "QVCW",
                version,
            }
            .into());
        }
        let header_len = cur.u64()?;
        let header_len = usize::try_from(header_len)
            .ok()
            .filter(|&n| n <= cur.remaining())
            .ok_or(LoadError::Truncated {
                offset: cur.pos,
                needed: usize::try_from(header_len).unwrap_or(usize::MAX),
                available: cur.remaining(),
            })?;
        let header: Header = serde_json::from_slice(cur.take(header_len)?)
            .map_err(|e| LoadError::Header(e.to_string()))?;

        let rest = cur.remaining();
        if rest < 4 {
            return Err(LoadError::Truncated {
                offset: cur.pos,
                needed: 4,
                available: rest,
            }
            .into());
        }
        let payload = cur.take(rest - 4)?;
        let stored = cur.u32()?;

        let mut expected_total = 0u64;
        for (name, e) in &header.tensors {
            let bad = |reason: String| LoadError::TensorTable {
                name: name.clone(),
                reason,
            };
            if e.dtype != "f32" {
                return Err(bad(format!("unsupported dtype {:?}", e.dtype)).into());
            }
            let numel = e
                .shape
                .iter()
                .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
                .ok_or_else(|| bad("shape overflows".into()))?;
            if numel.checked_mul(4) != Some(e.len) {
                return Err(bad(format!("shape {:?} does not match byte length {}", e.shape, e.len)).into());
            }
            let end = e
                .offset
                .checked_add(e.len)
                .ok_or_else(|| bad("offset overflows".into()))?;
            if end > payload.len() as u64 {
                return Err(LoadError::PayloadSize {
                    expected: end,
                    found: payload.len() as u64,
                }
                .into());
            }
            expected_total += e.len;
        }
        if expected_total != payload.len() as u64 {
            return Err(LoadError::PayloadSize {
                expected: expected_total,
                found: payload.len() as u64,
            }
            .into());
        }
        let computed = crc32fast::hash(payload);
        if computed != stored {
            return Err(LoadError::Checksum { stored, computed }.into());
        }

        let mut tensors = BTreeMap::new();
        for (name, e) in header.tensors {
            let start = e.offset as usize;
            let data = f32_from_le(&payload[start..start + e.len as usize]);
            tensors.insert(name, Param { shape: e.shape, data });
        }
        Ok(ModelWeights {
            config: header.config,
            tensors,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// How a freshly initialized parameter is filled.
#[derive(Debug, Clone)]
pub enum Init {
    /// Uniform on `[-bound, bound]`.
    Uniform(f32),
    Zeros,
    Values(Vec<f32>),
}

impl Init {
    pub fn fan_in(fan_in: usize) -> Self {
        Init::Uniform(1.0 / (fan_in.max(1) as f32).sqrt())
    }
}

/// Supplies named parameters to network constructors.
pub trait ParamSource {
    fn param(&mut self, name: &str, shape: &[usize], init: Init) -> Result<Vec<f32>>;
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Loads `{prefix}.weight` `(out, in, k)` and, optionally, `{prefix}.bias`.
pub fn load_conv1d(
    src: &mut dyn ParamSource,
    prefix: &str,
    shape: (usize, usize, usize),
    bias: bool,
    params: ConvParams,
) -> Result<Conv1d> {
    let (o, i, k) = shape;
    let fan_in = i * k;
    let weight = src.param(&join(prefix, "weight"), &[o, i, k], Init::fan_in(fan_in))?;
    let bias = if bias {
        Some(src.param(&join(prefix, "bias"), &[o], Init::fan_in(fan_in))?)
    } else {
        None
    };
    Ok(Conv1d {
        weight,
        bias,
        shape,
        params,
    })
}

/// Loads a transposed convolution with `(in, out, k)` weight and bias.
pub fn load_conv_transpose1d(
    src: &mut dyn ParamSource,
    prefix: &str,
    shape: (usize, usize, usize),
    params: TransposeParams,
) -> Result<ConvTranspose1d> {
    let stride = params.stride;
    let (i, o, k) = shape;
    let fan_in = i * k / stride.max(1);
    let weight = src.param(&join(prefix, "weight"), &[i, o, k], Init::fan_in(fan_in))?;
    let bias = Some(src.param(&join(prefix, "bias"), &[o], Init::fan_in(fan_in))?);
    Ok(ConvTranspose1d {
        weight,
        bias,
        shape,
        params,
    })
}

/// Reads parameters from a container, checking exact shapes and recording
/// which names were consumed.
pub struct StrictReader<'a> {
    weights: &'a ModelWeights,
    used: RefCell<BTreeSet<String>>,
}

impl<'a> StrictReader<'a> {
    pub fn new(weights: &'a ModelWeights) -> Self {
        StrictReader {
            weights,
            used: RefCell::new(BTreeSet::new()),
        }
    }

    /// Fails if any tensor in the container was never read.
    pub fn finish(self) -> Result<()> {
        let used = self.used.into_inner();
        let unused: Vec<String> = self
            .weights
            .tensors
            .keys()
            .filter(|k| !used.contains(*k))
            .cloned()
            .collect();
        if unused.is_empty() {
            Ok(())
        } else {
            Err(LoadError::UnusedTensors(unused).into())
        }
    }
}

impl ParamSource for StrictReader<'_> {
    fn param(&mut self, name: &str, shape: &[usize], _init: Init) -> Result<Vec<f32>> {
        let p = self
            .weights
            .get(name)
            .ok_or_else(|| LoadError::MissingTensor(name.to_string()))?;
        if p.shape != shape {
            return Err(LoadError::UnexpectedShape {
                name: name.to_string(),
                expected: shape.to_vec(),
                found: p.shape.clone(),
            }
            .into());
        }
        self.used.borrow_mut().insert(name.to_string());
        Ok(p.data.clone())
    }
}

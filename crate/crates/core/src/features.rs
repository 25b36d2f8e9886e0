//! `QVCF` v1 matrix files: content features exported by the companion tool,
//! and any other frame-major f32 matrix the CLI reads.
//!
//! ```text
//! "QVCF" | u32 version = 1 | u32 rows (T) | u32 dim | rows·dim f32 LE | u32 CRC32(payload)
//! ```

use std::path::Path;

use crate::error::{Error, LoadError, Result};
use crate::nn::weights::{f32_from_le, read_magic, Cursor};

pub const QVCF_MAGIC: &[u8; 4] = b"QVCF";
pub const QVCF_VERSION: u32 = 1;
pub const CONTENT_DIM: usize = 256;
/// Content frames per second (one frame per 320 samples at 16 kHz).
pub const FRAME_RATE: f64 = 50.0;

/// Frame-major `rows × dim` f32 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if rows.checked_mul(dim) != Some(data.len()) {
            return Err(Error::Shape(format!(
                "{} values do not form a {rows} x {dim} matrix",
                data.len()
            )));
        }
        Ok(FeatureMatrix { rows, dim, data })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        let mut out = Vec::with_capacity(16 + payload.len() + 4);
        out.extend_from_slice(QVCF_MAGIC);
        out.extend_from_slice(&QVCF_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&payload);
        out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor::new(bytes);
        read_magic(&mut cur, QVCF_MAGIC)?;
        let version = cur.u32()?;
        if version != QVCF_VERSION {
            return Err(LoadError::UnsupportedVersion {
                format: "QVCF",
                version,
            }
            .into());
        }
        let rows = cur.u32()? as u64;
        let dim = cur.u32()? as u64;
        let found = cur.remaining().saturating_sub(4) as u64;
        let expected = rows.checked_mul(dim).and_then(|n| n.checked_mul(4)).unwrap_or(u64::MAX);
        if cur.remaining() < 4 || expected != found {
            return Err(LoadError::PayloadSize { expected, found }.into());
        }
        let payload = cur.take(expected as usize)?;
        let stored = cur.u32()?;
        let computed = crc32fast::hash(payload);
        if stored != computed {
            return Err(LoadError::Checksum { stored, computed }.into());
        }
        Ok(FeatureMatrix {
            rows: rows as usize,
            dim: dim as usize,
            data: f32_from_le(payload),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// `T × 256` speaker-independent content representation at 50 frames/s.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentFeatures(FeatureMatrix);

impl ContentFeatures {
    pub fn new(frames: usize, data: Vec<f32>) -> Result<Self> {
        Self::try_from(FeatureMatrix::new(frames, CONTENT_DIM, data)?)
    }

    pub fn frames(&self) -> usize {
        self.0.rows
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.0.data
    }

    pub fn matrix(&self) -> &FeatureMatrix {
        &self.0
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::try_from(FeatureMatrix::load(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.0.save(path)
    }
}

impl TryFrom<FeatureMatrix> for ContentFeatures {
    type Error = Error;

    fn try_from(m: FeatureMatrix) -> Result<Self> {
        if m.dim != CONTENT_DIM {
            return Err(Error::Shape(format!(
                "content features must have {CONTENT_DIM} dimensions, got {}",
                m.dim
            )));
        }
        if m.rows == 0 {
            return Err(Error::Shape("content features have no frames".into()));
        }
        if let Some(i) = m.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite content feature at index {i}")));
        }
        Ok(ContentFeatures(m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let m = FeatureMatrix::new(3, 2, vec![1.0, -2.0, 3.5, 0.0, f32::MAX, 1e-30]).unwrap();
        assert_eq!(FeatureMatrix::from_bytes(&m.to_bytes()).unwrap(), m);
    }

    #[test]
    fn content_dim_is_enforced() {
        let m = FeatureMatrix::new(2, 255, vec![0.0; 510]).unwrap();
        assert!(matches!(ContentFeatures::try_from(m), Err(Error::Shape(_))));
        let m = FeatureMatrix::new(0, 256, vec![]).unwrap();
        assert!(ContentFeatures::try_from(m).is_err());
        assert!(ContentFeatures::new(1, vec![0.5; 256]).is_ok());
    }

    #[test]
    fn huge_header_does_not_allocate() {
        let mut bytes = FeatureMatrix::new(1, 1, vec![1.0]).unwrap().to_bytes();
        bytes[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        bytes[12..16].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(
            FeatureMatrix::from_bytes(&bytes),
            Err(Error::Load(LoadError::PayloadSize { .. }))
        ));
    }
}

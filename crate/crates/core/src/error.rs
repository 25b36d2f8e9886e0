use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("config error: {0}")]
    Config(String),

    /// Overlap-add normalization would divide by (almost) zero.
    #[error("numerical degeneracy: window envelope {value:e} at sample {index} is below {threshold:e}")]
    NumericalDegeneracy {
        index: usize,
        value: f64,
        threshold: f64,
    },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error(transparent)]
    Load(#[from] LoadError),

    #[error(transparent)]
    Wav(#[from] WavError),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failures while decoding a QVCW weight container or a QVCF matrix file.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: Vec<u8> },

    #[error("unsupported {format} version {version}")]
    UnsupportedVersion { format: &'static str, version: u32 },

    #[error("truncated input: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },

    #[error("malformed header: {0}")]
    Header(String),

    #[error("payload size mismatch: header implies {expected} bytes, found {found}")]
    PayloadSize { expected: u64, found: u64 },

    #[error("tensor {name:?}: {reason}")]
    TensorTable { name: String, reason: String },

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("missing tensor {0:?}")]
    MissingTensor(String),

    #[error("tensor {name:?} has shape {found:?}, expected {expected:?}")]
    UnexpectedShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("{} tensor(s) never read by the model: {}", .0.len(), .0.join(", "))]
    UnusedTensors(Vec<String>),
}

#[derive(Debug, Error)]
pub enum WavError {
    #[error("unsupported sample rate {0} Hz (expected 16000)")]
    UnsupportedRate(u32),

    #[error("unsupported channel count {0} (expected mono)")]
    UnsupportedChannels(u16),

    #[error("unsupported codec: {0} (expected 16-bit integer PCM)")]
    UnsupportedCodec(String),

    #[error("malformed wav: {0}")]
    Malformed(String),
}

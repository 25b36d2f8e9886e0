//! Inference engine for a VITS-style voice-conversion model whose waveform
//! decoder is a multi-stream iSTFT generator.
//!
//! The crate is organized bottom-up:
//!
//! * [`dsp`]: STFT/iSTFT, spectrogram extraction, spectrogram-resize
//!   augmentation and the multi-band primitives.
//! * [`nn`]: tensor layers and the `QVCW` weight container.
//! * [`encoders`], [`flow`], [`decoder`]: the network.
//! * [`losses`]: forward evaluation of the training objectives.
//! * [`pipeline`] and [`bench`]: conversion and throughput measurement.

pub mod audio;
pub mod bench;
pub mod config;
pub mod decoder;
pub mod dsp;
pub mod encoders;
pub mod error;
pub mod features;
pub mod flow;
pub mod init;
pub mod losses;
pub mod nn;
pub mod par;
pub mod pipeline;

pub use config::{AnalysisConfig, DecoderConfig, ModelConfig};
pub use dsp::Waveform;
pub use error::{Error, LoadError, Result, WavError};
pub use nn::{ModelWeights, Tensor3};
pub use pipeline::{ConversionRequest, QuickVc};

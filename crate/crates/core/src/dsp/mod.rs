//! Signal processing: windowed STFT/iSTFT, spectrogram extraction,
//! spectrogram-resize augmentation and multi-band primitives.
//!
//! Conventions (see `docs/dsp.md`): periodic Hann windows, reflect padding of
//! `n_fft/2` on both sides before framing, squared-window normalized
//! overlap-add on the inverse.

pub mod augment;
pub mod fft;
pub mod mel;
pub mod multiband;
pub mod stft;

pub use augment::sr_resize;
pub use mel::{linear_magnitude, mel_filterbank, mel_spectrogram, MelParams, MelSpectrogram};
pub use multiband::{fir_filter, zero_insert_upsample};
pub use stft::{hann_window, istft, stft, ComplexSpectrogram, StftConfig};

use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 16_000;

/// Mono audio at 16 kHz.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f32>,
}

impl Waveform {
    pub fn new(samples: Vec<f32>) -> Result<Self> {
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite sample at index {i}")));
        }
        Ok(Waveform { samples })
    }

    pub fn from_f64(samples: &[f64]) -> Result<Self> {
        Self::new(samples.iter().map(|&v| v as f32).collect())
    }

    pub fn sample_rate(&self) -> u32 {
        SAMPLE_RATE
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / SAMPLE_RATE as f64
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }
}

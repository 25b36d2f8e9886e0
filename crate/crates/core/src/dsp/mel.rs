use serde::{Deserialize, Serialize};

use super::stft::{stft, StftConfig};
use super::Waveform;
use crate::error::{Error, Result};

pub const N_MELS: usize = 80;
/// Clamp applied before the logarithm.
pub const LOG_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelParams {
    pub sample_rate: u32,
    pub stft: StftConfig,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
}

impl Default for MelParams {
    fn default() -> Self {
        MelParams {
            sample_rate: super::SAMPLE_RATE,
            stft: StftConfig::ANALYSIS,
            n_mels: N_MELS,
            fmin: 0.0,
            fmax: 8000.0,
        }
    }
}

/// Log-mel energies, frame-major `T × n_mels`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    data: Vec<f64>,
    n_frames: usize,
    n_mels: usize,
}

impl MelSpectrogram {
    pub fn new(data: Vec<f64>, n_frames: usize, n_mels: usize) -> Result<Self> {
        if n_mels != N_MELS {
            return Err(Error::Shape(format!("mel spectrogram needs {N_MELS} bands, got {n_mels}")));
        }
        if data.len() != n_frames * n_mels {
            return Err(Error::Shape(format!(
                "mel payload has {} values, expected {n_frames} x {n_mels}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite mel value at index {i}")));
        }
        Ok(MelSpectrogram {
            data,
            n_frames,
            n_mels,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_mels..(t + 1) * self.n_mels]
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
pub fn hz_to_mel(hz: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;
    let logstep = 6.4f64.ln() / 27.0;
    if hz >= MIN_LOG_HZ {
        MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / logstep
    } else {
        hz / F_SP
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;
    let logstep = 6.4f64.ln() / 27.0;
    if mel >= MIN_LOG_MEL {
        MIN_LOG_HZ * (logstep * (mel - MIN_LOG_MEL)).exp()
    } else {
        F_SP * mel
    }
}

/// Triangular, area-normalized mel filterbank, `n_mels × bins` row-major.
pub fn mel_filterbank(params: &MelParams) -> Result<Vec<f64>> {
    if !(params.fmin >= 0.0 && params.fmax > params.fmin) {
        return Err(Error::InvalidArgument(format!(
            "mel range [{}, {}] is empty",
            params.fmin, params.fmax
        )));
    }
    if params.fmax > params.sample_rate as f64 / 2.0 {
        return Err(Error::InvalidArgument(format!(
            "fmax {} exceeds Nyquist {}",
            params.fmax,
            params.sample_rate / 2
        )));
    }
    let bins = params.stft.bins();
    let fft_freqs: Vec<f64> = (0..bins)
        .map(|k| k as f64 * params.sample_rate as f64 / params.stft.n_fft as f64)
        .collect();
    let mel_lo = hz_to_mel(params.fmin);
    let mel_hi = hz_to_mel(params.fmax);
    let n_points = params.n_mels + 2;
    let edges: Vec<f64> = (0..n_points)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_points - 1) as f64))
        .collect();

    let mut fb = vec![0.0; params.n_mels * bins];
    for m in 0..params.n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let norm = 2.0 / (hi - lo);
        for (k, &f) in fft_freqs.iter().enumerate() {
            let rising = (f - lo) / (center - lo);
            let falling = (hi - f) / (hi - center);
            fb[m * bins + k] = rising.min(falling).max(0.0) * norm;
        }
    }
    Ok(fb)
}

/// Linear magnitude spectrogram with the analysis transform, frame-major `T × 641`.
pub fn linear_magnitude(wave: &Waveform) -> Result<(Vec<f64>, usize)> {
    let spec = stft(wave.samples(), StftConfig::ANALYSIS)?;
    Ok((spec.magnitude(), spec.n_frames()))
}

/// Applies a filterbank to a magnitude spectrogram and takes `ln(max(x, 1e-5))`.
pub fn log_mel_from_magnitude(magnitude: &[f64], n_frames: usize, filterbank: &[f64], n_mels: usize) -> Result<MelSpectrogram> {
    if n_frames == 0 || !magnitude.len().is_multiple_of(n_frames) {
        return Err(Error::Shape(format!(
            "magnitude of {} values cannot hold {n_frames} frames",
            magnitude.len()
        )));
    }
    let bins = magnitude.len() / n_frames;
    if filterbank.len() != n_mels * bins {
        return Err(Error::Shape(format!(
            "filterbank has {} values, expected {n_mels} x {bins}",
            filterbank.len()
        )));
    }
    let mut out = Vec::with_capacity(n_frames * n_mels);
    for t in 0..n_frames {
        let frame = &magnitude[t * bins..(t + 1) * bins];
        for m in 0..n_mels {
            let row = &filterbank[m * bins..(m + 1) * bins];
            let e: f64 = row.iter().zip(frame).map(|(w, x)| w * x).sum();
            out.push(e.max(LOG_FLOOR).ln());
        }
    }
    MelSpectrogram::new(out, n_frames, n_mels)
}

pub fn mel_spectrogram(wave: &Waveform) -> Result<MelSpectrogram> {
    mel_spectrogram_with(wave, &MelParams::default())
}

pub fn mel_spectrogram_with(wave: &Waveform, params: &MelParams) -> Result<MelSpectrogram> {
    let fb = mel_filterbank(params)?;
    let spec = stft(wave.samples(), params.stft)?;
    log_mel_from_magnitude(&spec.magnitude(), spec.n_frames(), &fb, params.n_mels)
}

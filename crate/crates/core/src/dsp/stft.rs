use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::FftPlan;
use crate::error::{Error, Result};
use crate::par;

/// Overlap-add envelope values below this are treated as degenerate.
pub const ENVELOPE_FLOOR: f64 = 1e-8;

/// Periodic Hann window: `w[k] = 0.5 - 0.5·cos(2πk/n)`.
pub fn hann_window(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "hann window length must be at least 2, got {n}"
        )));
    }
    Ok((0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub win_length: usize,
}

impl StftConfig {
    /// Analysis transform for linear and mel spectrograms.
    pub const ANALYSIS: StftConfig = StftConfig {
        n_fft: 1280,
        hop: 320,
        win_length: 1280,
    };

    pub fn new(n_fft: usize, hop: usize, win_length: usize) -> Result<Self> {
        let cfg = StftConfig {
            n_fft,
            hop,
            win_length,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_fft == 0 || self.hop == 0 || self.win_length == 0 {
            return Err(Error::InvalidArgument(format!(
                "stft parameters must be positive: {self:?}"
            )));
        }
        if self.win_length > self.n_fft {
            return Err(Error::InvalidArgument(format!(
                "win_length {} exceeds n_fft {}",
                self.win_length, self.n_fft
            )));
        }
        if self.hop > self.win_length {
            return Err(Error::InvalidArgument(format!(
                "hop {} exceeds win_length {}",
                self.hop, self.win_length
            )));
        }
        if self.win_length < 2 {
            return Err(Error::InvalidArgument("win_length must be at least 2".into()));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Frame count under reflect center padding of `n_fft/2` on both sides.
    pub fn frame_count(&self, len: usize) -> usize {
        let pad = self.n_fft / 2;
        1 + (len + 2 * pad - self.n_fft) / self.hop
    }

    /// Hann window of `win_length` centered inside an `n_fft` frame.
    pub fn window(&self) -> Result<Vec<f64>> {
        let w = hann_window(self.win_length)?;
        let mut out = vec![0.0; self.n_fft];
        let offset = (self.n_fft - self.win_length) / 2;
        out[offset..offset + self.win_length].copy_from_slice(&w);
        Ok(out)
    }
}

/// Frame-major one-sided spectrum: `T × (n_fft/2 + 1)` complex values.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    data: Vec<Complex64>,
    n_frames: usize,
    config: StftConfig,
}

impl ComplexSpectrogram {
    pub fn from_frames(data: Vec<Complex64>, n_frames: usize, config: StftConfig) -> Result<Self> {
        config.validate()?;
        if data.len() != n_frames * config.bins() {
            return Err(Error::Shape(format!(
                "spectrogram payload has {} values, expected {} frames x {} bins",
                data.len(),
                n_frames,
                config.bins()
            )));
        }
        Ok(ComplexSpectrogram {
            data,
            n_frames,
            config,
        })
    }

    /// Builds a spectrum from frame-major magnitude and phase (radians).
    pub fn from_polar(mag: &[f64], phase: &[f64], n_frames: usize, config: StftConfig) -> Result<Self> {
        if mag.len() != phase.len() {
            return Err(Error::Shape(format!(
                "magnitude has {} values but phase has {}",
                mag.len(),
                phase.len()
            )));
        }
        let data = mag
            .iter()
            .zip(phase)
            .map(|(&m, &p)| Complex64::new(m * p.cos(), m * p.sin()))
            .collect();
        Self::from_frames(data, n_frames, config)
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn bins(&self) -> usize {
        self.config.bins()
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        let b = self.bins();
        &self.data[t * b..(t + 1) * b]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Elementwise magnitude, frame-major.
    pub fn magnitude(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm()).collect()
    }
}

fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= len as isize {
        j = period - j;
    }
    j as usize
}

/// Short-time Fourier transform with reflect center padding of `n_fft/2`.
pub fn stft<T>(samples: &[T], config: StftConfig) -> Result<ComplexSpectrogram>
where
    T: Copy + Into<f64> + Sync,
{
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("stft of an empty signal".into()));
    }
    if samples.len() < config.win_length {
        return Err(Error::InvalidArgument(format!(
            "signal of {} samples is shorter than the {}-sample window",
            samples.len(),
            config.win_length
        )));
    }
    let n = config.n_fft;
    let pad = n / 2;
    let len = samples.len();
    let padded: Vec<f64> = (0..len + 2 * pad)
        .map(|i| samples[reflect_index(i as isize - pad as isize, len)].into())
        .collect();
    let window = config.window()?;
    let plan = FftPlan::new(n);
    let bins = config.bins();
    let n_frames = config.frame_count(len);

    let frames = par::map_range(n_frames, |f| {
        let start = f * config.hop;
        let mut buf: Vec<Complex64> = padded[start..start + n]
            .iter()
            .zip(&window)
            .map(|(&x, &w)| Complex64::new(x * w, 0.0))
            .collect();
        plan.forward(&mut buf);
        buf.truncate(bins);
        buf[0].im = 0.0;
        if n.is_multiple_of(2) {
            buf[bins - 1].im = 0.0;
        }
        buf
    });
    let data = frames.into_iter().flatten().collect();
    ComplexSpectrogram::from_frames(data, n_frames, config)
}

/// Inverse STFT by windowed overlap-add normalized by the squared-window
/// envelope. Produces `hop·(T-1)` samples, the inverse of [`stft`]'s center
/// padding.
pub fn istft(spec: &ComplexSpectrogram) -> Result<Vec<f64>> {
    let config = spec.config();
    let n = config.n_fft;
    let hop = config.hop;
    let n_frames = spec.n_frames();
    if n_frames == 0 {
        return Err(Error::InvalidArgument("istft of a spectrogram with no frames".into()));
    }
    let window = config.window()?;
    let plan = FftPlan::new(n);
    let bins = config.bins();

    let frames = par::map_range(n_frames, |f| {
        let half = spec.frame(f);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[0] = Complex64::new(half[0].re, 0.0);
        for k in 1..bins {
            buf[k] = half[k];
            if n - k != k {
                buf[n - k] = half[k].conj();
            } else {
                buf[k] = Complex64::new(half[k].re, 0.0);
            }
        }
        plan.inverse(&mut buf);
        buf.iter()
            .zip(&window)
            .map(|(c, &w)| c.re * w)
            .collect::<Vec<f64>>()
    });

    let full_len = n + hop * (n_frames - 1);
    let mut out = vec![0.0; full_len];
    let mut envelope = vec![0.0; full_len];
    for (f, frame) in frames.iter().enumerate() {
        let start = f * hop;
        for (i, (&y, &w)) in frame.iter().zip(&window).enumerate() {
            out[start + i] += y;
            envelope[start + i] += w * w;
        }
    }

    let pad = n / 2;
    let out_len = full_len - 2 * pad;
    let mut result = Vec::with_capacity(out_len);
    for i in pad..pad + out_len {
        let e = envelope[i];
        if e < ENVELOPE_FLOOR {
            return Err(Error::NumericalDegeneracy {
                index: i - pad,
                value: e,
                threshold: ENVELOPE_FLOOR,
            });
        }
        result.push(out[i] / e);
    }
    Ok(result)
}

/// Sum of squared windows shifted by `hop`, evaluated over `len` samples.
pub fn squared_window_envelope(window: &[f64], hop: usize, len: usize) -> Vec<f64> {
    let mut env = vec![0.0; len];
    let mut start = 0;
    while start < len {
        for (i, w) in window.iter().enumerate() {
            if start + i < len {
                env[start + i] += w * w;
            }
        }
        start += hop;
    }
    env
}

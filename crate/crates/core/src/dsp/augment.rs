//! Spectrogram-resize augmentation: stretch or squeeze the frequency axis of
//! a log-mel spectrogram while leaving the time axis alone.

use super::mel::{MelSpectrogram, LOG_FLOOR};
use crate::error::{Error, Result};

pub const MIN_RATIO: f64 = 0.5;
pub const MAX_RATIO: f64 = 2.0;

/// Resizes the band axis to `round(n_mels·ratio)` bands by linear
/// interpolation (half-pixel centers), then pads with `ln(1e-5)` or crops back
/// to `n_mels`.
pub fn sr_resize(mel: &MelSpectrogram, ratio: f64) -> Result<MelSpectrogram> {
    if !(MIN_RATIO..=MAX_RATIO).contains(&ratio) {
        return Err(Error::InvalidArgument(format!(
            "resize ratio {ratio} outside [{MIN_RATIO}, {MAX_RATIO}]"
        )));
    }
    if ratio == 1.0 {
        return Ok(mel.clone());
    }
    let bands = mel.n_mels();
    let resized = ((bands as f64) * ratio).round() as usize;
    let scale = bands as f64 / resized as f64;
    let floor = LOG_FLOOR.ln();

    let taps: Vec<(usize, usize, f64)> = (0..bands)
        .map(|j| {
            if j >= resized {
                return (0, 0, f64::NAN);
            }
            let pos = ((j as f64 + 0.5) * scale - 0.5).clamp(0.0, (bands - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(bands - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect();

    let mut out = Vec::with_capacity(mel.data().len());
    for t in 0..mel.n_frames() {
        let frame = mel.frame(t);
        for &(lo, hi, frac) in &taps {
            let v = if frac.is_nan() {
                floor
            } else if frac == 0.0 {
                frame[lo]
            } else {
                frame[lo] * (1.0 - frac) + frame[hi] * frac
            };
            out.push(v);
        }
    }
    MelSpectrogram::new(out, mel.n_frames(), bands)
}

use crate::error::{Error, Result};

/// Inserts `factor - 1` zeros after every sample and scales the kept samples
/// by `factor`, so a unit-gain interpolation filter preserves DC level.
pub fn zero_insert_upsample(x: &[f32], factor: usize) -> Result<Vec<f32>> {
    if factor == 0 {
        return Err(Error::InvalidArgument("upsampling factor must be at least 1".into()));
    }
    let mut out = vec![0.0; x.len() * factor];
    let gain = factor as f32;
    for (i, &v) in x.iter().enumerate() {
        out[i * factor] = v * gain;
    }
    Ok(out)
}

/// Same-length FIR filter using the conv-layer (cross-correlation) convention:
/// `y[n] = Σ_k taps[k]·x[n + k - (K-1)/2]`, zero outside the input.
pub fn fir_filter(x: &[f32], taps: &[f32]) -> Result<Vec<f32>> {
    if taps.is_empty() {
        return Err(Error::InvalidArgument("filter needs at least one tap".into()));
    }
    if taps.len().is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "same-length filtering needs an odd tap count, got {}",
            taps.len()
        )));
    }
    let half = (taps.len() / 2) as isize;
    let n = x.len() as isize;
    let mut y = vec![0.0f32; x.len()];
    for (i, out) in y.iter_mut().enumerate() {
        let mut acc = 0.0f32;
        for (k, &h) in taps.iter().enumerate() {
            let j = i as isize + k as isize - half;
            if (0..n).contains(&j) {
                acc += h * x[j as usize];
            }
        }
        *out = acc;
    }
    Ok(y)
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..64 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

pub fn kaiser_window(n: usize, beta: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = bessel_i0(beta);
    (0..n)
        .map(|i| {
            let r = 2.0 * i as f64 / (n - 1) as f64 - 1.0;
            bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom
        })
        .collect()
}

/// Cosine-modulated synthesis bank built from a Kaiser-windowed sinc
/// prototype (cutoff 0.142 cycles/sample relative to Nyquist, beta 9).
/// Returns `subbands` rows of `taps` coefficients.
pub fn pqmf_synthesis_bank(subbands: usize, taps: usize) -> Result<Vec<Vec<f32>>> {
    if subbands == 0 || taps == 0 || taps.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "synthesis bank needs subbands >= 1 and an odd tap count, got {subbands} x {taps}"
        )));
    }
    const CUTOFF: f64 = 0.142;
    const BETA: f64 = 9.0;
    let order = (taps - 1) as f64;
    let window = kaiser_window(taps, BETA);
    let omega = std::f64::consts::PI * CUTOFF;
    let prototype: Vec<f64> = (0..taps)
        .map(|i| {
            let t = i as f64 - order / 2.0;
            let h = if t == 0.0 {
                CUTOFF
            } else {
                (omega * t).sin() / (std::f64::consts::PI * t)
            };
            h * window[i]
        })
        .collect();
    let bank = (0..subbands)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            (0..taps)
                .map(|i| {
                    let phase = (2 * k + 1) as f64 * std::f64::consts::PI / (2 * subbands) as f64
                        * (i as f64 - order / 2.0)
                        - sign * std::f64::consts::FRAC_PI_4;
                    (2.0 * prototype[i] * phase.cos()) as f32
                })
                .collect()
        })
        .collect();
    Ok(bank)
}

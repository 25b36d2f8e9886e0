//! Independent reference implementations shared by the integration tests.
//! These are deliberately naive: direct sums, f64 throughout, no shared code
//! with the crate under test.

#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn uniform_f32(rng: &mut ChaCha8Rng, n: usize, bound: f32) -> Vec<f32> {
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-300)
}

pub fn close_rel(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol * want.abs().max(got.abs()).max(1e-12)
}

pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// `(re, im)` of `Σ x[t]·exp(-2πikt/n)` for `k < n/2 + 1`.
pub fn naive_rdft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..n / 2 + 1)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (t, &v) in x.iter().enumerate() {
                let a = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            (re, im)
        })
        .collect()
}

/// Frame `f` of a center-padded (reflect) STFT computed from scratch.
pub fn stft_frame_oracle(x: &[f64], n_fft: usize, hop: usize, f: usize) -> Vec<(f64, f64)> {
    let pad = n_fft as isize / 2;
    let len = x.len() as isize;
    let w = hann(n_fft);
    let frame: Vec<f64> = (0..n_fft)
        .map(|i| {
            let mut j = (f * hop) as isize + i as isize - pad;
            if j < 0 {
                j = -j;
            }
            if j >= len {
                j = 2 * (len - 1) - j;
            }
            x[j as usize] * w[i]
        })
        .collect();
    naive_rdft(&frame)
}

/// Direct-sum 1-D convolution, weight `(out, in, k)`.
#[allow(clippy::too_many_arguments)]
pub fn conv1d_naive(
    x: &[f64],
    c_in: usize,
    t: usize,
    w: &[f64],
    c_out: usize,
    k: usize,
    bias: Option<&[f64]>,
    stride: usize,
    dilation: usize,
    padding: usize,
) -> (Vec<f64>, usize) {
    let t_out = (t + 2 * padding - dilation * (k - 1) - 1) / stride + 1;
    let mut y = vec![0.0; c_out * t_out];
    for o in 0..c_out {
        for j in 0..t_out {
            let mut acc = bias.map_or(0.0, |b| b[o]);
            for i in 0..c_in {
                for kk in 0..k {
                    let pos = (j * stride + kk * dilation) as isize - padding as isize;
                    if pos >= 0 && (pos as usize) < t {
                        acc += w[(o * c_in + i) * k + kk] * x[i * t + pos as usize];
                    }
                }
            }
            y[o * t_out + j] = acc;
        }
    }
    (y, t_out)
}

/// Scatter-form transposed convolution, weight `(in, out, k)`.
#[allow(clippy::too_many_arguments)]
pub fn conv_transpose1d_naive(
    x: &[f64],
    c_in: usize,
    t: usize,
    w: &[f64],
    c_out: usize,
    k: usize,
    stride: usize,
    padding: usize,
    output_padding: usize,
) -> (Vec<f64>, usize) {
    let full = (t - 1) * stride + k;
    let t_out = full + output_padding - 2 * padding;
    let mut y = vec![0.0; c_out * t_out];
    for i in 0..c_in {
        for n in 0..t {
            for o in 0..c_out {
                for kk in 0..k {
                    let pos = (n * stride + kk) as isize - padding as isize;
                    if pos >= 0 && (pos as usize) < t_out {
                        y[o * t_out + pos as usize] += x[i * t + n] * w[(i * c_out + o) * k + kk];
                    }
                }
            }
        }
    }
    (y, t_out)
}

/// `ln|det A|` by Gaussian elimination with partial pivoting.
pub fn log_abs_det(mut a: Vec<f64>, n: usize) -> f64 {
    let mut acc = 0.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs()))
            .unwrap();
        if p != c {
            for j in 0..n {
                a.swap(c * n + j, p * n + j);
            }
        }
        let piv = a[c * n + c];
        acc += piv.abs().ln();
        for r in c + 1..n {
            let f = a[r * n + c] / piv;
            for j in c..n {
                a[r * n + j] -= f * a[c * n + j];
            }
        }
    }
    acc
}

// Loss oracles: written from the textbook definitions, element by element.

pub fn gauss_log_pdf(x: f64, m: f64, logs: f64) -> f64 {
    let sigma = logs.exp();
    (-(x - m).powi(2) / (2.0 * sigma * sigma)).exp().ln() - (sigma * (2.0 * PI).sqrt()).ln()
}

pub fn kl_oracle(z_q: &[f64], m_q: &[f64], logs_q: &[f64], z_p: &[f64], m_p: &[f64], logs_p: &[f64], logdet: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..z_q.len() {
        total += gauss_log_pdf(z_q[i], m_q[i], logs_q[i]) - gauss_log_pdf(z_p[i], m_p[i], logs_p[i]);
    }
    (total - logdet) / z_q.len() as f64
}

pub fn gaussian_kl_oracle(m_q: f64, s_q: f64, m_p: f64, s_p: f64) -> f64 {
    (s_p / s_q).ln() + (s_q * s_q + (m_q - m_p).powi(2)) / (2.0 * s_p * s_p) - 0.5
}

pub fn l1_oracle(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += if a[i] > b[i] { a[i] - b[i] } else { b[i] - a[i] };
    }
    s / a.len() as f64
}

pub fn lsgan_g_oracle(fake: &[Vec<f64>]) -> f64 {
    fake.iter()
        .map(|d| d.iter().map(|&x| (1.0 - x) * (1.0 - x)).sum::<f64>() / d.len() as f64)
        .sum()
}

pub fn lsgan_d_oracle(real: &[Vec<f64>], fake: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (r, f) in real.iter().zip(fake) {
        total += r.iter().map(|&x| (1.0 - x) * (1.0 - x)).sum::<f64>() / r.len() as f64;
        total += f.iter().map(|&x| x * x).sum::<f64>() / f.len() as f64;
    }
    total
}

pub fn fm_oracle(real: &[Vec<Vec<f64>>], fake: &[Vec<Vec<f64>>]) -> f64 {
    let mut total = 0.0;
    for (rd, fd) in real.iter().zip(fake) {
        for (r, f) in rd.iter().zip(fd) {
            total += l1_oracle(r, f);
        }
    }
    2.0 * total
}

/// Linear interpolation of `row` at fractional index `pos` (clamped).
pub fn lerp_at(row: &[f64], pos: f64) -> f64 {
    let pos = pos.clamp(0.0, (row.len() - 1) as f64);
    let i = pos.floor() as usize;
    let j = (i + 1).min(row.len() - 1);
    let f = pos - i as f64;
    row[i] + (row[j] - row[i]) * f
}

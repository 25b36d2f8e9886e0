//! Forward evaluation of the training objectives, for auditing checkpoints
//! and cross-checking exported tensors. Everything is computed in f64.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::MelSpectrogram;
use crate::error::{Error, Result};

pub const C_MEL: f64 = 45.0;
pub const C_KL: f64 = 1.0;

fn same_len(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{what}: {a} values vs {b}")));
    }
    if a == 0 {
        return Err(Error::Shape(format!("{what}: empty tensor")));
    }
    Ok(())
}

fn finite(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical(format!("{what} is not finite ({v})")))
    }
}

/// Mean absolute difference.
pub fn l1_mean(a: &[f64], b: &[f64]) -> Result<f64> {
    same_len("l1", a.len(), b.len())?;
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    finite("l1", s / a.len() as f64)
}

/// L1 distance between target and predicted mel spectrograms (mean reduction).
pub fn recon_loss(target: &MelSpectrogram, predicted: &MelSpectrogram) -> Result<f64> {
    if target.n_frames() != predicted.n_frames() || target.n_mels() != predicted.n_mels() {
        return Err(Error::Shape(format!(
            "mel shapes differ: {}x{} vs {}x{}",
            target.n_frames(),
            target.n_mels(),
            predicted.n_frames(),
            predicted.n_mels()
        )));
    }
    l1_mean(target.data(), predicted.data())
}

/// Inputs to the single-sample KL estimate. `z_p` must be the flow image of
/// `z_q` and `logdet` the log-determinant of that map.
#[derive(Debug, Clone, Copy)]
pub struct KlTerms<'a> {
    pub z_q: &'a [f64],
    pub m_q: &'a [f64],
    pub logs_q: &'a [f64],
    pub z_p: &'a [f64],
    pub m_p: &'a [f64],
    pub logs_p: &'a [f64],
    pub logdet: f64,
}

fn log_normal(x: f64, m: f64, logs: f64) -> f64 {
    let e = (x - m) * (-logs).exp();
    -logs - 0.5 * (2.0 * PI).ln() - 0.5 * e * e
}

/// `(log q(z_q) − log p(z_q)) / n` where `log p` includes the flow's
/// change-of-variables term.
pub fn kl_loss(t: &KlTerms<'_>) -> Result<f64> {
    let n = t.z_q.len();
    for (name, len) in [
        ("m_q", t.m_q.len()),
        ("logs_q", t.logs_q.len()),
        ("z_p", t.z_p.len()),
        ("m_p", t.m_p.len()),
        ("logs_p", t.logs_p.len()),
    ] {
        same_len(&format!("kl z_q vs {name}"), n, len)?;
    }
    let mut log_q = 0.0;
    let mut log_p = 0.0;
    for i in 0..n {
        log_q += log_normal(t.z_q[i], t.m_q[i], t.logs_q[i]);
        log_p += log_normal(t.z_p[i], t.m_p[i], t.logs_p[i]);
    }
    log_p += t.logdet;
    finite("kl", (log_q - log_p) / n as f64)
}

/// Closed-form `KL(N(m_q, σ_q) ‖ N(m_p, σ_p))`, averaged over elements.
pub fn gaussian_kl(m_q: &[f64], logs_q: &[f64], m_p: &[f64], logs_p: &[f64]) -> Result<f64> {
    let n = m_q.len();
    same_len("kl m_q vs logs_q", n, logs_q.len())?;
    same_len("kl m_q vs m_p", n, m_p.len())?;
    same_len("kl m_q vs logs_p", n, logs_p.len())?;
    let s: f64 = (0..n)
        .map(|i| {
            let var_ratio = (2.0 * (logs_q[i] - logs_p[i])).exp();
            let d = (m_q[i] - m_p[i]) * (-logs_p[i]).exp();
            logs_p[i] - logs_q[i] + 0.5 * (var_ratio + d * d) - 0.5
        })
        .sum();
    finite("kl", s / n as f64)
}

/// Monte-Carlo mean of [`kl_loss`] over `samples` draws `z_q ~ q` through an
/// identity flow.
pub fn kl_loss_monte_carlo(m_q: &[f64], logs_q: &[f64], m_p: &[f64], logs_p: &[f64], samples: usize, seed: u64) -> Result<f64> {
    let n = m_q.len();
    same_len("kl m_q vs logs_q", n, logs_q.len())?;
    if samples == 0 {
        return Err(Error::InvalidArgument("monte-carlo KL needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = vec![0.0; n];
    let mut acc = 0.0;
    for _ in 0..samples {
        for i in 0..n {
            let e: f64 = StandardNormal.sample(&mut rng);
            z[i] = m_q[i] + logs_q[i].exp() * e;
        }
        acc += kl_loss(&KlTerms {
            z_q: &z,
            m_q,
            logs_q,
            z_p: &z,
            m_p,
            logs_p,
            logdet: 0.0,
        })?;
    }
    Ok(acc / samples as f64)
}

fn mean_of(v: &[f64], f: impl Fn(f64) -> f64) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::Shape("empty discriminator output".into()));
    }
    Ok(v.iter().map(|&x| f(x)).sum::<f64>() / v.len() as f64)
}

/// Least-squares generator loss: `Σ_d mean((D(fake) − 1)²)`.
pub fn adv_loss_g(fake_logits: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    for d in fake_logits {
        total += mean_of(d, |x| (x - 1.0) * (x - 1.0))?;
    }
    finite("adversarial loss", total)
}

/// Least-squares discriminator loss: `Σ_d mean((D(real) − 1)²) + mean(D(fake)²)`.
pub fn adv_loss_d(real_logits: &[Vec<f64>], fake_logits: &[Vec<f64>]) -> Result<f64> {
    if real_logits.len() != fake_logits.len() {
        return Err(Error::Shape(format!(
            "{} real vs {} fake discriminator outputs",
            real_logits.len(),
            fake_logits.len()
        )));
    }
    let mut total = 0.0;
    for (r, f) in real_logits.iter().zip(fake_logits) {
        same_len("discriminator logits", r.len(), f.len())?;
        total += mean_of(r, |x| (x - 1.0) * (x - 1.0))? + mean_of(f, |x| x * x)?;
    }
    finite("discriminator loss", total)
}

/// `2 · Σ_d Σ_layer mean|real − fake|`.
pub fn feature_matching_loss(real: &[Vec<Vec<f64>>], fake: &[Vec<Vec<f64>>]) -> Result<f64> {
    if real.len() != fake.len() {
        return Err(Error::Shape(format!(
            "{} real vs {} fake feature stacks",
            real.len(),
            fake.len()
        )));
    }
    let mut total = 0.0;
    for (rd, fd) in real.iter().zip(fake) {
        if rd.len() != fd.len() {
            return Err(Error::Shape(format!("{} real vs {} fake layers", rd.len(), fd.len())));
        }
        for (r, f) in rd.iter().zip(fd) {
            total += l1_mean(r, f)?;
        }
    }
    finite("feature matching loss", 2.0 * total)
}

/// Discriminator outputs for one batch: per-sub-discriminator logits and
/// intermediate feature maps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiscriminatorTaps {
    pub logits: Vec<Vec<f64>>,
    pub features: Vec<Vec<Vec<f64>>>,
}

impl DiscriminatorTaps {
    pub fn check_matches(&self, other: &DiscriminatorTaps) -> Result<()> {
        let shape = |t: &DiscriminatorTaps| {
            (
                t.logits.iter().map(Vec::len).collect::<Vec<_>>(),
                t.features
                    .iter()
                    .map(|d| d.iter().map(Vec::len).collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
            )
        };
        if shape(self) != shape(other) {
            return Err(Error::Shape("real and fake discriminator taps differ in shape".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossWeighting {
    /// `c_mel·recon + c_kl·kl + adv + fm` with `c_mel = 45`, `c_kl = 1`.
    Weighted,
    /// Unweighted sum of the four terms.
    PaperExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTerms {
    pub recon: f64,
    pub kl: f64,
    pub adv: f64,
    pub fm: f64,
}

pub fn generator_total(t: &GeneratorTerms, weighting: LossWeighting) -> f64 {
    let (c_mel, c_kl) = match weighting {
        LossWeighting::Weighted => (C_MEL, C_KL),
        LossWeighting::PaperExact => (1.0, 1.0),
    };
    c_mel * t.recon + c_kl * t.kl + t.adv + t.fm
}

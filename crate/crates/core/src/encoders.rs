//! Gaussian encoders (content and posterior) and the speaker encoder.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::ModelConfig;
use crate::dsp::MelSpectrogram;
use crate::error::{Error, Result};
use crate::features::ContentFeatures;
use crate::nn::weights::{join, load_conv1d, Init, ParamSource};
use crate::nn::{Conv1d, ConvParams, Lstm, Tensor3, WaveNet};

/// Standard-normal noise from a seeded ChaCha8 stream.
pub fn standard_normal(len: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Diagonal Gaussian over the latent, `(1, channels, T)` mean and log-std,
/// plus an optional reparameterized sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLatent {
    pub m: Tensor3,
    pub logs: Tensor3,
    pub z: Option<Tensor3>,
}

impl GaussianLatent {
    pub fn new(m: Tensor3, logs: Tensor3) -> Result<Self> {
        if m.shape() != logs.shape() {
            return Err(Error::Shape(format!(
                "mean {:?} and log-std {:?} differ in shape",
                m.shape(),
                logs.shape()
            )));
        }
        if !logs.is_finite() {
            return Err(Error::Numerical("non-finite log-std".into()));
        }
        Ok(GaussianLatent { m, logs, z: None })
    }

    pub fn frames(&self) -> usize {
        self.m.time()
    }

    /// `z = m + exp(logs)·eps`, stored and returned.
    pub fn sample(&mut self, eps: &[f32]) -> Result<&Tensor3> {
        if eps.len() != self.m.data().len() {
            return Err(Error::Shape(format!(
                "noise has {} values for a latent of {}",
                eps.len(),
                self.m.data().len()
            )));
        }
        let z: Vec<f32> = self
            .m
            .data()
            .iter()
            .zip(self.logs.data())
            .zip(eps)
            .map(|((&m, &s), &e)| m + s.exp() * e)
            .collect();
        self.z = Some(Tensor3::new(z, self.m.shape())?);
        Ok(self.z.as_ref().unwrap())
    }

    /// Samples with noise `scale·N(0, 1)` drawn from `seed`.
    pub fn sample_seeded(&mut self, seed: u64, scale: f32) -> Result<&Tensor3> {
        let eps: Vec<f32> = standard_normal(self.m.data().len(), seed)
            .into_iter()
            .map(|e| e * scale)
            .collect();
        self.sample(&eps)
    }
}

/// Unit-norm (by convention) speaker vector `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerEmbedding(Vec<f32>);

impl SpeakerEmbedding {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("speaker embedding must be non-empty and finite".into()));
        }
        Ok(SpeakerEmbedding(values))
    }

    /// Scales `values` to unit L2 norm.
    pub fn normalized(values: Vec<f32>) -> Result<Self> {
        let norm = values.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
        if !norm.is_finite() || norm <= f64::MIN_POSITIVE {
            return Err(Error::Numerical(format!(
                "cannot normalize a speaker embedding of norm {norm}"
            )));
        }
        Self::new(values.iter().map(|&v| (v as f64 / norm) as f32).collect())
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt()
    }
}

/// `pre (1×1) → WaveNet → proj (1×1)` with the projection split into mean
/// and log-std. Shared by the content and posterior encoders.
#[derive(Debug, Clone)]
struct GaussianHead {
    in_channels: usize,
    out_channels: usize,
    pre: Conv1d,
    enc: WaveNet,
    proj: Conv1d,
}

impl GaussianHead {
    fn load(src: &mut dyn ParamSource, prefix: &str, in_channels: usize, cfg: &ModelConfig, gin: Option<usize>) -> Result<Self> {
        let hidden = cfg.hidden_channels;
        let out = cfg.inter_channels;
        Ok(GaussianHead {
            in_channels,
            out_channels: out,
            pre: load_conv1d(src, &join(prefix, "pre"), (hidden, in_channels, 1), true, ConvParams::pointwise())?,
            enc: WaveNet::load(
                src,
                &join(prefix, "enc"),
                hidden,
                cfg.encoder.kernel,
                cfg.encoder.dilation_rate,
                cfg.encoder.layers,
                gin,
            )?,
            proj: load_conv1d(src, &join(prefix, "proj"), (2 * out, hidden, 1), true, ConvParams::pointwise())?,
        })
    }

    fn forward(&self, x: &Tensor3, g: Option<&[f32]>) -> Result<GaussianLatent> {
        if x.channels() != self.in_channels {
            return Err(Error::Shape(format!(
                "encoder expects {} input channels, got {}",
                self.in_channels,
                x.channels()
            )));
        }
        let h = self.pre.forward(x)?;
        let h = self.enc.forward(&h, g)?;
        let stats = self.proj.forward(&h)?;
        GaussianLatent::new(
            stats.narrow_channels(0, self.out_channels)?,
            stats.narrow_channels(self.out_channels, self.out_channels)?,
        )
    }
}

/// Maps content features to the prior mean and log-std. Takes no speaker
/// input: the content path is speaker-independent by construction.
#[derive(Debug, Clone)]
pub struct ContentEncoder(GaussianHead);

impl ContentEncoder {
    pub fn load(src: &mut dyn ParamSource, cfg: &ModelConfig) -> Result<Self> {
        Ok(ContentEncoder(GaussianHead::load(src, "enc_p", cfg.content_dim, cfg, None)?))
    }

    pub fn forward(&self, features: &ContentFeatures) -> Result<GaussianLatent> {
        let x = Tensor3::from_frames(features.data(), features.frames(), features.dim())?;
        self.0.forward(&x, None)
    }
}

/// Maps a linear magnitude spectrogram (frame-major `T × bins`) to the
/// posterior, conditioned on `g`.
#[derive(Debug, Clone)]
pub struct PosteriorEncoder(GaussianHead);

impl PosteriorEncoder {
    pub fn load(src: &mut dyn ParamSource, cfg: &ModelConfig) -> Result<Self> {
        Ok(PosteriorEncoder(GaussianHead::load(
            src,
            "enc_q",
            cfg.analysis.spec_bins(),
            cfg,
            Some(cfg.gin_channels),
        )?))
    }

    /// With `eps = None` the sample is the mean.
    pub fn forward(&self, linear: &[f64], frames: usize, g: &SpeakerEmbedding, eps: Option<&[f32]>) -> Result<GaussianLatent> {
        let bins = self.0.in_channels;
        if frames == 0 || linear.len() != frames * bins {
            return Err(Error::Shape(format!(
                "posterior encoder expects frames of {bins} bins, got {} values for {frames} frames",
                linear.len()
            )));
        }
        let x: Vec<f32> = linear.iter().map(|&v| v as f32).collect();
        let x = Tensor3::from_frames(&x, frames, bins)?;
        let mut latent = self.0.forward(&x, Some(g.as_slice()))?;
        match eps {
            Some(eps) => {
                latent.sample(eps)?;
            }
            None => latent.z = Some(latent.m.clone()),
        }
        Ok(latent)
    }
}

/// Mel frames → LSTM (last hidden state) → linear → optional L2 norm.
#[derive(Debug, Clone)]
pub struct SpeakerEncoder {
    lstm: Lstm,
    linear_weight: Vec<f32>,
    linear_bias: Vec<f32>,
    embedding_dim: usize,
    normalize: bool,
}

impl SpeakerEncoder {
    pub fn load(src: &mut dyn ParamSource, cfg: &ModelConfig) -> Result<Self> {
        let n_mels = cfg.analysis.n_mels;
        let hidden = cfg.speaker.lstm_hidden;
        let dim = cfg.speaker.embedding_dim;
        let lstm = Lstm::load(src, "spk.lstm", n_mels, hidden)?;
        let linear_weight = src.param("spk.linear.weight", &[dim, hidden], Init::fan_in(hidden))?;
        let linear_bias = src.param("spk.linear.bias", &[dim], Init::fan_in(hidden))?;
        Ok(SpeakerEncoder {
            lstm,
            linear_weight,
            linear_bias,
            embedding_dim: dim,
            normalize: cfg.speaker.normalize,
        })
    }

    pub fn forward(&self, mel: &MelSpectrogram) -> Result<SpeakerEmbedding> {
        if mel.n_frames() == 0 {
            return Err(Error::Shape("speaker encoder needs at least one mel frame".into()));
        }
        let frames: Vec<f32> = mel.data().iter().map(|&v| v as f32).collect();
        let h = self.lstm.forward(&frames, mel.n_frames())?;
        let n = h.len();
        let out: Vec<f32> = (0..self.embedding_dim)
            .map(|i| {
                let row = &self.linear_weight[i * n..(i + 1) * n];
                self.linear_bias[i] + row.iter().zip(&h).map(|(w, x)| w * x).sum::<f32>()
            })
            .collect();
        if self.normalize {
            SpeakerEmbedding::normalized(out)
        } else {
            SpeakerEmbedding::new(out)
        }
    }
}

//! Multi-stream iSTFT decoder.
//!
//! ```text
//! z ─ conv_pre ─(+ cond(g))─┬─ lrelu ─ convT ×5 ─ MRF ─ lrelu ─ convT ×4 ─ MRF ─┐
//!                           └────────────────────────────────────────────────────┘
//!   ─ lrelu ─ reflect-pad 1 ─ conv_post ─ per-band (mag, phase) ─ iSTFT(16, 4) ×4
//!   ─ zero-insert ×4 ─ synthesis filter ─ Σ bands ─ waveform (320 samples / frame)
//! ```

use crate::config::{DecoderConfig, ModelConfig};
use crate::dsp::multiband::{fir_filter, pqmf_synthesis_bank, zero_insert_upsample};
use crate::dsp::{istft, ComplexSpectrogram, Waveform};
use crate::encoders::SpeakerEmbedding;
use crate::error::{Error, Result};
use crate::nn::weights::{join, load_conv1d, load_conv_transpose1d, Init, ParamSource};
use crate::nn::{fuse_resblocks, leaky_relu, Conv1d, ConvParams, ConvTranspose1d, ResBlock, Tensor3, TransposeParams, LRELU_SLOPE};
use crate::par;

/// Upper clamp on the log-magnitude head before exponentiation.
pub const LOG_MAG_CLAMP: f32 = 10.0;
/// Slope of the activation in front of the output head.
pub const HEAD_LRELU_SLOPE: f32 = 0.01;

/// One sub-band's spectrum, frame-major `frames × bins`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandSpectrum {
    pub frames: usize,
    pub bins: usize,
    pub magnitude: Vec<f64>,
    pub phase: Vec<f64>,
}

/// Splits the head output `(1, subbands·bins·2, F)` into per-band magnitude
/// `exp(min(raw, 10))` and raw phase angle. Channel `band·2·bins + j` is
/// magnitude for `j < bins` and phase otherwise.
pub fn mag_phase_heads(head: &Tensor3, cfg: &DecoderConfig) -> Result<Vec<SubbandSpectrum>> {
    let bins = cfg.bins();
    if head.batch() != 1 || head.channels() != cfg.head_channels() {
        return Err(Error::Shape(format!(
            "head output {:?} should be (1, {}, frames)",
            head.shape(),
            cfg.head_channels()
        )));
    }
    let frames = head.time();
    Ok((0..cfg.subbands)
        .map(|band| {
            let base = band * 2 * bins;
            let mut magnitude = vec![0.0; frames * bins];
            let mut phase = vec![0.0; frames * bins];
            for j in 0..bins {
                let mag_row = head.row(0, base + j);
                let phase_row = head.row(0, base + bins + j);
                for t in 0..frames {
                    magnitude[t * bins + j] = (mag_row[t].min(LOG_MAG_CLAMP) as f64).exp();
                    phase[t * bins + j] = phase_row[t] as f64;
                }
            }
            SubbandSpectrum {
                frames,
                bins,
                magnitude,
                phase,
            }
        })
        .collect())
}

/// Inverse STFT of each band; `F` frames give `istft_hop·(F-1)` samples.
pub fn subband_istft(bands: &[SubbandSpectrum], cfg: &DecoderConfig) -> Result<Vec<Vec<f32>>> {
    let stft_cfg = cfg.istft();
    let results = par::map_range(bands.len(), |i| {
        let b = &bands[i];
        if b.bins != stft_cfg.bins() {
            return Err(Error::Shape(format!(
                "sub-band spectrum has {} bins, istft expects {}",
                b.bins,
                stft_cfg.bins()
            )));
        }
        let spec = ComplexSpectrogram::from_polar(&b.magnitude, &b.phase, b.frames, stft_cfg)?;
        Ok(istft(&spec)?.into_iter().map(|v| v as f32).collect())
    });
    results.into_iter().collect()
}

/// Zero-insertion upsampling of each band by `subbands`, per-band synthesis
/// filtering, and summation. `filter` is `subbands × taps`, row-major.
pub fn multiband_synthesis(bands: &[Vec<f32>], filter: &[f32], cfg: &DecoderConfig) -> Result<Vec<f32>> {
    let k = cfg.subbands;
    let taps = cfg.synth_filter_taps;
    if bands.len() != k {
        return Err(Error::Shape(format!("expected {k} sub-bands, got {}", bands.len())));
    }
    if filter.len() != k * taps {
        return Err(Error::Shape(format!(
            "synthesis filter has {} taps, expected {k} x {taps}",
            filter.len()
        )));
    }
    let len = bands[0].len();
    if bands.iter().any(|b| b.len() != len) {
        return Err(Error::Shape("sub-band signals differ in length".into()));
    }
    let filtered = par::map_range(k, |band| {
        let up = zero_insert_upsample(&bands[band], k)?;
        fir_filter(&up, &filter[band * taps..(band + 1) * taps])
    });
    let mut out = vec![0.0f32; len * k];
    for f in filtered {
        for (o, v) in out.iter_mut().zip(f?) {
            *o += v;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Decoder {
    cfg: DecoderConfig,
    latent_channels: usize,
    conv_pre: Conv1d,
    cond: Conv1d,
    ups: Vec<ConvTranspose1d>,
    resblocks: Vec<Vec<ResBlock>>,
    conv_post: Conv1d,
    synth_filter: Vec<f32>,
}

impl Decoder {
    pub fn load(src: &mut dyn ParamSource, model: &ModelConfig) -> Result<Self> {
        let cfg = model.decoder.clone();
        cfg.validate(model.analysis.hop)?;
        let c0 = cfg.upsample_initial_channels;
        let conv_pre = load_conv1d(
            src,
            "dec.conv_pre",
            (c0, model.inter_channels, cfg.pre_kernel),
            true,
            ConvParams::same(cfg.pre_kernel, 1),
        )?;
        let cond = load_conv1d(src, "dec.cond", (c0, model.gin_channels, 1), true, ConvParams::pointwise())?;
        let mut ups = Vec::new();
        let mut resblocks = Vec::new();
        for (i, (&scale, &kernel)) in cfg.upsample_scales.iter().zip(&cfg.upsample_kernels).enumerate() {
            let (c_in, c_out) = (cfg.stage_channels(i), cfg.stage_channels(i + 1));
            ups.push(load_conv_transpose1d(
                src,
                &format!("dec.ups.{i}"),
                (c_in, c_out, kernel),
                TransposeParams::upsample(kernel, scale),
            )?);
            let n = cfg.resblock_kernels.len();
            let stage = cfg
                .resblock_kernels
                .iter()
                .zip(&cfg.resblock_dilations)
                .enumerate()
                .map(|(j, (&k, d))| ResBlock::load(src, &format!("dec.resblocks.{}", i * n + j), c_out, k, d))
                .collect::<Result<Vec<_>>>()?;
            resblocks.push(stage);
        }
        let c_last = cfg.stage_channels(cfg.upsample_scales.len());
        let conv_post = load_conv1d(
            src,
            "dec.conv_post",
            (cfg.head_channels(), c_last, cfg.post_kernel),
            true,
            ConvParams::same(cfg.post_kernel, 1),
        )?;
        let bank: Vec<f32> = pqmf_synthesis_bank(cfg.subbands, cfg.synth_filter_taps)?
            .into_iter()
            .flatten()
            .collect();
        let synth_filter = src.param(
            &join("dec.synth_filter", "weight"),
            &[1, cfg.subbands, cfg.synth_filter_taps],
            Init::Values(bank),
        )?;
        Ok(Decoder {
            cfg,
            latent_channels: model.inter_channels,
            conv_pre,
            cond,
            ups,
            resblocks,
            conv_post,
            synth_filter,
        })
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.cfg
    }

    /// Hidden features just before the output head, `(1, C, T·Πscales)`.
    pub fn upsample(&self, z: &Tensor3, g: &SpeakerEmbedding) -> Result<Tensor3> {
        if z.batch() != 1 || z.channels() != self.latent_channels || z.time() == 0 {
            return Err(Error::Shape(format!(
                "decoder expects a (1, {}, T>=1) latent, got {:?}",
                self.latent_channels,
                z.shape()
            )));
        }
        let mut x = self.conv_pre.forward(z)?;
        x.add_channel_bias(&self.cond.forward_vector(g.as_slice())?)?;
        for (up, blocks) in self.ups.iter().zip(&self.resblocks) {
            x = up.forward(&leaky_relu(&x, LRELU_SLOPE))?;
            x = fuse_resblocks(blocks, &x)?;
        }
        Ok(x)
    }

    /// Output head: `(1, head_channels, T' + 1)` after left reflect padding.
    pub fn head(&self, hidden: &Tensor3) -> Result<Tensor3> {
        let x = leaky_relu(hidden, HEAD_LRELU_SLOPE).reflect_pad_left(1)?;
        self.conv_post.forward(&x)
    }

    pub fn forward(&self, z: &Tensor3, g: &SpeakerEmbedding) -> Result<Waveform> {
        let hidden = self.upsample(z, g)?;
        let head = self.head(&hidden)?;
        let bands = mag_phase_heads(&head, &self.cfg)?;
        let subbands = subband_istft(&bands, &self.cfg)?;
        let wave = multiband_synthesis(&subbands, &self.synth_filter, &self.cfg)?;
        Waveform::new(wave)
    }
}

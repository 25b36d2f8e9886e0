//! Model hyper-parameters. Serialized verbatim into the `QVCW` header.

use serde::{Deserialize, Serialize};

use crate::dsp::StftConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub win_length: usize,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            sample_rate: 16_000,
            n_fft: 1280,
            hop: 320,
            win_length: 1280,
            n_mels: 80,
            fmin: 0.0,
            fmax: 8000.0,
        }
    }
}

impl AnalysisConfig {
    pub fn stft(&self) -> StftConfig {
        StftConfig {
            n_fft: self.n_fft,
            hop: self.hop,
            win_length: self.win_length,
        }
    }

    pub fn spec_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveNetConfig {
    pub layers: usize,
    pub kernel: usize,
    pub dilation_rate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerEncoderConfig {
    pub lstm_hidden: usize,
    pub embedding_dim: usize,
    /// Whether embeddings are L2-normalized after the projection.
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub n_flows: usize,
    pub wavenet: WaveNetConfig,
    pub mean_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeakerConditioning {
    /// `g` is projected and added once, after the input convolution.
    PreConv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub upsample_scales: Vec<usize>,
    pub upsample_kernels: Vec<usize>,
    pub upsample_initial_channels: usize,
    pub resblock_kernels: Vec<usize>,
    pub resblock_dilations: Vec<Vec<usize>>,
    pub pre_kernel: usize,
    pub post_kernel: usize,
    pub istft_n_fft: usize,
    pub istft_hop: usize,
    pub istft_win_length: usize,
    pub subbands: usize,
    pub synth_filter_taps: usize,
    pub speaker_conditioning: SpeakerConditioning,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            upsample_scales: vec![5, 4],
            upsample_kernels: vec![10, 8],
            upsample_initial_channels: 512,
            resblock_kernels: vec![3, 7, 11],
            resblock_dilations: vec![vec![1, 3, 5]; 3],
            pre_kernel: 7,
            post_kernel: 7,
            istft_n_fft: 16,
            istft_hop: 4,
            istft_win_length: 16,
            subbands: 4,
            synth_filter_taps: 63,
            speaker_conditioning: SpeakerConditioning::PreConv,
        }
    }
}

impl DecoderConfig {
    /// Output samples produced per latent frame:
    /// `product(upsample_scales) · istft_hop · subbands`.
    pub fn samples_per_frame(&self) -> usize {
        self.upsample_scales.iter().product::<usize>() * self.istft_hop * self.subbands
    }

    pub fn istft(&self) -> StftConfig {
        StftConfig {
            n_fft: self.istft_n_fft,
            hop: self.istft_hop,
            win_length: self.istft_win_length,
        }
    }

    pub fn bins(&self) -> usize {
        self.istft_n_fft / 2 + 1
    }

    /// Channels of the magnitude/phase head.
    pub fn head_channels(&self) -> usize {
        self.subbands * self.bins() * 2
    }

    pub fn stage_channels(&self, stage: usize) -> usize {
        self.upsample_initial_channels >> stage
    }

    /// Checks the decoder against the analysis hop it must reproduce.
    pub fn validate(&self, analysis_hop: usize) -> Result<()> {
        if self.upsample_scales.is_empty() || self.upsample_scales.contains(&0) {
            return Err(Error::Config("upsample_scales must be non-empty and positive".into()));
        }
        if self.upsample_kernels.len() != self.upsample_scales.len() {
            return Err(Error::Config(format!(
                "{} upsample kernels for {} upsample scales",
                self.upsample_kernels.len(),
                self.upsample_scales.len()
            )));
        }
        for (&k, &s) in self.upsample_kernels.iter().zip(&self.upsample_scales) {
            if k < s || k - s > 2 * (s - 1) {
                return Err(Error::Config(format!(
                    "upsample kernel {k} must lie in [scale, 3·scale - 2] for scale {s}"
                )));
            }
        }
        if self.stage_channels(self.upsample_scales.len()) == 0 {
            return Err(Error::Config(format!(
                "upsample_initial_channels {} cannot be halved {} times",
                self.upsample_initial_channels,
                self.upsample_scales.len()
            )));
        }
        if self.resblock_kernels.is_empty() || self.resblock_kernels.len() != self.resblock_dilations.len() {
            return Err(Error::Config("resblock_kernels and resblock_dilations must pair up".into()));
        }
        if self.resblock_kernels.iter().any(|k| k % 2 == 0)
            || self.pre_kernel.is_multiple_of(2)
            || self.post_kernel.is_multiple_of(2)
            || self.synth_filter_taps.is_multiple_of(2)
        {
            return Err(Error::Config("decoder kernels and synthesis taps must be odd".into()));
        }
        if self.resblock_dilations.iter().any(|d| d.is_empty() || d.contains(&0)) {
            return Err(Error::Config("resblock dilations must be non-empty and positive".into()));
        }
        if self.subbands == 0 {
            return Err(Error::Config("subbands must be positive".into()));
        }
        self.istft()
            .validate()
            .map_err(|e| Error::Config(format!("decoder istft: {e}")))?;
        let produced = self.samples_per_frame();
        if produced != analysis_hop {
            return Err(Error::Config(format!(
                "hop identity violated: product(upsample_scales)·istft_hop·subbands = {} · {} · {} = {produced}, \
                 analysis hop is {analysis_hop}",
                self.upsample_scales.iter().product::<usize>(),
                self.istft_hop,
                self.subbands
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub analysis: AnalysisConfig,
    pub content_dim: usize,
    pub inter_channels: usize,
    pub hidden_channels: usize,
    pub encoder: WaveNetConfig,
    pub gin_channels: usize,
    pub speaker: SpeakerEncoderConfig,
    pub flow: FlowConfig,
    pub decoder: DecoderConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            analysis: AnalysisConfig::default(),
            content_dim: 256,
            inter_channels: 192,
            hidden_channels: 192,
            encoder: WaveNetConfig {
                layers: 16,
                kernel: 5,
                dilation_rate: 1,
            },
            gin_channels: 256,
            speaker: SpeakerEncoderConfig {
                lstm_hidden: 256,
                embedding_dim: 256,
                normalize: true,
            },
            flow: FlowConfig {
                n_flows: 4,
                wavenet: WaveNetConfig {
                    layers: 4,
                    kernel: 5,
                    dilation_rate: 1,
                },
                mean_only: true,
            },
            decoder: DecoderConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.analysis;
        if a.sample_rate != crate::dsp::SAMPLE_RATE {
            return Err(Error::Config(format!(
                "sample rate {} unsupported (expected 16000)",
                a.sample_rate
            )));
        }
        a.stft()
            .validate()
            .map_err(|e| Error::Config(format!("analysis stft: {e}")))?;
        if a.n_mels != crate::dsp::mel::N_MELS {
            return Err(Error::Config(format!("n_mels must be 80, got {}", a.n_mels)));
        }
        if self.inter_channels == 0 || !self.inter_channels.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "inter_channels must be even and positive, got {}",
                self.inter_channels
            )));
        }
        if self.content_dim == 0 || self.hidden_channels == 0 {
            return Err(Error::Config("content_dim and hidden_channels must be positive".into()));
        }
        for (name, wn) in [("encoder", &self.encoder), ("flow.wavenet", &self.flow.wavenet)] {
            if wn.kernel % 2 == 0 || wn.layers == 0 || wn.dilation_rate == 0 {
                return Err(Error::Config(format!(
                    "{name}: kernel must be odd, layers and dilation_rate positive"
                )));
            }
        }
        if self.speaker.embedding_dim != self.gin_channels {
            return Err(Error::Config(format!(
                "speaker embedding_dim {} differs from gin_channels {}",
                self.speaker.embedding_dim, self.gin_channels
            )));
        }
        if self.speaker.lstm_hidden == 0 || self.gin_channels == 0 {
            return Err(Error::Config("speaker encoder sizes must be positive".into()));
        }
        self.decoder.validate(a.hop)
    }
}

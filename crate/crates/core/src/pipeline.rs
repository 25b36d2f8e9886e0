//! Conversion pipeline: content features + target reference → waveform.

use std::time::Instant;

use serde::Serialize;

use crate::config::ModelConfig;
use crate::decoder::Decoder;
use crate::dsp::{mel_spectrogram, Waveform};
use crate::encoders::{ContentEncoder, PosteriorEncoder, SpeakerEmbedding, SpeakerEncoder};
use crate::error::{Error, Result};
use crate::features::ContentFeatures;
use crate::flow::FlowStack;
use crate::nn::{ModelWeights, ParamSource, StrictReader, Tensor3};

pub const DEFAULT_NOISE_SCALE: f32 = 0.333;
pub const MAX_NOISE_SCALE: f32 = 2.0;

#[derive(Debug, Clone)]
pub enum Source {
    Features(ContentFeatures),
    /// Raw audio. Not accepted by [`QuickVc::convert`]: content features must
    /// be extracted beforehand.
    Wave(Waveform),
}

#[derive(Debug, Clone)]
pub enum TargetRef {
    Wave(Waveform),
    Embedding(SpeakerEmbedding),
}

#[derive(Debug, Clone)]
pub struct ConversionRequest {
    pub source: Source,
    pub target: TargetRef,
    pub noise_scale: f32,
    pub seed: u64,
}

impl ConversionRequest {
    pub fn new(source: Source, target: TargetRef) -> Self {
        ConversionRequest {
            source,
            target,
            noise_scale: DEFAULT_NOISE_SCALE,
            seed: 0,
        }
    }

    pub fn with_noise_scale(mut self, noise_scale: f32) -> Self {
        self.noise_scale = noise_scale;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=MAX_NOISE_SCALE).contains(&self.noise_scale) {
            return Err(Error::InvalidArgument(format!(
                "noise_scale must be in [0, {MAX_NOISE_SCALE}], got {}",
                self.noise_scale
            )));
        }
        if let Source::Wave(_) = self.source {
            return Err(Error::Usage(
                "raw waveform sources need a content-feature file; run `qvc-export features` on the source \
                 audio and pass the resulting .qvcf"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Wall time per stage of one conversion, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub speaker_encoder: f64,
    pub content_encoder: f64,
    pub flow: f64,
    pub decoder: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.speaker_encoder + self.content_encoder + self.flow + self.decoder
    }
}

#[derive(Debug, Clone)]
pub struct QuickVc {
    config: ModelConfig,
    pub content_encoder: ContentEncoder,
    pub posterior_encoder: PosteriorEncoder,
    pub speaker_encoder: SpeakerEncoder,
    pub flow: FlowStack,
    pub decoder: Decoder,
}

impl QuickVc {
    /// Constructs every sub-network from `src`, in a fixed order.
    pub fn build(src: &mut dyn ParamSource, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(QuickVc {
            config: config.clone(),
            content_encoder: ContentEncoder::load(src, config)?,
            posterior_encoder: PosteriorEncoder::load(src, config)?,
            speaker_encoder: SpeakerEncoder::load(src, config)?,
            flow: FlowStack::load(src, config)?,
            decoder: Decoder::load(src, config)?,
        })
    }

    /// Builds from a container. Every tensor must have exactly the expected
    /// shape and none may be left unread.
    pub fn from_weights(weights: &ModelWeights) -> Result<Self> {
        let mut reader = StrictReader::new(weights);
        let model = Self::build(&mut reader, &weights.config)?;
        reader.finish()?;
        log::debug!(
            "built model from {} tensors ({} parameters)",
            weights.len(),
            weights.parameter_count()
        );
        Ok(model)
    }

    pub fn random(config: &ModelConfig, seed: u64) -> Result<Self> {
        Self::from_weights(&crate::init::random_weights(config, seed)?)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn speaker_embedding(&self, target: &TargetRef) -> Result<SpeakerEmbedding> {
        match target {
            TargetRef::Embedding(g) => {
                if g.dim() != self.config.gin_channels {
                    return Err(Error::Shape(format!(
                        "speaker embedding has {} dims, model expects {}",
                        g.dim(),
                        self.config.gin_channels
                    )));
                }
                Ok(g.clone())
            }
            TargetRef::Wave(w) => self.speaker_encoder.forward(&mel_spectrogram(w)?),
        }
    }

    /// Prior sample through the inverse flow: the decoder input for `features`.
    pub fn latent(&self, features: &ContentFeatures, g: &SpeakerEmbedding, noise_scale: f32, seed: u64) -> Result<Tensor3> {
        let mut prior = self.content_encoder.forward(features)?;
        let z_p = prior.sample_seeded(seed, noise_scale)?.clone();
        self.flow.inverse(&z_p, g)
    }

    pub fn convert(&self, req: &ConversionRequest) -> Result<Waveform> {
        self.convert_timed(req).map(|(w, _)| w)
    }

    pub fn convert_timed(&self, req: &ConversionRequest) -> Result<(Waveform, StageTimings)> {
        req.validate()?;
        let Source::Features(features) = &req.source else {
            unreachable!("validated above")
        };
        let mut t = StageTimings::default();

        let start = Instant::now();
        let g = self.speaker_embedding(&req.target)?;
        t.speaker_encoder = start.elapsed().as_secs_f64();

        let start = Instant::now();
        let mut prior = self.content_encoder.forward(features)?;
        let z_p = prior.sample_seeded(req.seed, req.noise_scale)?.clone();
        t.content_encoder = start.elapsed().as_secs_f64();

        let start = Instant::now();
        let z = self.flow.inverse(&z_p, &g)?;
        t.flow = start.elapsed().as_secs_f64();

        let start = Instant::now();
        let wave = self.decoder.forward(&z, &g)?;
        t.decoder = start.elapsed().as_secs_f64();

        let expected = features.frames() * self.config.analysis.hop;
        if wave.len() != expected {
            return Err(Error::Shape(format!(
                "decoder produced {} samples, expected {expected}",
                wave.len()
            )));
        }
        Ok((wave, t))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HopIdentity {
    pub upsample_product: usize,
    pub istft_hop: usize,
    pub subbands: usize,
    pub samples_per_frame: usize,
    pub analysis_hop: usize,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InspectReport {
    pub schema: &'static str,
    pub config: ModelConfig,
    pub tensor_count: usize,
    pub parameter_count: usize,
    pub hop_identity: HopIdentity,
    /// Whether the tensor table matches what the network reads.
    pub manifest_ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest_error: Option<String>,
}

impl InspectReport {
    pub fn ok(&self) -> bool {
        self.hop_identity.ok && self.manifest_ok
    }
}

pub fn inspect(weights: &ModelWeights) -> InspectReport {
    let d = &weights.config.decoder;
    let hop_error = d.validate(weights.config.analysis.hop).err().map(|e| e.to_string());
    let manifest_error = match &hop_error {
        Some(_) => Some("skipped: hop identity violated".to_string()),
        None => QuickVc::from_weights(weights).err().map(|e| e.to_string()),
    };
    InspectReport {
        schema: "quickvc.inspect.v1",
        config: weights.config.clone(),
        tensor_count: weights.len(),
        parameter_count: weights.parameter_count(),
        hop_identity: HopIdentity {
            upsample_product: d.upsample_scales.iter().product(),
            istft_hop: d.istft_hop,
            subbands: d.subbands,
            samples_per_frame: d.samples_per_frame(),
            analysis_hop: weights.config.analysis.hop,
            ok: hop_error.is_none(),
            error: hop_error,
        },
        manifest_ok: manifest_error.is_none(),
        manifest_error,
    }
}

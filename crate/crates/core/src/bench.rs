//! Throughput measurement in kHz of generated audio.
//!
//! Inputs are synthetic: `seconds · 50` frames of standard-normal content
//! features and, in full mode, a noise reference clip of the same duration.
//! One untimed warm-up pass precedes [`REPETITIONS`] timed passes and the
//! median wall time is reported.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dsp::Waveform;
use crate::encoders::{standard_normal, SpeakerEmbedding};
use crate::error::{Error, Result};
use crate::features::{ContentFeatures, FRAME_RATE};
use crate::nn::Tensor3;
use crate::pipeline::{ConversionRequest, QuickVc, Source, StageTimings, TargetRef, DEFAULT_NOISE_SCALE};

pub const SCHEMA: &str = "quickvc.bench.v1";
pub const WARMUP_RUNS: usize = 1;
pub const REPETITIONS: usize = 5;
/// Published reference throughput, for side-by-side printing only.
pub const REFERENCE_CPU_KHZ: f64 = 280.00;
pub const REFERENCE_GPU_KHZ: f64 = 5320.78;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMode {
    /// Speaker encoder, content encoder, flow and decoder.
    Full,
    /// Decoder only, from a random latent and embedding.
    DecoderOnly,
}

impl std::fmt::Display for BenchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BenchMode::Full => "full",
            BenchMode::DecoderOnly => "decoder-only",
        })
    }
}

impl std::str::FromStr for BenchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(BenchMode::Full),
            "decoder-only" => Ok(BenchMode::DecoderOnly),
            other => Err(Error::InvalidArgument(format!(
                "unknown bench mode {other:?} (expected full or decoder-only)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchOptions {
    pub seconds: f64,
    pub threads: usize,
    pub mode: BenchMode,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            seconds: 10.0,
            threads: 1,
            mode: BenchMode::Full,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceKhz {
    pub cpu: f64,
    pub gpu: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema: String,
    pub mode: BenchMode,
    pub seconds_of_features: f64,
    pub frames_per_stream: usize,
    pub threads: usize,
    pub intra_op_parallel: bool,
    pub warmup_runs: usize,
    pub repetitions: usize,
    /// Output samples per repetition, summed over streams.
    pub samples: usize,
    /// Median wall time of one repetition.
    pub wall_seconds: f64,
    pub khz_generated: f64,
    pub real_time_factor: f64,
    pub rep_wall_seconds: Vec<f64>,
    /// Per-stage times of the median repetition, summed over streams.
    pub stage_seconds: StageSeconds,
    /// `wall / Σ stage − 1` for the median repetition (single stream only).
    pub harness_overhead: Option<f64>,
    pub reference_khz: ReferenceKhz,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StageSeconds {
    pub speaker_encoder: f64,
    pub content_encoder: f64,
    pub flow: f64,
    pub decoder: f64,
}

impl From<StageTimings> for StageSeconds {
    fn from(t: StageTimings) -> Self {
        StageSeconds {
            speaker_encoder: t.speaker_encoder,
            content_encoder: t.content_encoder,
            flow: t.flow,
            decoder: t.decoder,
        }
    }
}

impl BenchReport {
    pub fn summary(&self) -> String {
        format!(
            "{}: {} samples in {:.4} s -> {:.2} kHz (RTF {:.2}, {} thread(s)); reference {:.2} kHz CPU, {:.2} kHz GPU",
            self.mode,
            self.samples,
            self.wall_seconds,
            self.khz_generated,
            self.real_time_factor,
            self.threads,
            self.reference_khz.cpu,
            self.reference_khz.gpu
        )
    }
}

enum StreamInput {
    Full(ConversionRequest),
    Decoder { z: Tensor3, g: SpeakerEmbedding },
}

fn make_input(model: &QuickVc, frames: usize, mode: BenchMode, seed: u64) -> Result<StreamInput> {
    let cfg = model.config();
    match mode {
        BenchMode::Full => {
            let features = ContentFeatures::new(frames, standard_normal(frames * cfg.content_dim, seed))?;
            let reference: Vec<f32> = standard_normal(frames * cfg.analysis.hop, seed ^ 0x5eed)
                .into_iter()
                .map(|v| 0.1 * v)
                .collect();
            let req = ConversionRequest::new(
                Source::Features(features),
                TargetRef::Wave(Waveform::new(reference)?),
            )
            .with_noise_scale(DEFAULT_NOISE_SCALE)
            .with_seed(seed);
            Ok(StreamInput::Full(req))
        }
        BenchMode::DecoderOnly => {
            let z = Tensor3::new(
                standard_normal(cfg.inter_channels * frames, seed),
                (1, cfg.inter_channels, frames),
            )?;
            let g = SpeakerEmbedding::normalized(standard_normal(cfg.gin_channels, seed ^ 0x5eed))?;
            Ok(StreamInput::Decoder { z, g })
        }
    }
}

fn run_stream(model: &QuickVc, input: &StreamInput) -> Result<(usize, StageTimings)> {
    match input {
        StreamInput::Full(req) => model.convert_timed(req).map(|(w, t)| (w.len(), t)),
        StreamInput::Decoder { z, g } => {
            let start = Instant::now();
            let w = model.decoder.forward(z, g)?;
            let t = StageTimings {
                decoder: start.elapsed().as_secs_f64(),
                ..Default::default()
            };
            Ok((w.len(), t))
        }
    }
}

fn run_rep(model: &QuickVc, inputs: &[StreamInput]) -> Result<(f64, usize, StageTimings)> {
    let start = Instant::now();
    let results: Vec<Result<(usize, StageTimings)>> = if inputs.len() == 1 {
        vec![run_stream(model, &inputs[0])]
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = inputs
                .iter()
                .map(|input| s.spawn(move || run_stream(model, input)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::Numerical("bench stream panicked".into()))))
                .collect()
        })
    };
    let wall = start.elapsed().as_secs_f64();
    let mut samples = 0;
    let mut stages = StageTimings::default();
    for r in results {
        let (n, t) = r?;
        samples += n;
        stages.speaker_encoder += t.speaker_encoder;
        stages.content_encoder += t.content_encoder;
        stages.flow += t.flow;
        stages.decoder += t.decoder;
    }
    Ok((wall, samples, stages))
}

pub fn bench(model: &QuickVc, opts: &BenchOptions) -> Result<BenchReport> {
    if opts.threads == 0 {
        return Err(Error::InvalidArgument("threads must be at least 1".into()));
    }
    if !(opts.seconds.is_finite() && opts.seconds > 0.0) {
        return Err(Error::InvalidArgument(format!("seconds must be positive, got {}", opts.seconds)));
    }
    let frames = ((opts.seconds * FRAME_RATE).round() as usize).max(1);
    let inputs = (0..opts.threads)
        .map(|i| make_input(model, frames, opts.mode, opts.seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;

    for _ in 0..WARMUP_RUNS {
        run_rep(model, &inputs)?;
    }
    let mut reps = Vec::with_capacity(REPETITIONS);
    for i in 0..REPETITIONS {
        let rep = run_rep(model, &inputs)?;
        log::info!("bench rep {}/{REPETITIONS}: {:.4} s", i + 1, rep.0);
        reps.push(rep);
    }
    let rep_wall_seconds: Vec<f64> = reps.iter().map(|r| r.0).collect();
    let mut order: Vec<usize> = (0..reps.len()).collect();
    order.sort_by(|&a, &b| reps[a].0.total_cmp(&reps[b].0));
    let (wall, samples, stages) = reps[order[order.len() / 2]];

    let khz = samples as f64 / wall / 1000.0;
    Ok(BenchReport {
        schema: SCHEMA.into(),
        mode: opts.mode,
        seconds_of_features: opts.seconds,
        frames_per_stream: frames,
        threads: opts.threads,
        intra_op_parallel: crate::par::parallel_enabled(),
        warmup_runs: WARMUP_RUNS,
        repetitions: REPETITIONS,
        samples,
        wall_seconds: wall,
        khz_generated: khz,
        real_time_factor: khz / (crate::dsp::SAMPLE_RATE as f64 / 1000.0),
        rep_wall_seconds,
        stage_seconds: stages.into(),
        harness_overhead: (opts.threads == 1).then(|| wall / stages.total() - 1.0),
        reference_khz: ReferenceKhz {
            cpu: REFERENCE_CPU_KHZ,
            gpu: REFERENCE_GPU_KHZ,
        },
    })
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::{json, Map, Value};

use quickvc_core::audio::{wav_read, wav_write};
use quickvc_core::bench::{bench, BenchMode, BenchOptions};
use quickvc_core::dsp::{istft, stft, MelSpectrogram, StftConfig};
use quickvc_core::encoders::SpeakerEmbedding;
use quickvc_core::features::{ContentFeatures, FeatureMatrix};
use quickvc_core::init::random_weights;
use quickvc_core::losses::{self, GeneratorTerms, KlTerms, LossWeighting};
use quickvc_core::pipeline::{inspect, Source, TargetRef};
use quickvc_core::{par, ConversionRequest, Error, ModelConfig, ModelWeights, QuickVc};

#[derive(Parser)]
#[command(name = "quickvc", version, about = "Voice-conversion inference engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert source content features to the voice of a target reference.
    Convert(ConvertArgs),
    /// Measure synthesis throughput in kHz of generated audio.
    Bench(BenchArgs),
    /// Print a JSON summary of a weight container and validate it.
    Inspect {
        model: PathBuf,
    },
    /// Evaluate training losses on tensors stored as QVCF matrices.
    AuditLoss(AuditArgs),
    /// DSP utilities.
    Dsp {
        #[command(subcommand)]
        command: DspCommand,
    },
    /// Write a container with seeded random weights.
    Init {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON model config; defaults to the built-in configuration.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    model: PathBuf,
    /// Source content features (QVCF).
    #[arg(long, required_unless_present = "source_wav", conflicts_with = "source_wav")]
    features: Option<PathBuf>,
    /// Raw source audio. Features must be extracted first; see the error message.
    #[arg(long)]
    source_wav: Option<PathBuf>,
    /// Target speaker reference audio.
    #[arg(long, required_unless_present = "ref_embedding", conflicts_with = "ref_embedding")]
    ref_wav: Option<PathBuf>,
    /// Target speaker embedding as a 1 x 256 QVCF matrix.
    #[arg(long)]
    ref_embedding: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = quickvc_core::pipeline::DEFAULT_NOISE_SCALE)]
    noise_scale: f32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    DecoderOnly,
}

#[derive(Args)]
struct BenchArgs {
    /// Weight container; random weights are used when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    init_seed: u64,
    #[arg(long, default_value_t = 10.0)]
    seconds: f64,
    /// Independent streams, one per thread.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also parallelize inside each layer.
    #[arg(long)]
    intra_op: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long, requires = "mel_pred")]
    mel_target: Option<PathBuf>,
    #[arg(long, requires = "mel_target")]
    mel_pred: Option<PathBuf>,

    #[arg(long, requires_all = ["m_q", "logs_q", "z_p", "m_p", "logs_p"])]
    z_q: Option<PathBuf>,
    #[arg(long)]
    m_q: Option<PathBuf>,
    #[arg(long)]
    logs_q: Option<PathBuf>,
    #[arg(long)]
    z_p: Option<PathBuf>,
    #[arg(long)]
    m_p: Option<PathBuf>,
    #[arg(long)]
    logs_p: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    logdet: f64,

    /// Logits of one sub-discriminator on real audio (repeatable).
    #[arg(long)]
    d_real: Vec<PathBuf>,
    /// Logits of one sub-discriminator on generated audio (repeatable).
    #[arg(long)]
    d_fake: Vec<PathBuf>,
    /// One real feature-map layer (repeatable).
    #[arg(long)]
    fmap_real: Vec<PathBuf>,
    /// One generated feature-map layer (repeatable).
    #[arg(long)]
    fmap_fake: Vec<PathBuf>,

    /// Unweighted sum for the generator total.
    #[arg(long)]
    paper_exact: bool,
}

#[derive(Subcommand)]
enum DspCommand {
    /// STFT then iSTFT a WAV file and report the reconstruction error.
    Roundtrip {
        input: PathBuf,
        #[arg(long, default_value_t = 1280)]
        n_fft: usize,
        #[arg(long, default_value_t = 320)]
        hop: usize,
        #[arg(long, default_value_t = 1280)]
        win_length: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_model(path: &Path) -> anyhow::Result<QuickVc> {
    let weights = ModelWeights::load(path)?;
    info!("loaded {} tensors from {}", weights.len(), path.display());
    Ok(QuickVc::from_weights(&weights)?)
}

fn convert(a: ConvertArgs) -> anyhow::Result<()> {
    par::set_parallel(false);
    let model = load_model(&a.model)?;
    let source = match (&a.features, &a.source_wav) {
        (Some(f), _) => Source::Features(ContentFeatures::load(f)?),
        (None, Some(w)) => Source::Wave(wav_read(w)?),
        (None, None) => unreachable!("clap requires one source"),
    };
    let target = match (&a.ref_wav, &a.ref_embedding) {
        (Some(w), _) => TargetRef::Wave(wav_read(w)?),
        (None, Some(e)) => {
            let m = FeatureMatrix::load(e)?;
            if m.rows != 1 {
                bail!("{}: embedding file must hold a single row, found {}", e.display(), m.rows);
            }
            TargetRef::Embedding(SpeakerEmbedding::new(m.data)?)
        }
        (None, None) => unreachable!("clap requires one target"),
    };
    let req = ConversionRequest::new(source, target)
        .with_noise_scale(a.noise_scale)
        .with_seed(a.seed);
    let (wave, t) = model.convert_timed(&req)?;
    info!("converted {} samples in {:.3} s", wave.len(), t.total());
    wav_write(&a.out, &wave)?;
    Ok(())
}

fn run_bench(a: BenchArgs) -> anyhow::Result<()> {
    par::set_parallel(a.intra_op);
    let model = match &a.model {
        Some(p) => load_model(p)?,
        None => QuickVc::random(&ModelConfig::default(), a.init_seed)?,
    };
    let opts = BenchOptions {
        seconds: a.seconds,
        threads: a.threads,
        mode: match a.mode {
            ModeArg::Full => BenchMode::Full,
            ModeArg::DecoderOnly => BenchMode::DecoderOnly,
        },
        seed: a.seed,
    };
    let report = bench(&model, &opts)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("{}", report.summary());
    }
    Ok(())
}

fn run_inspect(path: &Path) -> anyhow::Result<ExitCode> {
    let weights = ModelWeights::load(path)?;
    let report = inspect(&weights);
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(e) = &report.hop_identity.error {
        eprintln!("error: {e}");
    } else if let Some(e) = &report.manifest_error {
        eprintln!("error: {e}");
    }
    Ok(if report.ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn matrix_f64(path: &Path) -> anyhow::Result<(FeatureMatrix, Vec<f64>)> {
    let m = FeatureMatrix::load(path)?;
    let v = m.data.iter().map(|&x| x as f64).collect();
    Ok((m, v))
}

fn flat(path: &Path) -> anyhow::Result<Vec<f64>> {
    Ok(matrix_f64(path)?.1)
}

fn audit(a: AuditArgs) -> anyhow::Result<()> {
    let mut report = Map::new();
    report.insert("schema".into(), json!("quickvc.loss.v1"));
    let weighting = if a.paper_exact {
        LossWeighting::PaperExact
    } else {
        LossWeighting::Weighted
    };
    report.insert("weighting".into(), serde_json::to_value(weighting)?);

    let mut recon = None;
    if let (Some(t), Some(p)) = (&a.mel_target, &a.mel_pred) {
        let mel = |path: &Path| -> anyhow::Result<MelSpectrogram> {
            let (m, v) = matrix_f64(path)?;
            MelSpectrogram::new(v, m.rows, m.dim).with_context(|| path.display().to_string())
        };
        let r = losses::recon_loss(&mel(t)?, &mel(p)?)?;
        report.insert("recon".into(), json!(r));
        recon = Some(r);
    }

    let mut kl = None;
    if let Some(z_q) = &a.z_q {
        let need = |p: &Option<PathBuf>| flat(p.as_deref().expect("clap enforces requires_all"));
        let (z_q, m_q, logs_q) = (flat(z_q)?, need(&a.m_q)?, need(&a.logs_q)?);
        let (z_p, m_p, logs_p) = (need(&a.z_p)?, need(&a.m_p)?, need(&a.logs_p)?);
        let k = losses::kl_loss(&KlTerms {
            z_q: &z_q,
            m_q: &m_q,
            logs_q: &logs_q,
            z_p: &z_p,
            m_p: &m_p,
            logs_p: &logs_p,
            logdet: a.logdet,
        })?;
        report.insert("kl".into(), json!(k));
        kl = Some(k);
    }

    let mut adv = None;
    if !a.d_real.is_empty() || !a.d_fake.is_empty() {
        let real = a.d_real.iter().map(|p| flat(p)).collect::<anyhow::Result<Vec<_>>>()?;
        let fake = a.d_fake.iter().map(|p| flat(p)).collect::<anyhow::Result<Vec<_>>>()?;
        let g = losses::adv_loss_g(&fake)?;
        report.insert("adv_g".into(), json!(g));
        if !real.is_empty() {
            report.insert("adv_d".into(), json!(losses::adv_loss_d(&real, &fake)?));
        }
        adv = Some(g);
    }

    let mut fm = None;
    if !a.fmap_real.is_empty() || !a.fmap_fake.is_empty() {
        let real = a.fmap_real.iter().map(|p| flat(p)).collect::<anyhow::Result<Vec<_>>>()?;
        let fake = a.fmap_fake.iter().map(|p| flat(p)).collect::<anyhow::Result<Vec<_>>>()?;
        let f = losses::feature_matching_loss(&[real], &[fake])?;
        report.insert("fm".into(), json!(f));
        fm = Some(f);
    }

    if let (Some(recon), Some(kl), Some(adv), Some(fm)) = (recon, kl, adv, fm) {
        let terms = GeneratorTerms { recon, kl, adv, fm };
        report.insert("generator_total".into(), json!(losses::generator_total(&terms, weighting)));
    }
    if report.len() == 2 {
        bail!("no loss inputs given; see `quickvc audit-loss --help`");
    }
    println!("{}", serde_json::to_string_pretty(&Value::Object(report))?);
    Ok(())
}

fn roundtrip(input: &Path, cfg: StftConfig, out: Option<&Path>) -> anyhow::Result<()> {
    let wave = wav_read(input)?;
    let x = wave.samples();
    let spec = stft(x, cfg)?;
    let y = istft(&spec)?;
    let lo = cfg.win_length.min(y.len());
    let hi = y.len().saturating_sub(cfg.win_length).max(lo);
    let (mut err, mut norm, mut max_abs) = (0.0f64, 0.0f64, 0.0f64);
    for i in lo..hi {
        let d = y[i] - x[i] as f64;
        err += d * d;
        norm += (x[i] as f64).powi(2);
        max_abs = max_abs.max(d.abs());
    }
    let rel = if norm > 0.0 { (err / norm).sqrt() } else { err.sqrt() };
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "input_samples": x.len(),
            "frames": spec.n_frames(),
            "output_samples": y.len(),
            "interior": [lo, hi],
            "relative_l2_interior": rel,
            "max_abs_interior": max_abs,
        }))?
    );
    if let Some(out) = out {
        wav_write(out, &quickvc_core::Waveform::from_f64(&y)?)?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Convert(a) => convert(a)?,
        Command::Bench(a) => run_bench(a)?,
        Command::Inspect { model } => return run_inspect(&model),
        Command::AuditLoss(a) => audit(a)?,
        Command::Dsp {
            command:
                DspCommand::Roundtrip {
                    input,
                    n_fft,
                    hop,
                    win_length,
                    out,
                },
        } => roundtrip(&input, StftConfig::new(n_fft, hop, win_length)?, out.as_deref())?,
        Command::Init { out, seed, config } => {
            let cfg = match config {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                None => ModelConfig::default(),
            };
            let w = random_weights(&cfg, seed)?;
            w.save(&out)?;
            info!("wrote {} tensors to {}", w.len(), out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QVC_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Usage(_)) | Some(Error::InvalidArgument(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

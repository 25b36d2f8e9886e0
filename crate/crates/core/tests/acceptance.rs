//! One PASS/FAIL line per acceptance criterion; the test fails if any line
//! fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use quickvc_core::audio::{wav_from_bytes, wav_to_bytes};
use quickvc_core::bench::{bench, BenchMode, BenchOptions, REFERENCE_CPU_KHZ, REFERENCE_GPU_KHZ};
use quickvc_core::config::{FlowConfig, WaveNetConfig};
use quickvc_core::dsp::mel::LOG_FLOOR;
use quickvc_core::dsp::{istft, sr_resize, stft, MelSpectrogram, StftConfig};
use quickvc_core::encoders::{standard_normal, SpeakerEmbedding};
use quickvc_core::features::{ContentFeatures, FeatureMatrix};
use quickvc_core::flow::FlowStack;
use quickvc_core::init::{random_weights, RandomInit};
use quickvc_core::losses::*;
use quickvc_core::nn::{conv1d, conv_transpose1d, ConvParams, TransposeParams};
use quickvc_core::pipeline::{Source, TargetRef};
use quickvc_core::{par, ConversionRequest, Error, ModelConfig, ModelWeights, QuickVc, Tensor3, Waveform};
use rand::Rng;

type Outcome = Result<String, String>;

/// Writes to the process stdout directly so the report shows up even when the
/// test harness captures output.
fn report(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn interior_rel_l2(x: &[f64], y: &[f64], margin: usize) -> f64 {
    let (mut e, mut n) = (0.0, 0.0);
    for i in margin..y.len() - margin {
        e += (x[i] - y[i]).powi(2);
        n += x[i] * x[i];
    }
    (e / n).sqrt()
}

fn stft_reconstruction() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1000);
    let mut worst = 0.0f64;
    for (n_fft, hop) in [(1280, 320), (16, 4)] {
        let cfg = StftConfig::new(n_fft, hop, n_fft).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            let x = uniform(&mut r, 16000, -1.0, 1.0);
            let y = istft(&stft(&x, cfg).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            worst = worst.max(interior_rel_l2(&x, &y, n_fft));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(worst < 1e-6, || format!("worst interior error {worst:.3e}"))?;
    ensure(elapsed < 10.0, || format!("took {elapsed:.2} s"))?;
    Ok(format!("worst interior error {worst:.2e}, {elapsed:.2} s"))
}

fn random_flow(seed: u64, channels: usize, hidden: usize, gin: usize, mean_only: bool) -> FlowStack {
    let cfg = FlowConfig {
        n_flows: 3,
        wavenet: WaveNetConfig {
            layers: 2,
            kernel: 3,
            dilation_rate: 2,
        },
        mean_only,
    };
    let mut src = RandomInit::new(ModelConfig::default(), seed);
    FlowStack::load_with(&mut src, "flow", channels, hidden, gin, &cfg).unwrap()
}

fn flow_invertibility() -> Outcome {
    let mut worst = 0.0f32;
    for case in 0..1000u64 {
        let mut r = rng(5000 + case);
        let channels = 2 * r.random_range(1..4);
        let t = r.random_range(1..10);
        let mean_only = case % 4 == 0;
        let flow = random_flow(case, channels, 6, 4, mean_only);
        let g = SpeakerEmbedding::normalized(uniform_f32(&mut r, 4, 1.0)).unwrap();
        let z = Tensor3::new(uniform_f32(&mut r, channels * t, 2.0), (1, channels, t)).unwrap();
        let (y, logdet) = flow.forward(&z, &g).map_err(|e| e.to_string())?;
        let back = flow.inverse(&y, &g).map_err(|e| e.to_string())?;
        let err = z.data().iter().zip(back.data()).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
        worst = worst.max(err);
        ensure(!mean_only || logdet == 0.0, || format!("case {case}: mean-only logdet {logdet}"))?;
    }
    ensure(worst < 1e-5, || format!("max inverse error {worst:.3e}"))?;

    let (channels, t) = (4, 2);
    let n = channels * t;
    let mut worst_fd = 0.0f64;
    for seed in 0..10u64 {
        let flow = random_flow(900 + seed, channels, 8, 3, false);
        let mut r = rng(seed);
        let g = SpeakerEmbedding::normalized(uniform_f32(&mut r, 3, 1.0)).unwrap();
        let z = uniform(&mut r, n, -1.0, 1.0);
        let run = |v: &[f64]| {
            let t32 = Tensor3::new(v.iter().map(|&x| x as f32).collect(), (1, channels, t)).unwrap();
            let (out, logdet) = flow.forward(&t32, &g).unwrap();
            (out.data().iter().map(|&x| x as f64).collect::<Vec<_>>(), logdet)
        };
        let (_, logdet) = run(&z);
        let h = 1e-2;
        let mut jac = vec![0.0; n * n];
        for j in 0..n {
            let (mut p, mut m) = (z.clone(), z.clone());
            p[j] += h;
            m[j] -= h;
            let (fp, _) = run(&p);
            let (fm, _) = run(&m);
            for i in 0..n {
                jac[i * n + j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        worst_fd = worst_fd.max((log_abs_det(jac, n) - logdet).abs());
    }
    ensure(worst_fd < 1e-4, || format!("logdet vs finite difference {worst_fd:.3e}"))?;
    Ok(format!("inverse error {worst:.2e}, logdet fd error {worst_fd:.2e}, mean-only logdet 0"))
}

fn hop_identity(weights: &ModelWeights, model: &QuickVc) -> Outcome {
    let mut bad = Vec::new();
    let mut a = weights.clone();
    a.config.decoder.upsample_scales = vec![5, 5];
    a.config.decoder.upsample_kernels = vec![10, 10];
    bad.push(a);
    let mut b = weights.clone();
    b.config.decoder.upsample_scales = vec![4, 4];
    b.config.decoder.upsample_kernels = vec![8, 8];
    bad.push(b);
    let mut c = weights.clone();
    c.config.decoder.subbands = 2;
    bad.push(c);
    let mut d = weights.clone();
    d.config.decoder.upsample_scales = vec![5, 4, 2];
    d.config.decoder.upsample_kernels = vec![10, 8, 4];
    bad.push(d);
    for (i, w) in bad.iter().enumerate() {
        match QuickVc::from_weights(w) {
            Err(Error::Config(msg)) if msg.contains("hop identity") => {}
            Err(e) => return Err(format!("variant {i}: unexpected error {e}")),
            Ok(_) => return Err(format!("variant {i} accepted")),
        }
    }
    let g = SpeakerEmbedding::normalized(standard_normal(256, 3)).unwrap();
    for t in [1, 7, 51] {
        let feats = ContentFeatures::new(t, standard_normal(t * 256, t as u64)).unwrap();
        let req = ConversionRequest::new(Source::Features(feats), TargetRef::Embedding(g.clone()));
        let out = model.convert(&req).map_err(|e| e.to_string())?;
        ensure(out.len() == 320 * t, || format!("T={t}: {} samples", out.len()))?;
    }
    Ok(format!("{} violating configs rejected, lengths 320*T for T in 1,7,51", bad.len()))
}

fn loss_oracles() -> Outcome {
    let mut r = rng(77);
    let mut worst = 0.0f64;
    let mut track = |got: f64, want: f64| worst = worst.max(rel_err(got, want));
    for _ in 0..50 {
        let n = r.random_range(1..40);
        let a = uniform(&mut r, n, -3.0, 3.0);
        let b = uniform(&mut r, n, -3.0, 3.0);
        track(l1_mean(&a, &b).unwrap(), l1_oracle(&a, &b));

        let frames = r.random_range(1..4);
        let mt = MelSpectrogram::new(uniform(&mut r, 80 * frames, -11.0, 2.0), frames, 80).unwrap();
        let mp = MelSpectrogram::new(uniform(&mut r, 80 * frames, -11.0, 2.0), frames, 80).unwrap();
        track(recon_loss(&mt, &mp).unwrap(), l1_oracle(mt.data(), mp.data()));

        let v: Vec<Vec<f64>> = (0..6).map(|_| uniform(&mut r, n, -1.5, 1.5)).collect();
        let logdet = r.random_range(-3.0..3.0);
        let terms = KlTerms {
            z_q: &v[0],
            m_q: &v[1],
            logs_q: &v[2],
            z_p: &v[3],
            m_p: &v[4],
            logs_p: &v[5],
            logdet,
        };
        track(kl_loss(&terms).unwrap(), kl_oracle(&v[0], &v[1], &v[2], &v[3], &v[4], &v[5], logdet));
        let gk_want = (0..n)
            .map(|i| gaussian_kl_oracle(v[1][i], v[2][i].exp(), v[4][i], v[5][i].exp()))
            .sum::<f64>()
            / n as f64;
        track(gaussian_kl(&v[1], &v[2], &v[4], &v[5]).unwrap(), gk_want);

        let lens: Vec<usize> = (0..r.random_range(1..4)).map(|_| r.random_range(1..10)).collect();
        let real: Vec<Vec<f64>> = lens.iter().map(|&k| uniform(&mut r, k, -2.0, 2.0)).collect();
        let fake: Vec<Vec<f64>> = lens.iter().map(|&k| uniform(&mut r, k, -2.0, 2.0)).collect();
        track(adv_loss_g(&fake).unwrap(), lsgan_g_oracle(&fake));
        track(adv_loss_d(&real, &fake).unwrap(), lsgan_d_oracle(&real, &fake));
        let fr = vec![real.clone(), fake.clone()];
        let ff = vec![fake, real];
        track(feature_matching_loss(&fr, &ff).unwrap(), fm_oracle(&fr, &ff));
    }
    ensure(worst < 1e-9, || format!("worst oracle deviation {worst:.3e}"))?;

    let m_q = [0.3, -0.2, 0.5, 0.0];
    let logs_q = [-0.1, 0.2, 0.0, -0.3];
    let m_p = [0.0, 0.1, -0.4, 0.2];
    let logs_p = [0.1, 0.0, 0.3, -0.2];
    let mc = kl_loss_monte_carlo(&m_q, &logs_q, &m_p, &logs_p, 100_000, 11).unwrap();
    let exact = gaussian_kl(&m_q, &logs_q, &m_p, &logs_p).unwrap();
    let mc_err = rel_err(mc, exact);
    ensure(mc_err < 0.01, || format!("monte-carlo kl off by {:.2}%", 100.0 * mc_err))?;

    let ones = GeneratorTerms {
        recon: 1.0,
        kl: 1.0,
        adv: 1.0,
        fm: 1.0,
    };
    let total = generator_total(&ones, LossWeighting::PaperExact);
    ensure(total == 4.0, || format!("generator_total(1,1,1,1) = {total}"))?;
    Ok(format!("oracle deviation {worst:.1e}, monte-carlo kl {:.3}%, total 4", 100.0 * mc_err))
}

fn adjoint_case(seed: u64) -> Option<f64> {
    let mut r = rng(seed);
    let c_in = r.random_range(1..6);
    let c_out = r.random_range(1..6);
    let k: usize = r.random_range(1..8);
    let stride: usize = r.random_range(1..4);
    let padding: usize = r.random_range(0..k);
    let t_out: usize = r.random_range(1..12);
    let t = ((t_out - 1) * stride + k) as isize - 2 * padding as isize;
    if t < 1 {
        return None;
    }
    let t = t as usize;
    let x = uniform_f32(&mut r, c_in * t, 1.0);
    let y = uniform_f32(&mut r, c_out * t_out, 1.0);
    let w = uniform_f32(&mut r, c_out * c_in * k, 1.0);
    let conv = ConvParams {
        stride,
        dilation: 1,
        padding,
    };
    let ax = conv1d(&Tensor3::new(x.clone(), (1, c_in, t)).ok()?, &w, (c_out, c_in, k), None, conv).ok()?;
    let aty = conv_transpose1d(
        &Tensor3::new(y.clone(), (1, c_out, t_out)).ok()?,
        &w,
        (c_out, c_in, k),
        None,
        TransposeParams::new(stride, padding),
    )
    .ok()?;
    let dot = |a: &[f32], b: &[f32]| a.iter().zip(b).map(|(&p, &q)| p as f64 * q as f64).sum::<f64>();
    let lhs = dot(ax.data(), &y);
    let rhs = dot(&x, aty.data());
    Some((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0))
}

fn adjoint_identity() -> Outcome {
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut seed = 40_000;
    while checked < 200 {
        if let Some(e) = adjoint_case(seed) {
            worst = worst.max(e);
            checked += 1;
        }
        seed += 1;
    }
    ensure(worst < 1e-5, || format!("worst adjoint mismatch {worst:.3e}"))?;
    Ok(format!("{checked} cases, worst mismatch {worst:.2e}"))
}

fn throughput(model: &QuickVc) -> Outcome {
    let start = Instant::now();
    let was = par::parallel_enabled();
    par::set_parallel(false);
    let full = bench(model, &BenchOptions::default());
    let dec = bench(
        model,
        &BenchOptions {
            mode: BenchMode::DecoderOnly,
            ..BenchOptions::default()
        },
    );
    par::set_parallel(was);
    let (full, dec) = (full.map_err(|e| e.to_string())?, dec.map_err(|e| e.to_string())?);
    let share = dec.wall_seconds / full.wall_seconds;
    let elapsed = start.elapsed().as_secs_f64();
    report(&format!("    {}", full.summary()));
    report(&format!("    {}", dec.summary()));
    report(&format!(
        "    reference: {REFERENCE_CPU_KHZ:.2} kHz CPU, {REFERENCE_GPU_KHZ:.2} kHz GPU (other hardware)"
    ));
    ensure(full.khz_generated > 16.0, || format!("{:.1} kHz is below real time", full.khz_generated))?;
    ensure(share >= 0.5, || format!("decoder share {:.0}%", 100.0 * share))?;
    ensure(elapsed < 120.0, || format!("benchmark took {elapsed:.1} s"))?;
    Ok(format!(
        "{:.1} kHz full, decoder share {:.0}%, {elapsed:.1} s",
        full.khz_generated,
        100.0 * share
    ))
}

fn determinism(model: &QuickVc) -> Outcome {
    let feats = ContentFeatures::new(25, standard_normal(25 * 256, 9)).unwrap();
    let reference = |seed: u64| {
        Waveform::new(standard_normal(16000, seed).into_iter().map(|v| 0.1 * v).collect()).unwrap()
    };
    let run = |ref_seed: u64| -> Result<Vec<u8>, String> {
        let req = ConversionRequest::new(Source::Features(feats.clone()), TargetRef::Wave(reference(ref_seed)))
            .with_seed(1234);
        let out = model.convert(&req).map_err(|e| e.to_string())?;
        wav_to_bytes(&out).map_err(|e| e.to_string())
    };
    let first = run(1)?;
    for i in 1..3 {
        ensure(run(1)? == first, || format!("run {i} differs"))?;
    }
    let other = run(2)?;
    let a = wav_from_bytes(&first).unwrap();
    let b = wav_from_bytes(&other).unwrap();
    let l2: f64 = a.samples().iter().zip(b.samples()).map(|(p, q)| ((p - q) as f64).powi(2)).sum::<f64>().sqrt();
    ensure(l2 > 0.0, || "different references gave identical output".into())?;
    Ok(format!("3 identical runs ({} bytes), cross-reference L2 {l2:.3}", first.len()))
}

fn format_robustness() -> Outcome {
    let mut w = ModelWeights::new(ModelConfig::default());
    w.insert("x.weight", vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let qvcw = w.to_bytes().unwrap();
    let qvcf = FeatureMatrix::new(2, 3, vec![0.5; 6]).unwrap().to_bytes();
    let wav = wav_to_bytes(&Waveform::new(vec![0.1, -0.2, 0.3]).unwrap()).unwrap();

    let flip = |b: &[u8], i: usize| {
        let mut v = b.to_vec();
        let i = i.min(v.len() - 1);
        v[i] ^= 0xff;
        v
    };
    let mut cases: Vec<(&str, u8, Vec<u8>)> = vec![
        ("qvcw empty", 0, vec![]),
        ("qvcw magic", 0, flip(&qvcw, 0)),
        ("qvcw version", 0, flip(&qvcw, 4)),
        ("qvcw header length", 0, flip(&qvcw, 15)),
        ("qvcw header json", 0, flip(&qvcw, 16)),
        ("qvcw payload crc", 0, flip(&qvcw, qvcw.len() - 8)),
        ("qvcw trailing crc", 0, flip(&qvcw, qvcw.len() - 1)),
        ("qvcw cut header", 0, qvcw[..12].to_vec()),
        ("qvcw cut payload", 0, qvcw[..qvcw.len() - 5].to_vec()),
        ("qvcf empty", 1, vec![]),
        ("qvcf magic", 1, flip(&qvcf, 1)),
        ("qvcf dims", 1, flip(&qvcf, 9)),
        ("qvcf payload crc", 1, flip(&qvcf, 20)),
        ("qvcf cut", 1, qvcf[..qvcf.len() - 1].to_vec()),
        ("wav empty", 2, vec![]),
        ("wav riff", 2, flip(&wav, 0)),
        ("wav cut header", 2, wav[..30].to_vec()),
        ("wav channels", 2, flip(&wav, 22)),
        ("wav bits", 2, flip(&wav, 34)),
    ];
    let mut garbage = rng(3);
    cases.push(("random bytes", 0, uniform_f32(&mut garbage, 64, 1.0).iter().map(|v| v.to_bits() as u8).collect()));
    cases.push(("random bytes", 1, (0..64).map(|_| garbage.random()).collect()));
    cases.push(("random bytes", 2, (0..64).map(|_| garbage.random()).collect()));

    for (name, kind, bytes) in &cases {
        let outcome = catch_unwind(AssertUnwindSafe(|| match kind {
            0 => ModelWeights::from_bytes(bytes).err(),
            1 => FeatureMatrix::from_bytes(bytes).err(),
            _ => wav_from_bytes(bytes).err(),
        }));
        match outcome {
            Err(_) => return Err(format!("{name}: panicked")),
            Ok(None) => return Err(format!("{name}: accepted")),
            Ok(Some(Error::Load(_) | Error::Wav(_))) => {}
            Ok(Some(e)) => return Err(format!("{name}: untyped error {e}")),
        }
    }
    Ok(format!("{} corrupted inputs, all typed errors", cases.len()))
}

fn sr_resize_criteria() -> Outcome {
    let mut r = rng(8);
    let m = MelSpectrogram::new(uniform(&mut r, 80 * 5, -11.0, 2.0), 5, 80).unwrap();
    let same = sr_resize(&m, 1.0).map_err(|e| e.to_string())?;
    let bits = |s: &MelSpectrogram| s.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    ensure(bits(&same) == bits(&m), || "ratio 1.0 is not bit-exact".into())?;

    let ramp = MelSpectrogram::new((0..3).flat_map(|_| (0..80).map(|j| j as f64)).collect(), 3, 80).unwrap();
    let half = sr_resize(&ramp, 0.5).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for t in 0..3 {
        for j in 0..80 {
            let want = if j < 40 {
                lerp_at(ramp.frame(t), (j as f64 + 0.5) * 2.0 - 0.5)
            } else {
                LOG_FLOOR.ln()
            };
            worst = worst.max((half.frame(t)[j] - want).abs());
        }
    }
    ensure(worst < 1e-6, || format!("ramp deviation {worst:.3e}"))?;
    for ratio in [0.85, 1.0, 1.15] {
        let out = sr_resize(&m, ratio).map_err(|e| e.to_string())?;
        ensure(out.n_frames() == m.n_frames() && out.n_mels() == 80, || format!("ratio {ratio} changed shape"))?;
    }
    Ok(format!("identity bit-exact, ramp deviation {worst:.1e}, time axis kept"))
}

#[test]
fn acceptance() {
    let weights = random_weights(&ModelConfig::default(), 2024).unwrap();
    let model = QuickVc::from_weights(&weights).unwrap();

    let criteria: Vec<(&str, Check)> = vec![
        ("stft/istft perfect reconstruction", Box::new(stft_reconstruction)),
        ("flow invertibility", Box::new(flow_invertibility)),
        ("hop identity", Box::new(|| hop_identity(&weights, &model))),
        ("loss oracle equivalence", Box::new(loss_oracles)),
        ("conv adjoint identity", Box::new(adjoint_identity)),
        ("throughput", Box::new(|| throughput(&model))),
        ("end-to-end determinism", Box::new(|| determinism(&model))),
        ("format robustness", Box::new(format_robustness)),
        ("sr_resize", Box::new(sr_resize_criteria)),
    ];

    let mut failed = Vec::new();
    for (name, check) in &criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => report(&format!("PASS {name}: {detail}")),
            Err(why) => {
                report(&format!("FAIL {name}: {why}"));
                failed.push(*name);
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}

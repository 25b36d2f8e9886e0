use std::sync::OnceLock;
use std::time::Instant;

use quickvc_core::encoders::{standard_normal, SpeakerEmbedding};
use quickvc_core::features::ContentFeatures;
use quickvc_core::init::random_weights;
use quickvc_core::pipeline::{inspect, Source, TargetRef};
use quickvc_core::{par, ConversionRequest, Error, LoadError, ModelConfig, ModelWeights, QuickVc, Tensor3, Waveform};

fn weights() -> &'static ModelWeights {
    static W: OnceLock<ModelWeights> = OnceLock::new();
    W.get_or_init(|| random_weights(&ModelConfig::default(), 7).unwrap())
}

fn model() -> &'static QuickVc {
    static M: OnceLock<QuickVc> = OnceLock::new();
    M.get_or_init(|| QuickVc::from_weights(weights()).unwrap())
}

fn features(frames: usize, seed: u64) -> ContentFeatures {
    ContentFeatures::new(frames, standard_normal(frames * 256, seed)).unwrap()
}

fn noise_wave(len: usize, seed: u64) -> Waveform {
    Waveform::new(standard_normal(len, seed).into_iter().map(|v| 0.1 * v).collect()).unwrap()
}

fn request(frames: usize, ref_seed: u64) -> ConversionRequest {
    ConversionRequest::new(
        Source::Features(features(frames, 1)),
        TargetRef::Wave(noise_wave(16000, ref_seed)),
    )
}

#[test]
fn output_length_is_320_per_frame() {
    for t in [1, 7, 51] {
        let start = Instant::now();
        let out = model().convert(&request(t, 2)).unwrap();
        assert_eq!(out.len(), 320 * t);
        assert!(out.samples().iter().all(|v| v.is_finite()));
        eprintln!("T={t}: {:?}", start.elapsed());
    }
}

#[test]
fn zero_noise_is_deterministic() {
    let req = request(20, 2).with_noise_scale(0.0);
    let a = model().convert(&req).unwrap();
    let b = model().convert(&req).unwrap();
    assert_eq!(a, b);
}

#[test]
fn seed_determines_noise() {
    let a = model().convert(&request(10, 2).with_seed(1)).unwrap();
    let b = model().convert(&request(10, 2).with_seed(1)).unwrap();
    let c = model().convert(&request(10, 2).with_seed(2)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn target_reference_changes_output() {
    let a = model().convert(&request(20, 2)).unwrap();
    let b = model().convert(&request(20, 3)).unwrap();
    let d: f64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(x, y)| ((x - y) as f64).powi(2))
        .sum();
    assert!(d > 0.0);
}

#[test]
fn embedding_target_matches_wave_target() {
    let reference = noise_wave(16000, 2);
    let g = model().speaker_embedding(&TargetRef::Wave(reference.clone())).unwrap();
    assert!((g.norm() - 1.0).abs() < 1e-5);
    let via_wave = model().convert(&request(5, 2)).unwrap();
    let via_g = model()
        .convert(&ConversionRequest::new(
            Source::Features(features(5, 1)),
            TargetRef::Embedding(g),
        ))
        .unwrap();
    assert_eq!(via_wave, via_g);
}

#[test]
fn raw_wave_source_names_the_export_tool() {
    let req = ConversionRequest::new(Source::Wave(noise_wave(3200, 1)), TargetRef::Wave(noise_wave(3200, 2)));
    match model().convert(&req) {
        Err(Error::Usage(msg)) => assert!(msg.contains("qvc-export features"), "{msg}"),
        other => panic!("expected usage error, got {other:?}"),
    }
}

#[test]
fn noise_scale_range_is_enforced() {
    for bad in [-0.1, 2.01, f32::NAN] {
        let req = request(2, 2).with_noise_scale(bad);
        assert!(matches!(model().convert(&req), Err(Error::InvalidArgument(_))), "{bad}");
    }
    model().convert(&request(2, 2).with_noise_scale(2.0)).unwrap();
}

#[test]
fn wrong_embedding_dimension() {
    let req = ConversionRequest::new(
        Source::Features(features(2, 1)),
        TargetRef::Embedding(SpeakerEmbedding::new(vec![0.1; 10]).unwrap()),
    );
    assert!(matches!(model().convert(&req), Err(Error::Shape(_))));
}

#[test]
fn container_roundtrip_loads_strictly() {
    let bytes = weights().to_bytes().unwrap();
    let back = ModelWeights::from_bytes(&bytes).unwrap();
    assert_eq!(&back, weights());
    let m = QuickVc::from_weights(&back).unwrap();
    let req = request(3, 2);
    assert_eq!(m.convert(&req).unwrap(), model().convert(&req).unwrap());
}

#[test]
fn strict_load_reports_missing_and_extra_tensors() {
    let mut w = weights().clone();
    w.remove("dec.conv_post.bias");
    match QuickVc::from_weights(&w) {
        Err(Error::Load(LoadError::MissingTensor(name))) => assert_eq!(name, "dec.conv_post.bias"),
        other => panic!("{other:?}"),
    }
    let mut w = weights().clone();
    w.insert("extra.weight", vec![2], vec![0.0, 1.0]).unwrap();
    match QuickVc::from_weights(&w) {
        Err(Error::Load(LoadError::UnusedTensors(names))) => assert_eq!(names, vec!["extra.weight".to_string()]),
        other => panic!("{other:?}"),
    }
    let mut w = weights().clone();
    w.insert("dec.conv_post.bias", vec![71], vec![0.0; 71]).unwrap();
    assert!(matches!(
        QuickVc::from_weights(&w),
        Err(Error::Load(LoadError::UnexpectedShape { .. }))
    ));
}

#[test]
fn inspect_counts_match_manifest() {
    let report = inspect(weights());
    assert!(report.ok());
    assert_eq!(report.tensor_count, weights().len());
    let oracle: usize = weights().iter().map(|(_, p)| p.shape.iter().product::<usize>()).sum();
    assert_eq!(report.parameter_count, oracle);
    assert_eq!(report.hop_identity.samples_per_frame, 320);
}

#[test]
fn inspect_flags_hop_violation() {
    let mut w = weights().clone();
    w.config.decoder.upsample_scales = vec![5, 5];
    w.config.decoder.upsample_kernels = vec![10, 10];
    let report = inspect(&w);
    assert!(!report.hop_identity.ok);
    assert!(report.hop_identity.error.as_deref().unwrap().contains("hop identity"));
    assert!(matches!(QuickVc::from_weights(&w), Err(Error::Config(_))));
}

#[test]
fn decoder_output_independent_of_threading() {
    let cfg = model().config();
    let z = Tensor3::new(standard_normal(cfg.inter_channels * 9, 4), (1, cfg.inter_channels, 9)).unwrap();
    let g = SpeakerEmbedding::normalized(standard_normal(256, 5)).unwrap();
    let was = par::parallel_enabled();
    par::set_parallel(true);
    let a = model().decoder.forward(&z, &g).unwrap();
    par::set_parallel(false);
    let b = model().decoder.forward(&z, &g).unwrap();
    par::set_parallel(was);
    assert_eq!(a, b);
}

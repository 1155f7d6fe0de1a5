use std::collections::BTreeSet;

use aktivtalk_core::audio_io::read_wav;
use aktivtalk_core::classifier::{
    cross_validate, decode_model, encode_model, forward, predict, train, NetConfig, Task,
};
use aktivtalk_core::corpus::{
    assign_folds, load_ages, load_heart_rate, load_manifest, sync_all, synth_corpus, LabelSource, SynthConfig,
};
use aktivtalk_core::dsp::{extract_features, FeatureConfig};

#[test]
fn corpus_on_disk_through_cross_validation() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(SynthConfig::new(10, 12, 7)).unwrap();
    let out = corpus.write_to_dir(dir.path()).unwrap();

    let samples = load_manifest(&out.manifest).unwrap();
    assert_eq!(samples.len(), 120);
    let hr = load_heart_rate(&out.heart_rate).unwrap();
    let ages = load_ages(&out.ages).unwrap();
    let synced = sync_all(&samples, &hr, &ages).unwrap();
    let agree = synced.iter().filter(|s| s.pulse_zone == Some(s.zone)).count();
    assert!(agree as f64 >= 0.95 * synced.len() as f64, "pulse and self labels agree on {agree}");

    let cfg = FeatureConfig::default();
    let features: Vec<_> = synced
        .iter()
        .map(|s| extract_features(&read_wav(&s.wav_path).unwrap(), &cfg).unwrap())
        .collect();
    // files on disk hold the same audio the planner renders
    let direct = extract_features(&corpus.render_clip(0), &cfg).unwrap();
    for (a, b) in direct.values.iter().zip(&features[0].values) {
        assert!((a - b).abs() < 1e-3);
    }

    for source in [LabelSource::SelfReport, LabelSource::Pulse] {
        let folds = assign_folds(&synced, 5, 3, source).unwrap();
        let r = cross_validate(&features, &synced, &folds, Task::Binary, source, &NetConfig::for_task(Task::Binary, 20, 3), &cfg)
            .unwrap();
        assert!(r.mean_accuracy >= 0.8, "{source}: {}", r.to_table());
        let mut seen = BTreeSet::new();
        for f in &r.folds {
            assert!(f.test_participants.iter().all(|p| !f.train_participants.contains(p)));
            assert!(f.test_participants.iter().all(|p| seen.insert(p.clone())));
        }
        assert_eq!(seen.len(), 10);
    }
}

#[test]
fn trained_model_survives_serialization() {
    let corpus = synth_corpus(SynthConfig::new(5, 9, 11)).unwrap();
    let cfg = FeatureConfig::default();
    let features: Vec<_> = (0..corpus.len())
        .map(|i| extract_features(&corpus.render_clip(i), &cfg).unwrap())
        .collect();
    let labels: Vec<usize> = corpus.samples.iter().map(|s| Task::ThreeClass.class_of(s.zone)).collect();
    let net = NetConfig { epochs: 30, ..NetConfig::for_task(Task::ThreeClass, 20, 1) };
    let model = train(&features, &labels, &net).unwrap();
    let back = decode_model(&encode_model(&model)).unwrap();
    assert_eq!(back, model);
    for x in &features {
        assert_eq!(forward(&back, &x.values).unwrap(), forward(&model, &x.values).unwrap());
        assert_eq!(predict(&back, x).unwrap(), predict(&model, x).unwrap());
    }
}

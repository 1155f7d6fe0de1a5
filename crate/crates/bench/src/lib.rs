//! Fixtures shared by the benchmarks in `benches/`.

use aktivtalk_core::audio_io::AudioClip;
use aktivtalk_core::corpus::{synth_corpus, SynthConfig};
use aktivtalk_core::dsp::FeatureVector;

/// First clip of a small synthetic corpus, `seconds` long at 16 kHz.
pub fn speech_clip(seconds: f64) -> AudioClip {
    let mut config = SynthConfig::new(5, 1, 7);
    config.clip_seconds = seconds;
    synth_corpus(config)
        .expect("synthetic corpus")
        .render_clip(0)
}

/// `n` feature vectors of width `dim` with labels cycling through `k`
/// classes. Class means are separated so training has signal to follow.
pub fn labeled_features(n: usize, dim: usize, k: usize) -> (Vec<FeatureVector>, Vec<usize>) {
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let features = labels
        .iter()
        .enumerate()
        .map(|(i, &c)| FeatureVector {
            values: (0..dim)
                .map(|d| c as f64 + ((i * 31 + d * 17) as f64).sin() * 0.5)
                .collect(),
            clip_id: format!("b{i:04}"),
        })
        .collect();
    (features, labels)
}

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use aktivtalk_bench::{labeled_features, speech_clip};
use aktivtalk_core::classifier::{fit, NetConfig, Task};
use aktivtalk_core::dsp::{fft_real, FeatureConfig, FeaturePlan};

fn fft(c: &mut Criterion) {
    let x: Vec<f64> = (0..512).map(|i| (i as f64 * 0.1).sin()).collect();
    c.bench_function("fft_real 512", |b| {
        b.iter(|| fft_real(black_box(&x), 512).unwrap())
    });
}

fn mfcc(c: &mut Criterion) {
    let clip = speech_clip(15.0);
    let plan = FeaturePlan::new(&FeatureConfig::default(), clip.sample_rate_hz()).unwrap();
    c.bench_function("mfcc_pooled 15 s clip", |b| {
        b.iter(|| plan.mfcc_pooled(black_box(&clip)).unwrap())
    });
}

fn train_epoch(c: &mut Criterion) {
    let (features, labels) = labeled_features(480, 20, 3);
    let config = NetConfig {
        epochs: 1,
        ..NetConfig::for_task(Task::ThreeClass, 20, 0)
    };
    let fc = FeatureConfig::default();
    c.bench_function("train one epoch, 480 samples", |b| {
        b.iter(|| fit(black_box(&features), &labels, &config, &fc).unwrap())
    });
}

criterion_group!(benches, fft, mfcc, train_epoch);
criterion_main!(benches);

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::net::{loss_and_gradients, Layer, ModelParams};
use super::{class_weights, ClassifierError, NetConfig, MOMENTUM, STD_FLOOR};
use crate::dsp::{FeatureConfig, FeatureVector};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Full-data weighted loss after each epoch.
    pub loss_history: Vec<f64>,
    pub class_weights: Vec<f64>,
    pub warnings: Vec<String>,
}

/// He-initialized layers drawn from `rng`; biases start at zero.
pub(crate) fn init_layers(config: &NetConfig, rng: &mut ChaCha8Rng) -> Vec<Layer> {
    config
        .widths()
        .windows(2)
        .map(|w| {
            let scale = (2.0 / w[0] as f64).sqrt();
            let mut layer = Layer::zeros(w[0], w[1]);
            for v in layer.weights.iter_mut() {
                *v = rng.sample::<f64, _>(StandardNormal) * scale;
            }
            layer
        })
        .collect()
}

fn standardization(features: &[FeatureVector], dim: usize, warnings: &mut Vec<String>) -> (Vec<f64>, Vec<f64>) {
    let n = features.len() as f64;
    let mut mean = vec![0.0; dim];
    for f in features {
        for (m, v) in mean.iter_mut().zip(&f.values) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for f in features {
        for ((s, v), m) in var.iter_mut().zip(&f.values).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var
        .into_iter()
        .enumerate()
        .map(|(d, s)| {
            let sd = (s / n).sqrt();
            if sd < STD_FLOOR {
                warnings.push(format!("DegenerateFeatures: dimension {d} is constant; std floored at {STD_FLOOR:e}"));
                STD_FLOOR
            } else {
                sd
            }
        })
        .collect();
    (mean, std)
}

pub fn train(features: &[FeatureVector], labels: &[usize], config: &NetConfig) -> Result<ModelParams, ClassifierError> {
    fit(features, labels, config, &FeatureConfig::default()).map(|o| o.params)
}

/// Mini-batch SGD with momentum on the class-weighted loss.
pub fn fit(
    features: &[FeatureVector],
    labels: &[usize],
    config: &NetConfig,
    feature_config: &FeatureConfig,
) -> Result<TrainOutcome, ClassifierError> {
    config.validate()?;
    if features.len() != labels.len() {
        return Err(ClassifierError::ShapeMismatch(format!(
            "{} feature vectors, {} labels",
            features.len(),
            labels.len()
        )));
    }
    if let Some(f) = features.iter().find(|f| f.values.len() != config.input_dim) {
        return Err(ClassifierError::ShapeMismatch(format!(
            "feature vector {} has {} values, expected {}",
            f.clip_id,
            f.values.len(),
            config.input_dim
        )));
    }
    let weights = class_weights(labels, config.n_classes)?;

    let mut warnings = Vec::new();
    let (mean, std) = standardization(features, config.input_dim, &mut warnings);
    let inputs: Vec<Vec<f64>> = features
        .iter()
        .map(|f| {
            f.values
                .iter()
                .zip(mean.iter().zip(&std))
                .map(|(v, (m, s))| (v - m) / s)
                .collect()
        })
        .collect();
    let all: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut layers = init_layers(config, &mut rng);
    let mut velocity: Vec<(Vec<f64>, Vec<f64>)> = layers
        .iter()
        .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
        .collect();

    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);
    let mut batch_x: Vec<&[f64]> = Vec::with_capacity(config.batch_size);
    let mut batch_y = Vec::with_capacity(config.batch_size);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch_x.clear();
            batch_y.clear();
            for &i in chunk {
                batch_x.push(all[i]);
                batch_y.push(labels[i]);
            }
            let (_, grads) = loss_and_gradients(&layers, &batch_x, &batch_y, &weights, config.l2_penalty);
            for (l, layer) in layers.iter_mut().enumerate() {
                let (vw, vb) = &mut velocity[l];
                for ((w, v), g) in layer.weights.iter_mut().zip(vw.iter_mut()).zip(&grads.weights[l]) {
                    *v = MOMENTUM * *v - config.learning_rate * g;
                    *w += *v;
                }
                for ((b, v), g) in layer.bias.iter_mut().zip(vb.iter_mut()).zip(&grads.bias[l]) {
                    *v = MOMENTUM * *v - config.learning_rate * g;
                    *b += *v;
                }
            }
        }
        let (loss, _) = loss_and_gradients(&layers, &all, labels, &weights, config.l2_penalty);
        loss_history.push(loss);
    }

    Ok(TrainOutcome {
        params: ModelParams {
            layers,
            feature_mean: mean,
            feature_std: std,
            net: config.clone(),
            features: feature_config.clone(),
        },
        loss_history,
        class_weights: weights,
        warnings,
    })
}

/// Max relative error between backprop and central differences over every
/// parameter of `layers` on the given batch.
pub fn gradient_check_at(
    layers: &[Layer],
    inputs: &[&[f64]],
    labels: &[usize],
    class_weights: &[f64],
    l2: f64,
) -> f64 {
    const H: f64 = 1e-5;
    let (_, analytic) = loss_and_gradients(layers, inputs, labels, class_weights, l2);
    let mut probe = layers.to_vec();
    let mut worst = 0.0f64;
    let loss_at = |p: &[Layer]| loss_and_gradients(p, inputs, labels, class_weights, l2).0;
    for l in 0..layers.len() {
        for i in 0..layers[l].weights.len() {
            let orig = probe[l].weights[i];
            probe[l].weights[i] = orig + H;
            let up = loss_at(&probe);
            probe[l].weights[i] = orig - H;
            let down = loss_at(&probe);
            probe[l].weights[i] = orig;
            worst = worst.max(rel_err(analytic.weights[l][i], (up - down) / (2.0 * H)));
        }
        for i in 0..layers[l].bias.len() {
            let orig = probe[l].bias[i];
            probe[l].bias[i] = orig + H;
            let up = loss_at(&probe);
            probe[l].bias[i] = orig - H;
            let down = loss_at(&probe);
            probe[l].bias[i] = orig;
            worst = worst.max(rel_err(analytic.bias[l][i], (up - down) / (2.0 * H)));
        }
    }
    worst
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs()).max(1e-8)
}

/// Gradient check on a random network and batch: standard-normal inputs,
/// uniformly random labels (every class present), class weights from those
/// labels, small random biases so no ReLU sits exactly at its kink.
pub fn gradient_check(config: &NetConfig, n_samples: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut layers = init_layers(config, &mut rng);
    for layer in layers.iter_mut() {
        for b in layer.bias.iter_mut() {
            *b = rng.random_range(-0.1..0.1);
        }
    }
    let k = config.n_classes;
    let inputs: Vec<Vec<f64>> = (0..n_samples)
        .map(|_| (0..config.input_dim).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let labels: Vec<usize> = (0..n_samples)
        .map(|i| if i < k { i } else { rng.random_range(0..k) })
        .collect();
    let weights = class_weights(&labels, k).unwrap_or_else(|_| vec![1.0; k]);
    let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    gradient_check_at(&layers, &refs, &labels, &weights, config.l2_penalty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::Normal;

    fn blobs(n_per: usize, seed: u64) -> (Vec<FeatureVector>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for class in 0..2 {
            let center = if class == 0 { -3.0 } else { 3.0 };
            for i in 0..n_per {
                xs.push(FeatureVector {
                    values: (0..20).map(|_| center + rng.sample(noise)).collect(),
                    clip_id: format!("{class}-{i}"),
                });
                ys.push(class);
            }
        }
        (xs, ys)
    }

    fn binary_net(seed: u64) -> NetConfig {
        NetConfig {
            n_classes: 2,
            seed,
            ..NetConfig::default()
        }
    }

    #[test]
    fn separable_blobs_are_learned() {
        let (xs, ys) = blobs(100, 1);
        let outcome = fit(&xs, &ys, &binary_net(5), &FeatureConfig::default()).unwrap();
        let correct = xs
            .iter()
            .zip(&ys)
            .filter(|(x, &y)| super::super::predict(&outcome.params, x).unwrap() == y)
            .count();
        assert!(correct as f64 / xs.len() as f64 >= 0.99);
        // loss keeps falling once past the first few epochs
        let h = &outcome.loss_history;
        assert_eq!(h.len(), 200);
        for e in 10..h.len() - 1 {
            assert!(h[e + 1] <= h[e], "loss rose at epoch {e}: {} -> {}", h[e], h[e + 1]);
        }
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let (xs, ys) = blobs(30, 2);
        let cfg = NetConfig { epochs: 15, ..binary_net(9) };
        assert_eq!(train(&xs, &ys, &cfg).unwrap(), train(&xs, &ys, &cfg).unwrap());
        let other = NetConfig { seed: 10, ..cfg.clone() };
        assert_ne!(train(&xs, &ys, &cfg).unwrap(), train(&xs, &ys, &other).unwrap());
    }

    #[test]
    fn missing_class_is_an_error() {
        let (xs, _) = blobs(5, 3);
        let ys = vec![0; xs.len()];
        assert!(matches!(train(&xs, &ys, &binary_net(0)), Err(ClassifierError::EmptyClass(1))));
    }

    #[test]
    fn constant_dimension_warns() {
        let (mut xs, ys) = blobs(10, 4);
        xs.iter_mut().for_each(|x| x.values[3] = 1.5);
        let cfg = NetConfig { epochs: 2, ..binary_net(0) };
        let outcome = fit(&xs, &ys, &cfg, &FeatureConfig::default()).unwrap();
        assert_eq!(outcome.params.feature_std[3], STD_FLOOR);
        assert!(outcome.warnings.iter().any(|w| w.contains("dimension 3")));
        outcome.params.check_shapes().unwrap();
    }

    #[test]
    fn gradient_check_small_net() {
        let cfg = NetConfig {
            input_dim: 20,
            hidden_dims: vec![8],
            n_classes: 3,
            seed: 17,
            ..NetConfig::default()
        };
        assert!(gradient_check(&cfg, 16) < 1e-4);
        // without the l2 term, only the data loss is checked
        assert!(gradient_check(&NetConfig { l2_penalty: 0.0, ..cfg }, 16) < 1e-4);
    }

    #[test]
    fn zero_weights_give_symmetric_hidden_gradients() {
        let cfg = NetConfig {
            input_dim: 6,
            hidden_dims: vec![5],
            n_classes: 3,
            ..NetConfig::default()
        };
        let mut layers: Vec<Layer> = cfg.widths().windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        layers[0].bias.iter_mut().for_each(|b| *b = 0.2);
        let xs: Vec<Vec<f64>> = (0..4).map(|i| (0..6).map(|j| (i * 6 + j) as f64 * 0.1).collect()).collect();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let (_, g) = loss_and_gradients(&layers, &refs, &[0, 1, 2, 1], &[1.0, 0.5, 2.0], 1e-4);
        // every hidden unit sees the same activations, so its outgoing
        // weight gradients are identical across units
        let out = &g.weights[1];
        for class in 0..3 {
            let row = &out[class * 5..(class + 1) * 5];
            assert!(row.iter().all(|v| (v - row[0]).abs() < 1e-12));
        }
        let first = &g.weights[0];
        for unit in 1..5 {
            for i in 0..6 {
                assert!((first[unit * 6 + i] - first[i]).abs() < 1e-12);
            }
        }
    }
}

use serde::{Deserialize, Serialize};

use super::{argmax_severe, ClassifierError, NetConfig, Task};
use crate::dsp::{FeatureConfig, FeatureVector};

/// Dense layer; `weights` is `outputs x inputs`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.bias)
                .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b),
        );
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layers: Vec<Layer>,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub net: NetConfig,
    pub features: FeatureConfig,
}

impl ModelParams {
    pub fn task(&self) -> Task {
        Task::from_n_classes(self.net.n_classes).unwrap_or(Task::ThreeClass)
    }

    pub fn check_shapes(&self) -> Result<(), ClassifierError> {
        let widths = self.net.widths();
        if self.layers.len() + 1 != widths.len() {
            return Err(ClassifierError::ShapeMismatch(format!(
                "{} layers for widths {widths:?}",
                self.layers.len()
            )));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.inputs != widths[i]
                || layer.outputs != widths[i + 1]
                || layer.weights.len() != layer.inputs * layer.outputs
                || layer.bias.len() != layer.outputs
            {
                return Err(ClassifierError::ShapeMismatch(format!("layer {i} does not chain")));
            }
        }
        if self.feature_mean.len() != self.net.input_dim || self.feature_std.len() != self.net.input_dim {
            return Err(ClassifierError::ShapeMismatch("standardization vectors".into()));
        }
        if self.feature_std.iter().any(|&s| !(s > 0.0)) {
            return Err(ClassifierError::ShapeMismatch("non-positive feature std".into()));
        }
        Ok(())
    }

    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.feature_mean.iter().zip(&self.feature_std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

pub(crate) fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in logits.iter_mut() {
        *v /= sum;
    }
}

/// Activations of every layer for one standardized input; the last entry
/// holds softmax probabilities, the others post-ReLU values.
pub(crate) fn forward_trace(layers: &[Layer], x: &[f64]) -> Vec<Vec<f64>> {
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(x.to_vec());
    for (i, layer) in layers.iter().enumerate() {
        let mut out = Vec::with_capacity(layer.outputs);
        layer.apply(acts.last().unwrap(), &mut out);
        if i + 1 == layers.len() {
            softmax_in_place(&mut out);
        } else {
            out.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        acts.push(out);
    }
    acts
}

/// Class probabilities for a raw (unstandardized) feature vector.
pub fn forward(params: &ModelParams, x: &[f64]) -> Result<Vec<f64>, ClassifierError> {
    if x.len() != params.net.input_dim {
        return Err(ClassifierError::ShapeMismatch(format!(
            "input of length {}, model expects {}",
            x.len(),
            params.net.input_dim
        )));
    }
    Ok(forward_trace(&params.layers, &params.standardize(x)).pop().unwrap())
}

pub fn predict(params: &ModelParams, x: &FeatureVector) -> Result<usize, ClassifierError> {
    Ok(argmax_severe(&forward(params, &x.values)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(layers: &[Layer]) -> Self {
        Self {
            weights: layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }
}

/// Class-weighted mean cross-entropy plus `l2 * sum(W^2)` over weight
/// matrices (biases unpenalized), and its exact gradient.
///
/// `inputs` are already standardized.
pub fn loss_and_gradients(
    layers: &[Layer],
    inputs: &[&[f64]],
    labels: &[usize],
    class_weights: &[f64],
    l2: f64,
) -> (f64, Gradients) {
    let mut grads = Gradients::zeros_like(layers);
    let batch = inputs.len() as f64;
    let mut loss = 0.0;
    for (x, &y) in inputs.iter().zip(labels) {
        let acts = forward_trace(layers, x);
        let probs = acts.last().unwrap();
        let w = class_weights[y];
        loss += -w * probs[y].max(f64::MIN_POSITIVE).ln();
        // d loss / d logits
        let mut delta: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(c, &p)| w * (p - if c == y { 1.0 } else { 0.0 }) / batch)
            .collect();
        for l in (0..layers.len()).rev() {
            let layer = &layers[l];
            let prev = &acts[l];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &mut grads.weights[l][o * layer.inputs..(o + 1) * layer.inputs];
                for (g, a) in row.iter_mut().zip(prev) {
                    *g += d * a;
                }
                grads.bias[l][o] += d;
            }
            if l > 0 {
                let mut back = vec![0.0; layer.inputs];
                for (o, d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (b, wv) in back.iter_mut().zip(row) {
                        *b += d * wv;
                    }
                }
                // ReLU derivative, taken as 0 at the kink
                for (b, a) in back.iter_mut().zip(prev) {
                    if *a <= 0.0 {
                        *b = 0.0;
                    }
                }
                delta = back;
            }
        }
    }
    loss /= batch;
    if l2 > 0.0 {
        for (layer, g) in layers.iter().zip(grads.weights.iter_mut()) {
            for (gv, wv) in g.iter_mut().zip(&layer.weights) {
                loss += l2 * wv * wv;
                *gv += 2.0 * l2 * wv;
            }
        }
    }
    (loss, grads)
}

//! Binary model container.
//!
//! Layout, all integers u32 and all floats f64, little-endian:
//! magic `AKTV1`, net config text (length-prefixed), feature config text
//! (length-prefixed), input dim, means, stds, layer count, then per layer
//! outputs, inputs, weights (row-major), bias.

use std::path::Path;

use super::net::{Layer, ModelParams};
use super::{ClassifierError, NetConfig};
use crate::dsp::FeatureConfig;

pub const MODEL_MAGIC: &[u8; 5] = b"AKTV1";

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_text(out: &mut Vec<u8>, text: &str) {
    put_u32(out, text.len());
    out.extend_from_slice(text.as_bytes());
}

pub fn encode_model(params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    put_text(&mut out, &params.net.to_kv());
    put_text(&mut out, &params.features.to_kv());
    put_u32(&mut out, params.feature_mean.len());
    put_f64s(&mut out, &params.feature_mean);
    put_f64s(&mut out, &params.feature_std);
    put_u32(&mut out, params.layers.len());
    for layer in &params.layers {
        put_u32(&mut out, layer.outputs);
        put_u32(&mut out, layer.inputs);
        put_f64s(&mut out, &layer.weights);
        put_f64s(&mut out, &layer.bias);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ClassifierError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| ClassifierError::BadModel(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, ClassifierError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ClassifierError> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| ClassifierError::BadModel("length overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn text(&mut self) -> Result<&'a str, ClassifierError> {
        let n = self.u32()?;
        std::str::from_utf8(self.take(n)?).map_err(|_| ClassifierError::BadModel("config text is not utf-8".into()))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelParams, ClassifierError> {
    if !bytes.starts_with(MODEL_MAGIC) {
        return Err(ClassifierError::BadModel("missing AKTV1 header".into()));
    }
    let mut r = Reader { bytes, pos: MODEL_MAGIC.len() };
    let net = NetConfig::from_kv(r.text()?)?;
    let features =
        FeatureConfig::from_kv(r.text()?).map_err(|e| ClassifierError::BadModel(format!("feature config: {e}")))?;
    let dim = r.u32()?;
    let feature_mean = r.f64s(dim)?;
    let feature_std = r.f64s(dim)?;
    let n_layers = r.u32()?;
    let mut layers = Vec::with_capacity(n_layers.min(64));
    for _ in 0..n_layers {
        let outputs = r.u32()?;
        let inputs = r.u32()?;
        let weights = r.f64s(outputs.saturating_mul(inputs))?;
        let bias = r.f64s(outputs)?;
        layers.push(Layer { inputs, outputs, weights, bias });
    }
    if r.pos != bytes.len() {
        return Err(ClassifierError::BadModel(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let params = ModelParams { layers, feature_mean, feature_std, net, features };
    params
        .check_shapes()
        .map_err(|e| ClassifierError::BadModel(e.to_string()))?;
    Ok(params)
}

pub fn write_model(params: &ModelParams, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
    std::fs::write(path, encode_model(params))?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ModelParams, ClassifierError> {
    decode_model(&std::fs::read(path)?)
}

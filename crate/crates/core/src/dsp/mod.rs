//! Mel-spectrogram and mean-pooled MFCC features.

mod export;
mod fft;
mod mel;

pub use export::{export_spectrogram, pgm_bytes, spectrogram_csv, SpectrogramFiles};
pub use fft::{fft_real, FftPlan};
pub use mel::{
    dct_matrix, filter_centers, hz_to_mel, mel_filterbank, mel_spectrogram, mel_to_hz, mfcc_pooled, FeaturePlan,
    FeatureVector, MelSpectrogram,
};

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::audio_io::{self, AudioClip};

#[derive(Debug, Error)]
pub enum DspError {
    #[error("bad fft size: {0}")]
    BadSize(String),
    #[error("invalid feature config: {0}")]
    InvalidConfig(String),
    #[error("clip too short: {seconds:.3} s (minimum {minimum} s)")]
    ClipTooShort { seconds: f64, minimum: f64 },
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
}

/// Clips shorter than this are rejected by feature extraction.
pub const MIN_CLIP_SECONDS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FeatureConfig {
    pub frame_len_ms: f64,
    pub hop_ms: f64,
    pub fft_size: usize,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub log_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            frame_len_ms: 25.0,
            hop_ms: 10.0,
            fft_size: 512,
            n_mels: 40,
            n_mfcc: 20,
            fmin_hz: 0.0,
            fmax_hz: 8000.0,
            log_floor: 1e-10,
        }
    }
}

impl FeatureConfig {
    pub fn frame_len(&self, sample_rate_hz: u32) -> usize {
        (self.frame_len_ms * sample_rate_hz as f64 / 1000.0).round() as usize
    }

    pub fn hop_len(&self, sample_rate_hz: u32) -> usize {
        (self.hop_ms * sample_rate_hz as f64 / 1000.0).round() as usize
    }

    pub fn validate(&self, sample_rate_hz: u32) -> Result<(), DspError> {
        let bad = |msg: String| Err(DspError::InvalidConfig(msg));
        if !self.fft_size.is_power_of_two() {
            return bad(format!("fft_size {} is not a power of two", self.fft_size));
        }
        let frame = self.frame_len(sample_rate_hz);
        if frame == 0 || self.fft_size < frame {
            return bad(format!("fft_size {} smaller than frame of {frame} samples", self.fft_size));
        }
        if self.hop_len(sample_rate_hz) == 0 {
            return bad("hop must be at least one sample".into());
        }
        let nyquist = sample_rate_hz as f64 / 2.0;
        if !(0.0 <= self.fmin_hz && self.fmin_hz < self.fmax_hz && self.fmax_hz <= nyquist) {
            return bad(format!(
                "need 0 <= fmin ({}) < fmax ({}) <= {nyquist}",
                self.fmin_hz, self.fmax_hz
            ));
        }
        if self.n_mfcc < 1 || self.n_mfcc > self.n_mels {
            return bad(format!("need 1 <= n_mfcc ({}) <= n_mels ({})", self.n_mfcc, self.n_mels));
        }
        if !(self.log_floor > 0.0) {
            return bad("log_floor must be positive".into());
        }
        Ok(())
    }

    /// Flat `key=value` lines, one per field, in declaration order.
    pub fn to_kv(&self) -> String {
        format!(
            "frame_len_ms={}\nhop_ms={}\nfft_size={}\nn_mels={}\nn_mfcc={}\nfmin_hz={}\nfmax_hz={}\nlog_floor={:e}\n",
            self.frame_len_ms,
            self.hop_ms,
            self.fft_size,
            self.n_mels,
            self.n_mfcc,
            self.fmin_hz,
            self.fmax_hz,
            self.log_floor
        )
    }

    /// Parse a `key=value` block. Unknown keys are ignored, missing keys
    /// keep their defaults.
    pub fn from_kv(text: &str) -> Result<Self, DspError> {
        let map = parse_kv(text);
        let mut cfg = Self::default();
        let num = |key: &str, slot: &mut f64| -> Result<(), DspError> {
            if let Some(v) = map.get(key) {
                *slot = v
                    .parse()
                    .map_err(|_| DspError::InvalidConfig(format!("{key}={v} is not a number")))?;
            }
            Ok(())
        };
        let int = |key: &str, slot: &mut usize| -> Result<(), DspError> {
            if let Some(v) = map.get(key) {
                *slot = v
                    .parse()
                    .map_err(|_| DspError::InvalidConfig(format!("{key}={v} is not an integer")))?;
            }
            Ok(())
        };
        num("frame_len_ms", &mut cfg.frame_len_ms)?;
        num("hop_ms", &mut cfg.hop_ms)?;
        int("fft_size", &mut cfg.fft_size)?;
        int("n_mels", &mut cfg.n_mels)?;
        int("n_mfcc", &mut cfg.n_mfcc)?;
        num("fmin_hz", &mut cfg.fmin_hz)?;
        num("fmax_hz", &mut cfg.fmax_hz)?;
        num("log_floor", &mut cfg.log_floor)?;
        Ok(cfg)
    }
}

impl fmt::Display for FeatureConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_kv())
    }
}

pub(crate) fn parse_kv(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|line| {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                return None;
            }
            let (k, v) = line.split_once('=')?;
            Some((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

/// Resample to the canonical rate and compute the pooled MFCC vector.
pub fn extract_features(clip: &AudioClip, config: &FeatureConfig) -> Result<FeatureVector, DspError> {
    let canonical = audio_io::resample_unchecked(clip, audio_io::CANONICAL_RATE_HZ);
    mfcc_pooled(&canonical, config)
}

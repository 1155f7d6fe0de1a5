use num_complex::Complex64;

use super::fft::FftPlan;
use super::{DspError, FeatureConfig, MIN_CLIP_SECONDS};
use crate::audio_io::AudioClip;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Log mel energies, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    n_mels: usize,
    cells: Vec<f64>,
    pub frame_times_s: Vec<f64>,
}

impl MelSpectrogram {
    /// Build from explicit rows; every row must share one length.
    pub fn from_rows(rows: Vec<Vec<f64>>, frame_times_s: Vec<f64>) -> Result<Self, DspError> {
        let n_mels = rows.first().map_or(0, Vec::len);
        if n_mels == 0 || rows.iter().any(|r| r.len() != n_mels) || frame_times_s.len() != rows.len() {
            return Err(DspError::InvalidConfig("ragged or empty spectrogram".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DspError::InvalidConfig("non-finite spectrogram cell".into()));
        }
        Ok(Self {
            n_mels,
            cells: rows.concat(),
            frame_times_s,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.frame_times_s.len()
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn frame(&self, index: usize) -> &[f64] {
        &self.cells[index * self.n_mels..(index + 1) * self.n_mels]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.cells.chunks_exact(self.n_mels)
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }
}

/// Fixed-length pooled MFCC vector for one clip.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub clip_id: String,
}

/// One triangular filter, stored sparsely from its first non-zero bin.
#[derive(Debug, Clone)]
struct Triangle {
    first_bin: usize,
    weights: Vec<f64>,
}

/// Dense filterbank matrix `[n_mels][fft_size/2 + 1]`.
pub fn mel_filterbank(config: &FeatureConfig, sample_rate_hz: u32) -> Result<Vec<Vec<f64>>, DspError> {
    config.validate(sample_rate_hz)?;
    let n_bins = config.fft_size / 2 + 1;
    let mut dense = Vec::with_capacity(config.n_mels);
    for tri in triangles(config, sample_rate_hz)? {
        let mut row = vec![0.0; n_bins];
        row[tri.first_bin..tri.first_bin + tri.weights.len()].copy_from_slice(&tri.weights);
        dense.push(row);
    }
    Ok(dense)
}

/// Center frequencies (Hz) of the mel filters.
pub fn filter_centers(config: &FeatureConfig) -> Vec<f64> {
    edges_hz(config)[1..=config.n_mels].to_vec()
}

fn edges_hz(config: &FeatureConfig) -> Vec<f64> {
    let lo = hz_to_mel(config.fmin_hz);
    let hi = hz_to_mel(config.fmax_hz);
    let step = (hi - lo) / (config.n_mels + 1) as f64;
    (0..config.n_mels + 2).map(|i| mel_to_hz(lo + step * i as f64)).collect()
}

fn triangles(config: &FeatureConfig, sample_rate_hz: u32) -> Result<Vec<Triangle>, DspError> {
    let n_bins = config.fft_size / 2 + 1;
    let bin_hz = sample_rate_hz as f64 / config.fft_size as f64;
    let edges = edges_hz(config);
    let mut out = Vec::with_capacity(config.n_mels);
    for m in 0..config.n_mels {
        let (lower, center, upper) = (edges[m], edges[m + 1], edges[m + 2]);
        let weight = |f: f64| {
            if f > lower && f <= center {
                (f - lower) / (center - lower)
            } else if f > center && f < upper {
                (upper - f) / (upper - center)
            } else {
                0.0
            }
        };
        let nonzero: Vec<usize> = (0..n_bins).filter(|&k| weight(k as f64 * bin_hz) > 0.0).collect();
        let (Some(&first), Some(&last)) = (nonzero.first(), nonzero.last()) else {
            return Err(DspError::InvalidConfig(format!(
                "mel filter {m} ({lower:.1}-{upper:.1} Hz) covers no fft bin; use fewer mels or a larger fft"
            )));
        };
        out.push(Triangle {
            first_bin: first,
            weights: (first..=last).map(|k| weight(k as f64 * bin_hz)).collect(),
        });
    }
    Ok(out)
}

/// Orthonormal DCT-II matrix, `rows x size`, row-major.
pub fn dct_matrix(rows: usize, size: usize) -> Vec<f64> {
    let n = size as f64;
    let mut out = Vec::with_capacity(rows * size);
    for k in 0..rows {
        let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        for i in 0..size {
            out.push(scale * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos());
        }
    }
    out
}

/// Everything needed to featurize clips at one sample rate. Immutable once
/// built, so one plan can serve many threads.
#[derive(Debug, Clone)]
pub struct FeaturePlan {
    config: FeatureConfig,
    sample_rate_hz: u32,
    frame_len: usize,
    hop: usize,
    window: Vec<f64>,
    fft: FftPlan,
    bank: Vec<Triangle>,
    dct: Vec<f64>,
}

impl FeaturePlan {
    pub fn new(config: &FeatureConfig, sample_rate_hz: u32) -> Result<Self, DspError> {
        config.validate(sample_rate_hz)?;
        let frame_len = config.frame_len(sample_rate_hz);
        // periodic Hann
        let window = (0..frame_len)
            .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / frame_len as f64).cos())
            .collect();
        Ok(Self {
            config: config.clone(),
            sample_rate_hz,
            frame_len,
            hop: config.hop_len(sample_rate_hz),
            window,
            fft: FftPlan::new(config.fft_size)?,
            bank: triangles(config, sample_rate_hz)?,
            dct: dct_matrix(config.n_mfcc, config.n_mels),
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn n_frames(&self, n_samples: usize) -> usize {
        if n_samples < self.frame_len {
            0
        } else {
            1 + (n_samples - self.frame_len) / self.hop
        }
    }

    fn check_clip(&self, clip: &AudioClip) -> Result<(), DspError> {
        if clip.sample_rate_hz() != self.sample_rate_hz {
            return Err(DspError::InvalidConfig(format!(
                "plan built for {} Hz, clip is {} Hz",
                self.sample_rate_hz,
                clip.sample_rate_hz()
            )));
        }
        let seconds = clip.duration_seconds();
        if seconds < MIN_CLIP_SECONDS || clip.len() < self.frame_len {
            return Err(DspError::ClipTooShort {
                seconds,
                minimum: MIN_CLIP_SECONDS,
            });
        }
        Ok(())
    }

    pub fn mel_spectrogram(&self, clip: &AudioClip) -> Result<MelSpectrogram, DspError> {
        self.check_clip(clip)?;
        let n_frames = self.n_frames(clip.len());
        let n_mels = self.config.n_mels;
        let mut cells = Vec::with_capacity(n_frames * n_mels);
        let mut frame = vec![0.0; self.frame_len];
        let mut spectrum = vec![Complex64::new(0.0, 0.0); self.fft.size()];
        let mut power = vec![0.0; self.fft.size() / 2 + 1];
        let samples = clip.samples();
        for i in 0..n_frames {
            let start = i * self.hop;
            for (dst, (x, w)) in frame
                .iter_mut()
                .zip(samples[start..start + self.frame_len].iter().zip(&self.window))
            {
                *dst = x * w;
            }
            self.fft.forward_real(&frame, &mut spectrum);
            for (p, bin) in power.iter_mut().zip(&spectrum) {
                *p = bin.norm_sqr();
            }
            for tri in &self.bank {
                let energy: f64 = tri
                    .weights
                    .iter()
                    .zip(&power[tri.first_bin..])
                    .map(|(w, p)| w * p)
                    .sum();
                cells.push(energy.max(self.config.log_floor).ln());
            }
        }
        let rate = self.sample_rate_hz as f64;
        let frame_times_s = (0..n_frames)
            .map(|i| (i * self.hop) as f64 / rate + self.frame_len as f64 / (2.0 * rate))
            .collect();
        Ok(MelSpectrogram {
            n_mels,
            cells,
            frame_times_s,
        })
    }

    /// First `n_mfcc` orthonormal DCT-II coefficients of one log-mel row.
    pub fn cepstrum(&self, log_mel: &[f64]) -> Vec<f64> {
        self.dct
            .chunks_exact(self.config.n_mels)
            .map(|row| row.iter().zip(log_mel).map(|(d, x)| d * x).sum())
            .collect()
    }

    pub fn mfcc_pooled(&self, clip: &AudioClip) -> Result<FeatureVector, DspError> {
        let spec = self.mel_spectrogram(clip)?;
        let mut sums = vec![0.0; self.config.n_mfcc];
        for frame in spec.frames() {
            for (s, c) in sums.iter_mut().zip(self.cepstrum(frame)) {
                *s += c;
            }
        }
        let n = spec.n_frames() as f64;
        Ok(FeatureVector {
            values: sums.into_iter().map(|s| s / n).collect(),
            clip_id: clip_id_of(clip),
        })
    }
}

fn clip_id_of(clip: &AudioClip) -> String {
    clip.source_path
        .as_deref()
        .and_then(|p| std::path::Path::new(p).file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn mel_spectrogram(clip: &AudioClip, config: &FeatureConfig) -> Result<MelSpectrogram, DspError> {
    FeaturePlan::new(config, clip.sample_rate_hz())?.mel_spectrogram(clip)
}

pub fn mfcc_pooled(clip: &AudioClip, config: &FeatureConfig) -> Result<FeatureVector, DspError> {
    FeaturePlan::new(config, clip.sample_rate_hz())?.mfcc_pooled(clip)
}

//! WAV decoding/encoding and resampling for Talk Test recordings.
//!
//! The reader accepts RIFF/WAVE PCM16 with one or two channels; stereo is
//! downmixed by averaging. The writer always emits PCM16 mono.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Internal rate every pipeline input is resampled to.
pub const CANONICAL_RATE_HZ: u32 = 16_000;
pub const MIN_RATE_HZ: u32 = 8_000;
pub const MAX_RATE_HZ: u32 = 48_000;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("not a RIFF/WAVE file: {0}")]
    NotWav(String),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("data chunk truncated: declared {declared} bytes, found {found}")]
    TruncatedData { declared: usize, found: usize },
    #[error("sample rate {0} Hz outside [8000, 48000]")]
    BadRate(u32),
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Decoded mono audio normalized to [-1.0, 1.0].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate_hz: u32,
    pub source_path: Option<String>,
    /// UTC milliseconds.
    pub recorded_at: Option<i64>,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self, AudioError> {
        if sample_rate_hz == 0 {
            return Err(AudioError::InvalidClip("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(AudioError::InvalidClip("clip has no samples".into()));
        }
        if let Some(bad) = samples.iter().find(|s| !(-1.0..=1.0).contains(*s)) {
            return Err(AudioError::InvalidClip(format!("sample {bad} outside [-1, 1]")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            source_path: None,
            recorded_at: None,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AudioError + '_ {
    move |source| AudioError::IoFailure {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut clip = decode_wav(&bytes)?;
    clip.source_path = Some(path.display().to_string());
    Ok(clip)
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct Format {
    channels: u16,
    sample_rate: u32,
}

/// Decode an in-memory WAV file.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::NotWav("missing RIFF/WAVE signature".into()));
    }
    let mut pos = 12;
    let mut format: Option<Format> = None;
    loop {
        if pos + 8 > bytes.len() {
            return Err(AudioError::NotWav("no data chunk".into()));
        }
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + 16 > bytes.len() {
                    return Err(AudioError::NotWav("fmt chunk too short".into()));
                }
                let audio_format = u16_at(bytes, body);
                let channels = u16_at(bytes, body + 2);
                let sample_rate = u32_at(bytes, body + 4);
                let bits = u16_at(bytes, body + 14);
                // 0xFFFE is WAVE_FORMAT_EXTENSIBLE; only plain PCM is accepted.
                if audio_format != 1 {
                    return Err(AudioError::UnsupportedEncoding(format!(
                        "audio_format {audio_format}, expected 1 (PCM)"
                    )));
                }
                if bits != 16 {
                    return Err(AudioError::UnsupportedEncoding(format!(
                        "{bits} bits per sample, expected 16"
                    )));
                }
                if channels != 1 && channels != 2 {
                    return Err(AudioError::UnsupportedEncoding(format!(
                        "{channels} channels, expected 1 or 2"
                    )));
                }
                if !(MIN_RATE_HZ..=MAX_RATE_HZ).contains(&sample_rate) {
                    return Err(AudioError::UnsupportedEncoding(format!(
                        "sample rate {sample_rate} Hz outside [8000, 48000]"
                    )));
                }
                format = Some(Format {
                    channels,
                    sample_rate,
                });
            }
            b"data" => {
                let fmt = format.ok_or_else(|| AudioError::NotWav("data before fmt chunk".into()))?;
                let available = bytes.len() - body;
                if available < size {
                    return Err(AudioError::TruncatedData {
                        declared: size,
                        found: available,
                    });
                }
                let data = &bytes[body..body + size];
                return Ok(pcm16_to_clip(data, fmt));
            }
            _ => {}
        }
        // chunks are padded to even length
        pos = body + size + (size & 1);
    }
}

fn pcm16_to_clip(data: &[u8], fmt: Format) -> AudioClip {
    let channels = fmt.channels as usize;
    let frame_bytes = 2 * channels;
    let samples: Vec<f64> = data
        .chunks_exact(frame_bytes)
        .map(|frame| {
            let sum: f64 = frame
                .chunks_exact(2)
                .map(|s| i16::from_le_bytes([s[0], s[1]]) as f64 / 32768.0)
                .sum();
            sum / channels as f64
        })
        .collect();
    AudioClip {
        samples,
        sample_rate_hz: fmt.sample_rate,
        source_path: None,
        recorded_at: None,
    }
}

fn quantize(sample: f64) -> i16 {
    (sample * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Encode as a PCM16 mono WAV byte buffer.
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = (clip.samples.len() * 2) as u32;
    let rate = clip.sample_rate_hz;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &clip.samples {
        out.extend_from_slice(&quantize(s).to_le_bytes());
    }
    out
}

pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<(), AudioError> {
    let path = path.as_ref();
    fs::write(path, encode_wav(clip)).map_err(io_err(path))
}

/// Linear-interpolation resampling.
///
/// Output sample `i` sits at source position `i * src / target`; positions past
/// the last source sample hold the last value (edge-hold).
pub fn resample(clip: &AudioClip, target_hz: u32) -> Result<AudioClip, AudioError> {
    if !(MIN_RATE_HZ..=MAX_RATE_HZ).contains(&target_hz) {
        return Err(AudioError::BadRate(target_hz));
    }
    Ok(resample_unchecked(clip, target_hz))
}

pub(crate) fn resample_unchecked(clip: &AudioClip, target_hz: u32) -> AudioClip {
    if target_hz == clip.sample_rate_hz {
        return clip.clone();
    }
    let src = &clip.samples;
    let ratio = clip.sample_rate_hz as f64 / target_hz as f64;
    let out_len = ((src.len() as f64 * target_hz as f64) / clip.sample_rate_hz as f64).round() as usize;
    let last = src.len() - 1;
    let samples = (0..out_len.max(1))
        .map(|i| {
            let pos = i as f64 * ratio;
            let lo = pos.floor() as usize;
            if lo >= last {
                return src[last];
            }
            let frac = pos - lo as f64;
            src[lo] + (src[lo + 1] - src[lo]) * frac
        })
        .collect();
    AudioClip {
        samples,
        sample_rate_hz: target_hz,
        source_path: clip.source_path.clone(),
        recorded_at: clip.recorded_at,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wav_bytes(channels: u16, rate: u32, samples: &[i16]) -> Vec<u8> {
        let data_len = (samples.len() * 2) as u32;
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data_len).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * 2 * channels as u32).to_le_bytes());
        out.extend_from_slice(&(2 * channels).to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&data_len.to_le_bytes());
        for s in samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    #[test]
    fn pcm16_scaling() {
        let clip = decode_wav(&wav_bytes(1, 16_000, &[0, 16384, -32768])).unwrap();
        assert_eq!(clip.samples(), &[0.0, 0.5, -1.0]);
        assert_eq!(clip.sample_rate_hz(), 16_000);
    }

    #[test]
    fn stereo_is_averaged() {
        let clip = decode_wav(&wav_bytes(2, 16_000, &[i16::MAX, 0, -16384, -16384])).unwrap();
        assert_eq!(clip.len(), 2);
        assert!((clip.samples()[0] - 0.5).abs() < 1e-4);
        assert_eq!(clip.samples()[1], -0.5);
    }

    #[test]
    fn fifteen_second_file() {
        let clip = decode_wav(&wav_bytes(1, 16_000, &vec![0; 240_000])).unwrap();
        assert_eq!(clip.len(), 240_000);
        assert_eq!(clip.duration_seconds(), 15.0);
    }

    #[test]
    fn tolerates_extra_chunks_before_data() {
        let mut bytes = wav_bytes(1, 8_000, &[100, 200]);
        let data_at = bytes.len() - 12;
        let mut list = b"LIST".to_vec();
        list.extend_from_slice(&3u32.to_le_bytes());
        list.extend_from_slice(b"abc\0"); // odd size + pad byte
        bytes.splice(data_at..data_at, list);
        let clip = decode_wav(&bytes).unwrap();
        assert_eq!(clip.len(), 2);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(decode_wav(b"ID3\x03garbage-mp3-bytes"), Err(AudioError::NotWav(_))));

        let mut float = wav_bytes(1, 16_000, &[0, 0]);
        float[20] = 3; // IEEE float
        assert!(matches!(decode_wav(&float), Err(AudioError::UnsupportedEncoding(_))));

        let mut eight_bit = wav_bytes(1, 16_000, &[0, 0]);
        eight_bit[34] = 8;
        assert!(matches!(decode_wav(&eight_bit), Err(AudioError::UnsupportedEncoding(_))));

        let mut truncated = wav_bytes(1, 16_000, &[1, 2, 3, 4]);
        truncated.truncate(truncated.len() - 3);
        assert!(matches!(
            decode_wav(&truncated),
            Err(AudioError::TruncatedData { declared: 8, found: 5 })
        ));

        let low_rate = wav_bytes(1, 4_000, &[0]);
        assert!(matches!(decode_wav(&low_rate), Err(AudioError::UnsupportedEncoding(_))));
    }

    #[test]
    fn zeros_encode_to_zero_bytes() {
        let clip = AudioClip::new(vec![0.0; 160], 16_000).unwrap();
        let bytes = encode_wav(&clip);
        assert_eq!(u32_at(&bytes, 40), 320);
        assert_eq!(bytes.len(), 44 + 320);
        assert!(bytes[44..].iter().all(|&b| b == 0));
    }

    #[test]
    fn file_round_trip_keeps_length() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.wav");
        let clip = AudioClip::new((0..1234).map(|i| (i as f64 * 0.01).sin()).collect(), 22_050).unwrap();
        write_wav(&clip, &path).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.len(), clip.len());
        assert_eq!(back.sample_rate_hz(), 22_050);
        assert_eq!(back.source_path.as_deref(), Some(path.display().to_string().as_str()));
    }

    #[test]
    fn resample_identity_and_edge_hold() {
        let clip = AudioClip::new(vec![0.0, 1.0], 8_000).unwrap();
        assert_eq!(resample(&clip, 8_000).unwrap(), clip);
        // 2 Hz -> 4 Hz: positions 0, 0.5, 1, 1.5 (held)
        let tiny = AudioClip::new(vec![0.0, 1.0], 2).unwrap();
        assert_eq!(resample_unchecked(&tiny, 4).samples(), &[0.0, 0.5, 1.0, 1.0]);
    }

    #[test]
    fn resample_length_formula() {
        let clip = AudioClip::new(vec![0.0; 240_000], 16_000).unwrap();
        assert_eq!(resample(&clip, 44_100).unwrap().len(), 661_500);
        assert!(matches!(resample(&clip, 96_000), Err(AudioError::BadRate(96_000))));
        assert!(matches!(resample(&clip, 7_999), Err(AudioError::BadRate(_))));
    }

    proptest! {
        #[test]
        fn round_trip_error_within_quantization(
            samples in prop::collection::vec(-1.0f64..=1.0, 1..2000),
            rate in MIN_RATE_HZ..=MAX_RATE_HZ,
        ) {
            let clip = AudioClip::new(samples, rate).unwrap();
            let back = decode_wav(&encode_wav(&clip)).unwrap();
            prop_assert_eq!(back.len(), clip.len());
            for (a, b) in clip.samples().iter().zip(back.samples()) {
                prop_assert!((a - b).abs() <= 1.0 / 32768.0);
                prop_assert!((-1.0..=1.0).contains(b));
            }
        }

        #[test]
        fn decoded_samples_always_in_range(raw in prop::collection::vec(any::<i16>(), 2..512), stereo in any::<bool>()) {
            let channels = if stereo { 2 } else { 1 };
            let usable = raw.len() - raw.len() % channels as usize;
            let clip = decode_wav(&wav_bytes(channels, 16_000, &raw[..usable])).unwrap();
            prop_assert!(clip.samples().iter().all(|s| s.is_finite() && (-1.0..=1.0).contains(s)));
        }
    }
}

//! Deterministic pseudo-speech corpus with zone-dependent loudness, pacing
//! and breathing pauses.
//!
//! Voiced runs are harmonic tone bursts amplitude-modulated at a syllable
//! rate. Higher zones get shorter runs, longer and louder band-passed
//! breath noise between them, higher amplitude and raised pitch.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    write_manifest, CorpusError, HeartRateSeries, LabeledSample, ManifestRow, AGES_HEADER,
    HEART_RATE_HEADER,
};
use crate::audio_io::{self, AudioClip};
use crate::labeling::{self, ExertionZone, Method, RawRating, YnnsAnswer};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_participants: usize,
    pub clips_per_participant: usize,
    pub seed: u64,
    pub clip_seconds: f64,
    pub sample_rate_hz: u32,
}

impl SynthConfig {
    pub fn new(n_participants: usize, clips_per_participant: usize, seed: u64) -> Self {
        Self {
            n_participants,
            clips_per_participant,
            seed,
            clip_seconds: 15.0,
            sample_rate_hz: audio_io::CANONICAL_RATE_HZ,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParticipant {
    pub id: String,
    pub base_pitch_hz: f64,
    pub gain: f64,
    pub age_years: i64,
}

#[derive(Debug, Clone, PartialEq)]
struct ClipPlan {
    participant: usize,
    zone: ExertionZone,
    seed: u64,
}

/// Acoustic profile of one zone.
struct ZoneVoice {
    amplitude: f64,
    run_s: (f64, f64),
    pause_s: f64,
    pause_prob: f64,
    breath_amp: f64,
    pitch_scale: f64,
    syllable_hz: f64,
}

fn voice(zone: ExertionZone) -> ZoneVoice {
    match zone {
        ExertionZone::Light => ZoneVoice {
            amplitude: 0.16,
            run_s: (2.5, 4.0),
            pause_s: 0.2,
            pause_prob: 0.35,
            breath_amp: 0.01,
            pitch_scale: 1.0,
            syllable_hz: 4.0,
        },
        ExertionZone::Moderate => ZoneVoice {
            amplitude: 0.28,
            run_s: (1.2, 2.0),
            pause_s: 0.4,
            pause_prob: 1.0,
            breath_amp: 0.05,
            pitch_scale: 1.08,
            syllable_hz: 4.3,
        },
        ExertionZone::High => ZoneVoice {
            amplitude: 0.5,
            run_s: (0.4, 0.9),
            pause_s: 0.7,
            pause_prob: 1.0,
            breath_amp: 0.3,
            pitch_scale: 1.2,
            syllable_hz: 5.0,
        },
    }
}

/// Target fraction of HRmax per zone for the synthetic pulse trace.
fn pulse_fraction(zone: ExertionZone) -> f64 {
    match zone {
        ExertionZone::Light => 0.56,
        ExertionZone::Moderate => 0.70,
        ExertionZone::High => 0.85,
    }
}

const EPOCH_MS: i64 = 1_700_000_000_000;
const NOISE_FLOOR: f64 = 0.002;

fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over a simple combination
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    pub participants: Vec<SynthParticipant>,
    /// Wav paths are relative (`wav/<clip_id>.wav`).
    pub samples: Vec<LabeledSample>,
    pub heart_rate: BTreeMap<String, HeartRateSeries>,
    pub ages: BTreeMap<String, i64>,
    plans: Vec<ClipPlan>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthOutput {
    pub manifest: PathBuf,
    pub heart_rate: PathBuf,
    pub ages: PathBuf,
    pub wav_dir: PathBuf,
}

/// Plan a corpus. Audio is rendered on demand by [`SynthCorpus::render_clip`].
pub fn synth_corpus(config: SynthConfig) -> Result<SynthCorpus, CorpusError> {
    if config.n_participants < 5 {
        return Err(CorpusError::TooFewParticipants {
            needed: 5,
            found: config.n_participants,
        });
    }
    let n = config.clips_per_participant;
    let mut participants = Vec::new();
    let mut samples = Vec::new();
    let mut plans = Vec::new();
    let mut heart_rate = BTreeMap::new();
    let mut ages = BTreeMap::new();

    for p in 0..config.n_participants {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, p as u64, 0));
        let who = SynthParticipant {
            id: format!("p{p:02}"),
            base_pitch_hz: rng.random_range(90.0..220.0),
            gain: rng.random_range(0.85..1.2),
            age_years: rng.random_range(22..=58),
        };

        let light_share = 0.40 + rng.random_range(-0.08..0.08);
        let high_share = 0.25 + rng.random_range(-0.06..0.06);
        let mut n_light = (n as f64 * light_share).round() as usize;
        let mut n_high = (n as f64 * high_share).round() as usize;
        if n >= 3 {
            n_light = n_light.clamp(1, n - 2);
            n_high = n_high.clamp(1, n - n_light - 1);
        } else {
            n_light = n_light.min(n);
            n_high = n_high.min(n - n_light);
        }
        let n_moderate = n - n_light - n_high;
        // exertion ramps up over the session
        let zones = std::iter::repeat_n(ExertionZone::Light, n_light)
            .chain(std::iter::repeat_n(ExertionZone::Moderate, n_moderate))
            .chain(std::iter::repeat_n(ExertionZone::High, n_high));

        let hr_max = labeling::hr_max(who.age_years);
        let mut hr_points = Vec::new();
        for (c, zone) in zones.enumerate() {
            let clip_id = format!("{}-c{c:03}", who.id);
            let recorded_at_ms = EPOCH_MS + p as i64 * 3_600_000 + c as i64 * 60_000;
            let method = if c % 2 == 0 { Method::Ynns } else { Method::Borg };
            let raw = match (method, zone) {
                (Method::Ynns, ExertionZone::Light) => RawRating::Ynns(YnnsAnswer::Yes),
                (Method::Ynns, ExertionZone::Moderate) => RawRating::Ynns(YnnsAnswer::NotSure),
                (Method::Ynns, ExertionZone::High) => RawRating::Ynns(YnnsAnswer::No),
                (_, ExertionZone::Light) => RawRating::Borg(rng.random_range(6..=10)),
                (_, ExertionZone::Moderate) => RawRating::Borg(rng.random_range(11..=13)),
                (_, ExertionZone::High) => RawRating::Borg(rng.random_range(14..=17)),
            };
            let target = hr_max * (pulse_fraction(zone) + rng.random_range(-0.04..0.04));
            for s in 0..15 {
                let bpm = (target + rng.random_range(-3.0..3.0)).clamp(31.0, 229.0);
                hr_points.push((recorded_at_ms + s * 1000 + 500, bpm));
            }
            samples.push(LabeledSample {
                wav_path: PathBuf::from(format!("wav/{clip_id}.wav")),
                clip_id,
                participant_id: who.id.clone(),
                method,
                raw_rating: raw.to_string(),
                zone,
                recorded_at_ms,
                mean_pulse_bpm: None,
                pulse_zone: None,
            });
            plans.push(ClipPlan {
                participant: p,
                zone,
                seed: derive_seed(config.seed, p as u64, c as u64 + 1),
            });
        }
        heart_rate.insert(who.id.clone(), HeartRateSeries::new(who.id.clone(), hr_points)?);
        ages.insert(who.id.clone(), who.age_years);
        participants.push(who);
    }

    Ok(SynthCorpus {
        config,
        participants,
        samples,
        heart_rate,
        ages,
        plans,
    })
}

/// Two-pole band-pass (RBJ cookbook, constant 0 dB peak gain).
struct BandPass {
    b0: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

impl BandPass {
    fn new(center_hz: f64, q: f64, rate: f64) -> Self {
        let w0 = 2.0 * PI * center_hz / rate;
        let alpha = w0.sin() / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b0: alpha / a0,
            b2: -alpha / a0,
            a1: -2.0 * w0.cos() / a0,
            a2: (1.0 - alpha) / a0,
            x1: 0.0,
            x2: 0.0,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.b2 * self.x2 - self.a1 * self.y1 - self.a2 * self.y2;
        self.x2 = self.x1;
        self.x1 = x;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

const HARMONICS: usize = 8;

impl SynthCorpus {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Render clip `index`; identical output on every call.
    pub fn render_clip(&self, index: usize) -> AudioClip {
        let plan = &self.plans[index];
        let who = &self.participants[plan.participant];
        let v = voice(plan.zone);
        let rate = self.config.sample_rate_hz as f64;
        let total = (self.config.clip_seconds * rate).round() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);

        let amp = v.amplitude * who.gain * rng.random_range(0.9..1.1);
        let f0 = who.base_pitch_hz * v.pitch_scale * rng.random_range(0.97..1.03);
        let harmonic_norm: f64 = (1..=HARMONICS).map(|h| 1.0 / h as f64).sum();
        let mut breath = BandPass::new(rng.random_range(1200.0..1800.0), 0.8, rate);

        let mut out = Vec::with_capacity(total);
        let mut phase = 0.0f64;
        let mut voiced = rng.random_bool(0.8);
        while out.len() < total {
            let seconds = if voiced {
                rng.random_range(v.run_s.0..v.run_s.1)
            } else {
                v.pause_s * rng.random_range(0.8..1.2)
            };
            let seg_len = ((seconds * rate) as usize).min(total - out.len()).max(1);
            let fade = ((0.01 * rate) as usize).min(seg_len / 2).max(1);
            let syllable_phase = rng.random_range(0.0..2.0 * PI);
            for i in 0..seg_len {
                let t = i as f64 / rate;
                let edge = (i.min(seg_len - 1 - i) as f64 / fade as f64).min(1.0);
                let floor = NOISE_FLOOR * rng.random_range(-1.0..1.0);
                let s = if voiced {
                    let inst = f0 * (1.0 + 0.03 * (2.0 * PI * 0.7 * t).sin());
                    phase = (phase + 2.0 * PI * inst / rate) % (2.0 * PI);
                    let tone: f64 = (1..=HARMONICS)
                        .map(|h| (h as f64 * phase).sin() / h as f64)
                        .sum::<f64>()
                        / harmonic_norm;
                    let env = 0.55 + 0.45 * (2.0 * PI * v.syllable_hz * t + syllable_phase).sin();
                    amp * env * tone
                } else {
                    v.breath_amp * who.gain * 3.0 * breath.process(rng.random_range(-1.0..1.0))
                };
                out.push((edge * s + floor).clamp(-1.0, 1.0));
            }
            // without a pause the run simply continues as a new voiced segment
            voiced = !voiced || !rng.random_bool(v.pause_prob);
        }

        let mut clip = AudioClip::new(out, self.config.sample_rate_hz).expect("samples clamped to [-1, 1]");
        clip.recorded_at = Some(self.samples[index].recorded_at_ms);
        clip.source_path = Some(self.samples[index].wav_path.display().to_string());
        clip
    }

    /// Write `wav/`, `manifest.csv`, `heart_rate.csv` and `ages.csv` under `dir`.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<SynthOutput, CorpusError> {
        let dir = dir.as_ref();
        let wav_dir = dir.join("wav");
        fs::create_dir_all(&wav_dir)?;
        (0..self.len()).into_par_iter().try_for_each(|i| {
            let path = dir.join(&self.samples[i].wav_path);
            audio_io::write_wav(&self.render_clip(i), &path)
                .map_err(|e| CorpusError::Io(std::io::Error::other(e.to_string())))
        })?;

        let manifest = dir.join("manifest.csv");
        let wav_paths: Vec<String> = self.samples.iter().map(|s| s.wav_path.display().to_string()).collect();
        write_manifest(
            BufWriter::new(fs::File::create(&manifest)?),
            self.samples.iter().zip(&wav_paths).map(|(s, wav)| ManifestRow {
                clip_id: &s.clip_id,
                participant_id: &s.participant_id,
                wav_path: wav,
                method: s.method,
                raw_rating: &s.raw_rating,
                recorded_at_ms: s.recorded_at_ms,
            }),
        )?;

        let heart_rate = dir.join("heart_rate.csv");
        let mut w = csv::Writer::from_path(&heart_rate)?;
        w.write_record(HEART_RATE_HEADER)?;
        for series in self.heart_rate.values() {
            for (ts, bpm) in series.points() {
                w.write_record([series.participant_id.as_str(), &ts.to_string(), &format!("{bpm:.1}")])?;
            }
        }
        w.flush()?;

        let ages = dir.join("ages.csv");
        let mut w = csv::Writer::from_path(&ages)?;
        w.write_record(AGES_HEADER)?;
        for (pid, age) in &self.ages {
            w.write_record([pid.as_str(), &age.to_string()])?;
        }
        w.flush()?;

        Ok(SynthOutput {
            manifest,
            heart_rate,
            ages,
            wav_dir,
        })
    }
}

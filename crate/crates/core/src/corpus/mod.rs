//! Labeled datasets: manifests, heart-rate sync, grouped folds and the
//! synthetic exertion-speech corpus.

mod folds;
mod synth;

pub use folds::{assign_folds, FoldAssignment};
pub use synth::{synth_corpus, SynthConfig, SynthCorpus, SynthOutput};

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labeling::{self, ExertionZone, LabelError, Method, RawRating};

pub const MANIFEST_HEADER: [&str; 6] = [
    "clip_id",
    "participant_id",
    "wav_path",
    "method",
    "raw_rating",
    "recorded_at_ms",
];
pub const HEART_RATE_HEADER: [&str; 3] = ["participant_id", "timestamp_ms", "bpm"];
pub const AGES_HEADER: [&str; 2] = ["participant_id", "age_years"];

/// Heart-rate synchronization window: one clip.
pub const CLIP_WINDOW_S: f64 = 15.0;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("bad header in {file}: expected {expected:?}, found {found:?}")]
    BadHeader {
        file: String,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error("{} referenced wav file(s) missing: {}", .0.len(), .0.join(", "))]
    MissingAudio(Vec<String>),
    #[error("no heart-rate points for clip {clip_id} in its window")]
    NoOverlap { clip_id: String },
    #[error("heart-rate series is for {series}, sample belongs to {sample}")]
    ParticipantMismatch { series: String, sample: String },
    #[error("invalid heart-rate series: {0}")]
    BadSeries(String),
    #[error("need at least {needed} participants, found {found}")]
    TooFewParticipants { needed: usize, found: usize },
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Which ground truth a sample's label comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LabelSource {
    #[serde(rename = "SELF")]
    SelfReport,
    Pulse,
}

impl fmt::Display for LabelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SelfReport => "self",
            Self::Pulse => "pulse",
        })
    }
}

impl FromStr for LabelSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "self" => Ok(Self::SelfReport),
            "pulse" => Ok(Self::Pulse),
            other => Err(format!("unknown label source {other:?} (expected self or pulse)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub clip_id: String,
    pub participant_id: String,
    pub wav_path: PathBuf,
    pub method: Method,
    /// Rating exactly as it appeared in the manifest.
    pub raw_rating: String,
    /// Zone derived from the row's own method.
    pub zone: ExertionZone,
    pub recorded_at_ms: i64,
    pub mean_pulse_bpm: Option<f64>,
    pub pulse_zone: Option<ExertionZone>,
}

impl LabeledSample {
    /// Label under the requested ground truth, if available.
    pub fn label(&self, source: LabelSource) -> Option<ExertionZone> {
        match source {
            LabelSource::SelfReport => Some(self.zone),
            LabelSource::Pulse => self.pulse_zone,
        }
    }
}

/// Derive a zone from a manifest `raw_rating`. PULSE rows carry `bpm:age`.
pub fn zone_from_raw(method: Method, raw: &str) -> Result<ExertionZone, LabelError> {
    match method {
        Method::Pulse => {
            let (bpm, age) = raw
                .split_once(':')
                .ok_or_else(|| LabelError::BadToken(format!("{raw:?} (expected bpm:age)")))?;
            let bpm: f64 = bpm.trim().parse().map_err(|_| LabelError::BadToken(raw.to_string()))?;
            let age: i64 = age.trim().parse().map_err(|_| LabelError::BadToken(raw.to_string()))?;
            labeling::zone_from_pulse(bpm, age)
        }
        m => RawRating::parse(m, raw)?.zone(),
    }
}

fn check_header(file: &str, found: &csv::StringRecord, expected: &[&str]) -> Result<(), CorpusError> {
    let found: Vec<String> = found.iter().map(|s| s.trim().to_string()).collect();
    if found != expected {
        return Err(CorpusError::BadHeader {
            file: file.to_string(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found,
        });
    }
    Ok(())
}

/// Load a manifest CSV. Relative wav paths resolve against the manifest's
/// directory. Every referenced WAV must exist.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<LabeledSample>, CorpusError> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let samples = parse_manifest(File::open(path)?, base, &path.display().to_string())?;
    let missing: Vec<String> = samples
        .iter()
        .filter(|s| !s.wav_path.is_file())
        .map(|s| s.wav_path.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(CorpusError::MissingAudio(missing));
    }
    Ok(samples)
}

/// Parse manifest rows without touching the filesystem.
pub fn parse_manifest(reader: impl Read, base_dir: &Path, name: &str) -> Result<Vec<LabeledSample>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(name, rdr.headers()?, &MANIFEST_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        // row 1 is the header
        let row = i + 2;
        let rec = rec.map_err(|e| CorpusError::BadRow {
            row,
            reason: e.to_string(),
        })?;
        let bad = |reason: String| CorpusError::BadRow { row, reason };
        let field = |k: usize| rec.get(k).unwrap_or("");
        let clip_id = field(0).to_string();
        let participant_id = field(1).to_string();
        if clip_id.is_empty() || participant_id.is_empty() {
            return Err(bad("clip_id and participant_id must be non-empty".into()));
        }
        let method: Method = field(3).parse().map_err(|e: LabelError| bad(e.to_string()))?;
        let raw_rating = field(4).to_string();
        let zone = zone_from_raw(method, &raw_rating).map_err(|e| bad(e.to_string()))?;
        let recorded_at_ms: i64 = field(5)
            .parse()
            .map_err(|_| bad(format!("recorded_at_ms {:?} is not an integer", field(5))))?;
        let wav = PathBuf::from(field(2));
        let wav_path = if wav.is_absolute() { wav } else { base_dir.join(wav) };
        out.push(LabeledSample {
            clip_id,
            participant_id,
            wav_path,
            method,
            raw_rating,
            zone,
            recorded_at_ms,
            mean_pulse_bpm: None,
            pulse_zone: (method == Method::Pulse).then_some(zone),
        });
    }
    Ok(out)
}

/// One manifest row, in header order.
pub struct ManifestRow<'a> {
    pub clip_id: &'a str,
    pub participant_id: &'a str,
    pub wav_path: &'a str,
    pub method: Method,
    pub raw_rating: &'a str,
    pub recorded_at_ms: i64,
}

pub fn write_manifest<'a>(out: impl Write, rows: impl IntoIterator<Item = ManifestRow<'a>>) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MANIFEST_HEADER)?;
    for r in rows {
        w.write_record([
            r.clip_id,
            r.participant_id,
            r.wav_path,
            &r.method.to_string(),
            r.raw_rating,
            &r.recorded_at_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeartRateSeries {
    pub participant_id: String,
    points: Vec<(i64, f64)>,
}

impl HeartRateSeries {
    pub fn new(participant_id: impl Into<String>, points: Vec<(i64, f64)>) -> Result<Self, CorpusError> {
        if let Some(w) = points.windows(2).find(|w| w[1].0 <= w[0].0) {
            return Err(CorpusError::BadSeries(format!(
                "timestamps not strictly increasing at {} -> {}",
                w[0].0, w[1].0
            )));
        }
        if let Some(p) = points.iter().find(|p| !(p.1 > 30.0 && p.1 < 230.0)) {
            return Err(CorpusError::BadSeries(format!("bpm {} at {} outside (30, 230)", p.1, p.0)));
        }
        Ok(Self {
            participant_id: participant_id.into(),
            points,
        })
    }

    pub fn points(&self) -> &[(i64, f64)] {
        &self.points
    }
}

/// Load `participant_id,timestamp_ms,bpm`; rows may arrive in any order.
pub fn load_heart_rate(path: impl AsRef<Path>) -> Result<BTreeMap<String, HeartRateSeries>, CorpusError> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    check_header(&path.display().to_string(), rdr.headers()?, &HEART_RATE_HEADER)?;
    let mut raw: BTreeMap<String, Vec<(i64, f64)>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let bad = |what: &str| CorpusError::BadRow {
            row,
            reason: format!("{what} is not a number"),
        };
        let ts: i64 = rec[1].parse().map_err(|_| bad("timestamp_ms"))?;
        let bpm: f64 = rec[2].parse().map_err(|_| bad("bpm"))?;
        raw.entry(rec[0].to_string()).or_default().push((ts, bpm));
    }
    raw.into_iter()
        .map(|(pid, mut pts)| {
            pts.sort_by_key(|p| p.0);
            let series = HeartRateSeries::new(pid.clone(), pts)?;
            Ok((pid, series))
        })
        .collect()
}

pub fn load_ages(path: impl AsRef<Path>) -> Result<BTreeMap<String, i64>, CorpusError> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    check_header(&path.display().to_string(), rdr.headers()?, &AGES_HEADER)?;
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let age: i64 = rec[1].parse().map_err(|_| CorpusError::BadRow {
            row: i + 2,
            reason: format!("age {:?} is not an integer", &rec[1]),
        })?;
        out.insert(rec[0].to_string(), age);
    }
    Ok(out)
}

/// Attach the mean pulse over `[recorded_at, recorded_at + window_s]` and,
/// when the age is known, the pulse-derived zone.
pub fn sync_pulse(
    sample: &LabeledSample,
    series: &HeartRateSeries,
    window_s: f64,
    age_years: Option<i64>,
) -> Result<LabeledSample, CorpusError> {
    if series.participant_id != sample.participant_id {
        return Err(CorpusError::ParticipantMismatch {
            series: series.participant_id.clone(),
            sample: sample.participant_id.clone(),
        });
    }
    let start = sample.recorded_at_ms;
    let end = start + (window_s * 1000.0).round() as i64;
    let lo = series.points.partition_point(|p| p.0 < start);
    let hi = series.points.partition_point(|p| p.0 <= end);
    let window = &series.points[lo..hi];
    if window.is_empty() {
        return Err(CorpusError::NoOverlap {
            clip_id: sample.clip_id.clone(),
        });
    }
    let mean = window.iter().map(|p| p.1).sum::<f64>() / window.len() as f64;
    let mut out = sample.clone();
    out.mean_pulse_bpm = Some(mean);
    if let Some(age) = age_years {
        out.pulse_zone = Some(labeling::zone_from_pulse(mean, age)?);
    }
    Ok(out)
}

/// Sync every sample, failing with the list of clips lacking coverage.
pub fn sync_all(
    samples: &[LabeledSample],
    series: &BTreeMap<String, HeartRateSeries>,
    ages: &BTreeMap<String, i64>,
) -> Result<Vec<LabeledSample>, CorpusError> {
    samples
        .iter()
        .map(|s| {
            let hr = series.get(&s.participant_id).ok_or_else(|| CorpusError::NoOverlap {
                clip_id: s.clip_id.clone(),
            })?;
            sync_pulse(s, hr, CLIP_WINDOW_S, ages.get(&s.participant_id).copied())
        })
        .collect()
}

//! Exertion zones from YNNS answers, BORG RPE ratings and pulse.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabelError {
    #[error("BORG rating {0} outside the 6-20 scale")]
    OutOfScale(i64),
    #[error("age {0} outside [18, 100]")]
    BadAge(i64),
    #[error("pulse {0} bpm outside [30, 230]")]
    BadPulse(f64),
    #[error("unrecognized rating token {0:?}")]
    BadToken(String),
    #[error("rating input for {method} is missing {field}")]
    MissingField { method: Method, field: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExertionZone {
    Light,
    Moderate,
    High,
}

impl ExertionZone {
    pub const ALL: [ExertionZone; 3] = [Self::Light, Self::Moderate, Self::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Light => "light",
            Self::Moderate => "moderate",
            Self::High => "high",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ExertionZone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExertionZone {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "light" => Ok(Self::Light),
            "moderate" => Ok(Self::Moderate),
            "high" => Ok(Self::High),
            other => Err(LabelError::BadToken(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryZone {
    NonHigh,
    High,
}

impl BinaryZone {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::NonHigh => "non_high",
            Self::High => "high",
        }
    }
}

impl fmt::Display for BinaryZone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Ynns,
    Borg,
    Pulse,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ynns => "YNNS",
            Self::Borg => "BORG",
            Self::Pulse => "PULSE",
        })
    }
}

impl FromStr for Method {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "YNNS" => Ok(Self::Ynns),
            "BORG" => Ok(Self::Borg),
            "PULSE" => Ok(Self::Pulse),
            _ => Err(LabelError::BadToken(s.to_string())),
        }
    }
}

/// Answer to "can you still speak comfortably?".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum YnnsAnswer {
    Yes,
    NotSure,
    No,
}

impl YnnsAnswer {
    pub fn token(self) -> &'static str {
        match self {
            Self::Yes => "Yes",
            Self::NotSure => "NotSure",
            Self::No => "No",
        }
    }
}

impl fmt::Display for YnnsAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for YnnsAnswer {
    type Err = LabelError;

    /// Accepts `Yes`, `NotSure`, `Not sure`, `not_sure`, `No` in any case.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_' && *c != '-')
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "yes" => Ok(Self::Yes),
            "notsure" => Ok(Self::NotSure),
            "no" => Ok(Self::No),
            _ => Err(LabelError::BadToken(s.to_string())),
        }
    }
}

pub const BORG_MIN: i64 = 6;
pub const BORG_MAX: i64 = 20;

/// Fractions of age-predicted HRmax where Moderate and High begin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseThresholds {
    pub moderate_from: f64,
    pub high_from: f64,
}

impl Default for PulseThresholds {
    fn default() -> Self {
        Self {
            moderate_from: 0.64,
            high_from: 0.77,
        }
    }
}

pub fn zone_from_ynns(answer: YnnsAnswer) -> ExertionZone {
    match answer {
        YnnsAnswer::Yes => ExertionZone::Light,
        YnnsAnswer::NotSure => ExertionZone::Moderate,
        YnnsAnswer::No => ExertionZone::High,
    }
}

pub fn zone_from_borg(rating: i64) -> Result<ExertionZone, LabelError> {
    match rating {
        6..=10 => Ok(ExertionZone::Light),
        11..=13 => Ok(ExertionZone::Moderate),
        14..=20 => Ok(ExertionZone::High),
        other => Err(LabelError::OutOfScale(other)),
    }
}

pub fn hr_max(age_years: i64) -> f64 {
    (220 - age_years) as f64
}

pub fn zone_from_pulse(pulse_bpm: f64, age_years: i64) -> Result<ExertionZone, LabelError> {
    zone_from_pulse_with(pulse_bpm, age_years, PulseThresholds::default())
}

pub fn zone_from_pulse_with(
    pulse_bpm: f64,
    age_years: i64,
    thresholds: PulseThresholds,
) -> Result<ExertionZone, LabelError> {
    if !(18..=100).contains(&age_years) {
        return Err(LabelError::BadAge(age_years));
    }
    if !(30.0..=230.0).contains(&pulse_bpm) {
        return Err(LabelError::BadPulse(pulse_bpm));
    }
    let fraction = pulse_bpm / hr_max(age_years);
    Ok(if fraction >= thresholds.high_from {
        ExertionZone::High
    } else if fraction >= thresholds.moderate_from {
        ExertionZone::Moderate
    } else {
        ExertionZone::Light
    })
}

pub fn to_binary(zone: ExertionZone) -> BinaryZone {
    match zone {
        ExertionZone::High => BinaryZone::High,
        ExertionZone::Light | ExertionZone::Moderate => BinaryZone::NonHigh,
    }
}

/// Raw self-report as captured by a session or manifest row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawRating {
    Borg(i64),
    Ynns(YnnsAnswer),
}

impl RawRating {
    pub fn method(&self) -> Method {
        match self {
            Self::Borg(_) => Method::Borg,
            Self::Ynns(_) => Method::Ynns,
        }
    }

    pub fn zone(&self) -> Result<ExertionZone, LabelError> {
        match *self {
            Self::Borg(r) => zone_from_borg(r),
            Self::Ynns(a) => Ok(zone_from_ynns(a)),
        }
    }

    /// Parse the textual form used in manifests for the given method.
    pub fn parse(method: Method, token: &str) -> Result<Self, LabelError> {
        match method {
            Method::Ynns => Ok(Self::Ynns(token.parse()?)),
            Method::Borg => {
                let r: i64 = token
                    .trim()
                    .parse()
                    .map_err(|_| LabelError::BadToken(token.to_string()))?;
                zone_from_borg(r)?;
                Ok(Self::Borg(r))
            }
            Method::Pulse => Err(LabelError::BadToken(format!("{token:?} is not a self-report"))),
        }
    }
}

impl fmt::Display for RawRating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Borg(r) => write!(f, "{r}"),
            Self::Ynns(a) => f.write_str(a.token()),
        }
    }
}

/// Everything needed to derive one zone, tagged by source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingInput {
    pub method: Method,
    pub ynns: Option<YnnsAnswer>,
    pub borg: Option<i64>,
    pub pulse_bpm: Option<f64>,
    pub age_years: Option<i64>,
}

impl RatingInput {
    pub fn zone(&self) -> Result<ExertionZone, LabelError> {
        let missing = |field| LabelError::MissingField {
            method: self.method,
            field,
        };
        match self.method {
            Method::Ynns => Ok(zone_from_ynns(self.ynns.ok_or_else(|| missing("ynns"))?)),
            Method::Borg => zone_from_borg(self.borg.ok_or_else(|| missing("borg"))?),
            Method::Pulse => zone_from_pulse(
                self.pulse_bpm.ok_or_else(|| missing("pulse_bpm"))?,
                self.age_years.ok_or_else(|| missing("age_years"))?,
            ),
        }
    }
}

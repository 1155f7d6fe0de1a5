//! Guided assessment protocol as a deterministic state machine.
//!
//! The engine only checks event order. Wall-clock windows (recording length,
//! rating timeout, retake window) are enforced by whoever raises the events.

mod export;
mod script;

pub use export::{records_csv, records_json};
pub use script::{nominal_script, simulate, ScriptError, Simulation, TimedEvent};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labeling::{to_binary, BinaryZone, ExertionZone, LabelError, Method, RawRating};

pub const DEFAULT_READING_TEXT: &str = "The path follows the river past the old mill and over a small stone bridge. \
Children often stop there to watch the ducks before walking on toward the market square.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: &'static str,
    pub reason: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

fn join_fields(errors: &[FieldError]) -> String {
    errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid session config: {}", join_fields(.0))]
    InvalidConfig(Vec<FieldError>),
    #[error("illegal transition: {event} in state {state}")]
    IllegalTransition { state: Phase, event: EventKind },
    #[error("invalid rating: {0}")]
    InvalidRating(String),
    #[error("clock went backwards: event at {now_ms} after transition at {last_ms}")]
    ClockRegression { last_ms: i64, now_ms: i64 },
}

impl EngineError {
    /// Short machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Self::InvalidConfig(_) => "invalid_config",
            Self::IllegalTransition { .. } => "illegal_transition",
            Self::InvalidRating(_) => "invalid_rating",
            Self::ClockRegression { .. } => "clock_regression",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub method: Method,
    pub participant_id: String,
    #[serde(default = "defaults::interval_s")]
    pub interval_s: u32,
    #[serde(default = "defaults::repetitions")]
    pub repetitions: u32,
    #[serde(default = "defaults::warmup_s")]
    pub warmup_s: u32,
    #[serde(default = "defaults::reading_text")]
    pub reading_text: String,
    #[serde(default = "defaults::record_s")]
    pub record_s: u32,
    #[serde(default = "defaults::rating_timeout_s")]
    pub rating_timeout_s: u32,
    #[serde(default = "defaults::retake_window_s")]
    pub retake_window_s: u32,
    #[serde(default)]
    pub age_years: Option<i64>,
}

mod defaults {
    pub fn interval_s() -> u32 {
        60
    }
    pub fn repetitions() -> u32 {
        10
    }
    pub fn warmup_s() -> u32 {
        120
    }
    pub fn reading_text() -> String {
        super::DEFAULT_READING_TEXT.to_string()
    }
    pub fn record_s() -> u32 {
        15
    }
    pub fn rating_timeout_s() -> u32 {
        10
    }
    pub fn retake_window_s() -> u32 {
        15
    }
}

impl SessionConfig {
    pub fn new(method: Method, participant_id: impl Into<String>) -> Self {
        Self {
            method,
            participant_id: participant_id.into(),
            interval_s: defaults::interval_s(),
            repetitions: defaults::repetitions(),
            warmup_s: defaults::warmup_s(),
            reading_text: defaults::reading_text(),
            record_s: defaults::record_s(),
            rating_timeout_s: defaults::rating_timeout_s(),
            retake_window_s: defaults::retake_window_s(),
            age_years: None,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let mut errs = Vec::new();
        let mut bad = |field, reason: String| errs.push(FieldError { field, reason });
        if self.method == Method::Pulse {
            bad("method", "sessions are self-rated; use YNNS or BORG".into());
        }
        if self.participant_id.trim().is_empty() {
            bad("participant_id", "must not be empty".into());
        }
        if self.repetitions < 1 {
            bad("repetitions", "must be at least 1".into());
        }
        if self.record_s == 0 {
            bad("record_s", "must be at least 1".into());
        }
        if u64::from(self.interval_s) < u64::from(self.record_s) + u64::from(self.rating_timeout_s) {
            bad(
                "interval_s",
                format!(
                    "{} is shorter than record_s + rating_timeout_s = {}",
                    self.interval_s,
                    u64::from(self.record_s) + u64::from(self.rating_timeout_s)
                ),
            );
        }
        if self.reading_text.trim().is_empty() {
            bad("reading_text", "must not be empty".into());
        }
        if let Some(age) = self.age_years {
            if !(1..=120).contains(&age) {
                bad("age_years", format!("{age} is not a plausible age"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(EngineError::InvalidConfig(errs))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Configured,
    WarmUp,
    Reading,
    AwaitingRating,
    Feedback,
    Paused,
    RetakeOffered,
    Completed,
    Aborted,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Configured => "configured",
            Self::WarmUp => "warm_up",
            Self::Reading => "reading",
            Self::AwaitingRating => "awaiting_rating",
            Self::Feedback => "feedback",
            Self::Paused => "paused",
            Self::RetakeOffered => "retake_offered",
            Self::Completed => "completed",
            Self::Aborted => "aborted",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Self::Completed | Self::Aborted)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Event payload for a rating; accepts a JSON string or integer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RatingToken {
    Number(i64),
    Text(String),
}

impl RatingToken {
    fn as_text(&self) -> String {
        match self {
            Self::Number(n) => n.to_string(),
            Self::Text(s) => s.clone(),
        }
    }
}

impl From<&str> for RatingToken {
    fn from(s: &str) -> Self {
        Self::Text(s.to_string())
    }
}

impl From<i64> for RatingToken {
    fn from(n: i64) -> Self {
        Self::Number(n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    TimerElapsed,
    RecordingDone {
        clip_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        wav_path: Option<String>,
    },
    RatingGiven {
        raw: RatingToken,
    },
    RatingTimeout,
    TouchFallback {
        raw: RatingToken,
    },
    RetakeRequested,
    RetakeDeclined,
    PauseRequested,
    ResumeRequested,
    AbortRequested,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    TimerElapsed,
    RecordingDone,
    RatingGiven,
    RatingTimeout,
    TouchFallback,
    RetakeRequested,
    RetakeDeclined,
    PauseRequested,
    ResumeRequested,
    AbortRequested,
}

impl EventKind {
    pub const ALL: [EventKind; 10] = [
        Self::TimerElapsed,
        Self::RecordingDone,
        Self::RatingGiven,
        Self::RatingTimeout,
        Self::TouchFallback,
        Self::RetakeRequested,
        Self::RetakeDeclined,
        Self::PauseRequested,
        Self::ResumeRequested,
        Self::AbortRequested,
    ];
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        f.write_str(s.as_ref().and_then(|v| v.as_str()).unwrap_or("event"))
    }
}

impl SessionEvent {
    pub fn kind(&self) -> EventKind {
        match self {
            Self::TimerElapsed => EventKind::TimerElapsed,
            Self::RecordingDone { .. } => EventKind::RecordingDone,
            Self::RatingGiven { .. } => EventKind::RatingGiven,
            Self::RatingTimeout => EventKind::RatingTimeout,
            Self::TouchFallback { .. } => EventKind::TouchFallback,
            Self::RetakeRequested => EventKind::RetakeRequested,
            Self::RetakeDeclined => EventKind::RetakeDeclined,
            Self::PauseRequested => EventKind::PauseRequested,
            Self::ResumeRequested => EventKind::ResumeRequested,
            Self::AbortRequested => EventKind::AbortRequested,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatedVia {
    Primary,
    TimeoutFallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingClip {
    pub clip_id: String,
    pub wav_path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub phase: Phase,
    /// Phase to return to; set only while paused.
    pub resume_to: Option<Phase>,
    pub cycle_index: u32,
    /// Time of the last transition, UTC ms.
    pub clock_ms: i64,
    pub fallback_armed: bool,
    pub retaking: bool,
    pub pending_clip: Option<PendingClip>,
    pub cycle_started_at: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessmentRecord {
    pub cycle_index: u32,
    pub clip_id: String,
    pub wav_path: String,
    pub method: Method,
    pub raw_rating: RawRating,
    pub zone: ExertionZone,
    pub rated_via: RatedVia,
    pub retaken: bool,
    pub superseded: bool,
    pub started_at: i64,
    pub rated_at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub cycle_index: u32,
    pub zone: ExertionZone,
    pub binary: BinaryZone,
    pub message: String,
}

impl Feedback {
    fn for_zone(cycle_index: u32, zone: ExertionZone) -> Self {
        let message = match zone {
            ExertionZone::Light => "Light effort: you can talk comfortably.",
            ExertionZone::Moderate => "Moderate effort: talking takes some work.",
            ExertionZone::High => "High effort: talking is hard at this pace.",
        };
        Self {
            cycle_index,
            zone,
            binary: to_binary(zone),
            message: message.to_string(),
        }
    }
}

/// Outcome of one accepted event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: SessionState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record: Option<AssessmentRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feedback: Option<Feedback>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub config: SessionConfig,
    pub state: SessionState,
    /// Every record in order, superseded ones included.
    pub records: Vec<AssessmentRecord>,
}

impl Session {
    /// A validated session that has not started yet; the first
    /// `TimerElapsed` starts it.
    pub fn configure(config: SessionConfig, now_ms: i64) -> Result<Self, EngineError> {
        config.validate()?;
        Ok(Self {
            config,
            state: SessionState {
                phase: Phase::Configured,
                resume_to: None,
                cycle_index: 0,
                clock_ms: now_ms,
                fallback_armed: false,
                retaking: false,
                pending_clip: None,
                cycle_started_at: None,
            },
            records: Vec::new(),
        })
    }

    /// Warm-up if configured, else straight to reading cycle 0.
    pub fn start(config: SessionConfig, now_ms: i64) -> Result<Self, EngineError> {
        let mut s = Self::configure(config, now_ms)?;
        s.advance(&SessionEvent::TimerElapsed, now_ms)?;
        Ok(s)
    }

    /// Records that count: one per finished cycle.
    pub fn active_records(&self) -> impl Iterator<Item = &AssessmentRecord> {
        self.records.iter().filter(|r| !r.superseded)
    }

    fn enter_reading(&mut self, now_ms: i64) {
        let st = &mut self.state;
        st.phase = Phase::Reading;
        st.fallback_armed = false;
        st.pending_clip = None;
        st.cycle_started_at = Some(now_ms);
    }

    fn rate(&mut self, raw: &RatingToken, via: RatedVia, now_ms: i64) -> Result<Step, EngineError> {
        let token = raw.as_text();
        let rating = RawRating::parse(self.config.method, &token).map_err(|e| match e {
            LabelError::OutOfScale(r) => EngineError::InvalidRating(format!("BORG rating {r} is outside 6-20")),
            other => EngineError::InvalidRating(format!("{token:?} is not a {} rating: {other}", self.config.method)),
        })?;
        let zone = rating.zone().map_err(|e| EngineError::InvalidRating(e.to_string()))?;
        let st = &mut self.state;
        let clip = st.pending_clip.take().expect("awaiting rating implies a pending clip");
        let record = AssessmentRecord {
            cycle_index: st.cycle_index,
            clip_id: clip.clip_id,
            wav_path: clip.wav_path,
            method: self.config.method,
            raw_rating: rating,
            zone,
            rated_via: via,
            retaken: st.retaking,
            superseded: false,
            started_at: st.cycle_started_at.unwrap_or(now_ms),
            rated_at: now_ms,
        };
        st.phase = Phase::Feedback;
        st.fallback_armed = false;
        st.retaking = false;
        self.records.push(record.clone());
        Ok(Step {
            state: self.state.clone(),
            record: Some(record),
            feedback: Some(Feedback::for_zone(self.state.cycle_index, zone)),
        })
    }

    /// Apply one event. On error the session is unchanged.
    pub fn advance(&mut self, event: &SessionEvent, now_ms: i64) -> Result<Step, EngineError> {
        if now_ms < self.state.clock_ms {
            return Err(EngineError::ClockRegression {
                last_ms: self.state.clock_ms,
                now_ms,
            });
        }
        let phase = self.state.phase;
        let illegal = || EngineError::IllegalTransition {
            state: phase,
            event: event.kind(),
        };
        if phase.is_terminal() {
            return Err(illegal());
        }

        use SessionEvent as E;
        let step = match (phase, event) {
            (_, E::AbortRequested) => {
                self.state.phase = Phase::Aborted;
                self.state.resume_to = None;
                None
            }
            (Phase::Paused, E::ResumeRequested) => {
                self.state.phase = self.state.resume_to.take().expect("paused state stores its target");
                None
            }
            (Phase::Paused, _) => return Err(illegal()),
            (_, E::PauseRequested) => {
                self.state.resume_to = Some(phase);
                self.state.phase = Phase::Paused;
                None
            }
            (Phase::Configured, E::TimerElapsed) => {
                if self.config.warmup_s > 0 {
                    self.state.phase = Phase::WarmUp;
                } else {
                    self.enter_reading(now_ms);
                }
                None
            }
            (Phase::WarmUp, E::TimerElapsed) => {
                self.enter_reading(now_ms);
                None
            }
            (Phase::Reading, E::RecordingDone { clip_id, wav_path }) => {
                if clip_id.trim().is_empty() {
                    return Err(illegal());
                }
                self.state.pending_clip = Some(PendingClip {
                    clip_id: clip_id.clone(),
                    wav_path: wav_path.clone().unwrap_or_else(|| format!("{clip_id}.wav")),
                });
                self.state.phase = Phase::AwaitingRating;
                None
            }
            (Phase::AwaitingRating, E::RatingGiven { raw }) if !self.state.fallback_armed => {
                Some(self.rate(raw, RatedVia::Primary, now_ms)?)
            }
            (Phase::AwaitingRating, E::RatingTimeout) if !self.state.fallback_armed => {
                self.state.fallback_armed = true;
                None
            }
            (Phase::AwaitingRating, E::TouchFallback { raw }) if self.state.fallback_armed => {
                Some(self.rate(raw, RatedVia::TimeoutFallback, now_ms)?)
            }
            (Phase::Feedback, E::TimerElapsed) => {
                self.state.phase = Phase::RetakeOffered;
                None
            }
            (Phase::RetakeOffered, E::RetakeRequested) => {
                let cycle = self.state.cycle_index;
                if let Some(r) = self.records.iter_mut().rev().find(|r| r.cycle_index == cycle && !r.superseded) {
                    r.superseded = true;
                }
                self.state.retaking = true;
                self.enter_reading(now_ms);
                None
            }
            (Phase::RetakeOffered, E::RetakeDeclined | E::TimerElapsed) => {
                self.state.cycle_index += 1;
                if self.state.cycle_index >= self.config.repetitions {
                    self.state.phase = Phase::Completed;
                    self.state.cycle_started_at = None;
                } else {
                    self.enter_reading(now_ms);
                }
                None
            }
            _ => return Err(illegal()),
        };
        self.state.clock_ms = now_ms;
        Ok(match step {
            Some(mut s) => {
                s.state = self.state.clone();
                s
            }
            None => Step {
                state: self.state.clone(),
                record: None,
                feedback: None,
            },
        })
    }
}

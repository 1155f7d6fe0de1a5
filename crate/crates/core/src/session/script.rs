use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AssessmentRecord, EngineError, RatingToken, Session, SessionConfig, SessionEvent, SessionState};
use crate::labeling::Method;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub at_ms: i64,
    #[serde(flatten)]
    pub event: SessionEvent,
}

impl TimedEvent {
    pub fn new(at_ms: i64, event: SessionEvent) -> Self {
        Self { at_ms, event }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("script event {position}: {source}")]
pub struct ScriptError {
    pub position: usize,
    pub source: EngineError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    /// One record per finished cycle.
    pub records: Vec<AssessmentRecord>,
    /// All records including superseded ones.
    pub history: Vec<AssessmentRecord>,
    pub final_state: SessionState,
}

/// Start a session at `start_ms` and replay `script` through it.
pub fn simulate(config: &SessionConfig, start_ms: i64, script: &[TimedEvent]) -> Result<Simulation, ScriptError> {
    let mut session = Session::start(config.clone(), start_ms).map_err(|source| ScriptError { position: 0, source })?;
    for (position, te) in script.iter().enumerate() {
        session
            .advance(&te.event, te.at_ms)
            .map_err(|source| ScriptError { position, source })?;
    }
    Ok(Simulation {
        records: session.active_records().cloned().collect(),
        history: session.records,
        final_state: session.state,
    })
}

/// Rating a ramping session would give on cycle `i` of `n`.
fn ramp_rating(method: Method, i: u32, n: u32) -> RatingToken {
    let frac = if n <= 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
    match method {
        Method::Borg => RatingToken::Number(7 + (frac * 10.0).round() as i64),
        _ => RatingToken::Text(
            match (frac * 3.0) as u32 {
                0 => "Yes",
                1 => "NotSure",
                _ => "No",
            }
            .into(),
        ),
    }
}

/// Script for an uneventful session started at `start_ms`: warm-up, then
/// every cycle records, rates promptly, shows feedback and lets the retake
/// window lapse. Each cycle spans exactly `interval_s`.
pub fn nominal_script(config: &SessionConfig, start_ms: i64) -> Vec<TimedEvent> {
    let mut out = Vec::new();
    let mut t = start_ms;
    if config.warmup_s > 0 {
        t += i64::from(config.warmup_s) * 1000;
        out.push(TimedEvent::new(t, SessionEvent::TimerElapsed));
    }
    let interval = i64::from(config.interval_s) * 1000;
    let record = i64::from(config.record_s) * 1000;
    let retake = i64::from(config.retake_window_s) * 1000;
    for i in 0..config.repetitions {
        let cycle_start = t;
        let recorded = cycle_start + record;
        let rated = recorded + 2000.min(i64::from(config.rating_timeout_s) * 1000);
        let feedback_end = (cycle_start + interval - retake).max(rated + 1).min(cycle_start + interval);
        out.push(TimedEvent::new(
            recorded,
            SessionEvent::RecordingDone {
                clip_id: format!("{}-c{i:03}", config.participant_id),
                wav_path: None,
            },
        ));
        out.push(TimedEvent::new(
            rated,
            SessionEvent::RatingGiven {
                raw: ramp_rating(config.method, i, config.repetitions),
            },
        ));
        out.push(TimedEvent::new(feedback_end, SessionEvent::TimerElapsed));
        t = cycle_start + interval;
        out.push(TimedEvent::new(t, SessionEvent::TimerElapsed));
    }
    out
}

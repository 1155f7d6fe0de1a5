use super::AssessmentRecord;
use crate::corpus::{write_manifest, ManifestRow};

/// Non-superseded records as a corpus manifest; `recorded_at_ms` is the
/// cycle's reading start.
pub fn records_csv<'a>(participant_id: &str, records: impl IntoIterator<Item = &'a AssessmentRecord>) -> String {
    let records: Vec<&AssessmentRecord> = records.into_iter().filter(|r| !r.superseded).collect();
    let ratings: Vec<String> = records.iter().map(|r| r.raw_rating.to_string()).collect();
    let mut out = Vec::new();
    write_manifest(
        &mut out,
        records.iter().zip(&ratings).map(|(r, raw)| ManifestRow {
            clip_id: &r.clip_id,
            participant_id,
            wav_path: &r.wav_path,
            method: r.method,
            raw_rating: raw,
            recorded_at_ms: r.started_at,
        }),
    )
    .expect("writing to a Vec cannot fail");
    String::from_utf8(out).expect("manifest is utf-8")
}

/// Full history, superseded records included.
pub fn records_json<'a>(records: impl IntoIterator<Item = &'a AssessmentRecord>) -> String {
    let all: Vec<&AssessmentRecord> = records.into_iter().collect();
    serde_json::to_string_pretty(&all).expect("records serialize")
}

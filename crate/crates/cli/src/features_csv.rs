//! Feature table: `clip_id,participant_id,zone,mfcc_0..mfcc_{n-1}`, values
//! at 6 decimals, rows sorted by clip id.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use aktivtalk_core::corpus::LabeledSample;
use aktivtalk_core::dsp::FeatureVector;

pub fn render(rows: &[(&LabeledSample, &FeatureVector)]) -> String {
    let mut sorted: Vec<_> = rows.to_vec();
    sorted.sort_by(|a, b| a.0.clip_id.cmp(&b.0.clip_id));
    let dim = sorted.first().map_or(0, |r| r.1.values.len());
    let mut out = String::from("clip_id,participant_id,zone");
    for i in 0..dim {
        let _ = write!(out, ",mfcc_{i}");
    }
    out.push('\n');
    for (s, f) in sorted {
        let _ = write!(out, "{},{},{}", s.clip_id, s.participant_id, s.zone);
        for v in &f.values {
            let _ = write!(out, ",{v:.6}");
        }
        out.push('\n');
    }
    out
}

/// Rows keyed by clip id, with the participant id and zone as written.
pub fn parse(text: &str) -> Result<BTreeMap<String, (String, String, FeatureVector)>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty feature file")?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 4 || cols[..3] != ["clip_id", "participant_id", "zone"] {
        return Err(format!("unexpected feature header {header:?}"));
    }
    let dim = cols.len() - 3;
    let mut out = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != dim + 3 {
            return Err(format!(
                "feature row {} has {} columns, expected {}",
                i + 2,
                parts.len(),
                dim + 3
            ));
        }
        let values = parts[3..]
            .iter()
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("feature row {}: {v:?} is not a number", i + 2))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let clip_id = parts[0].to_string();
        out.insert(
            clip_id.clone(),
            (
                parts[1].to_string(),
                parts[2].to_string(),
                FeatureVector { values, clip_id },
            ),
        );
    }
    Ok(out)
}

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{DspError, MelSpectrogram};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpectrogramFiles {
    pub csv: PathBuf,
    pub pgm: PathBuf,
}

/// One line per frame, mel bands as comma-separated fields with six decimals.
pub fn spectrogram_csv(spec: &MelSpectrogram) -> String {
    let mut out = String::new();
    for frame in spec.frames() {
        for (i, v) in frame.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{v:.6}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Binary P5 graymap: width = frames, height = mel bands with the highest
/// band on the top row. Min-max normalized per image; a constant image is
/// all zeros.
pub fn pgm_bytes(spec: &MelSpectrogram) -> Vec<u8> {
    let (width, height) = (spec.n_frames(), spec.n_mels());
    let (lo, hi) = spec
        .cells()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.reserve(width * height);
    for band in (0..height).rev() {
        for t in 0..width {
            let v = spec.frame(t)[band];
            let px = if range > 0.0 {
                (255.0 * (v - lo) / range).round() as u8
            } else {
                0
            };
            out.push(px);
        }
    }
    out
}

/// Writes `<base>.csv` and `<base>.pgm`; any extension on `base` is replaced.
pub fn export_spectrogram(spec: &MelSpectrogram, base: impl AsRef<Path>) -> Result<SpectrogramFiles, DspError> {
    let base = base.as_ref();
    let files = SpectrogramFiles {
        csv: base.with_extension("csv"),
        pgm: base.with_extension("pgm"),
    };
    fs::write(&files.csv, spectrogram_csv(spec))?;
    fs::write(&files.pgm, pgm_bytes(spec))?;
    Ok(files)
}

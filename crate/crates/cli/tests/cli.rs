use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use aktivtalk_core::audio_io::{encode_wav, AudioClip};

fn aktv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aktv"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small corpus: 5 participants, 4 clips each, 2 s clips.
fn small_corpus(dir: &Path) -> PathBuf {
    let out = dir.join("corpus");
    let res = aktv(&[
        "synth",
        "--participants",
        "5",
        "--clips",
        "4",
        "--clip-seconds",
        "2",
        "--seed",
        "3",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    out.join("manifest.csv")
}

#[test]
fn exit_codes_follow_policy() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&aktv(&["--help"])), 0);
    assert_eq!(code(&aktv(&["bogus"])), 1);
    assert_eq!(code(&aktv(&["cv", "--folds", "many"])), 1);
    assert_eq!(
        code(&aktv(&["cv", "--labels", "pulse", "--manifest", "m.csv"])),
        1
    );
    let missing = dir.path().join("nope.csv");
    let out = aktv(&[
        "extract",
        "--manifest",
        s(&missing),
        "--out",
        s(&dir.path().join("f.csv")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
}

#[test]
fn extract_is_repeatable_and_names_bad_clips() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_corpus(dir.path());
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert_eq!(
        code(&aktv(&[
            "extract",
            "--manifest",
            s(&manifest),
            "--out",
            s(&a)
        ])),
        0
    );
    assert_eq!(
        code(&aktv(&[
            "extract",
            "--manifest",
            s(&manifest),
            "--out",
            s(&b)
        ])),
        0
    );
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("clip_id,participant_id,zone,mfcc_0,"));
    assert_eq!(lines.count(), 20);

    // break one clip
    let wav = std::fs::read_dir(manifest.parent().unwrap().join("wav"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    std::fs::write(&wav, b"not a wav").unwrap();
    let out = aktv(&["extract", "--manifest", s(&manifest), "--out", s(&a)]);
    assert_eq!(code(&out), 2);
    let stem = wav.file_stem().unwrap().to_str().unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).contains(stem));
}

#[test]
fn train_then_infer() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_corpus(dir.path());
    let model = dir.path().join("m.aktv");
    let out = aktv(&[
        "train",
        "--manifest",
        s(&manifest),
        "--task",
        "binary",
        "--epochs",
        "5",
        "--out",
        s(&model),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read(&model).unwrap().starts_with(b"AKTV1"));

    let wav = manifest
        .parent()
        .unwrap()
        .join("wav")
        .read_dir()
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    let out = aktv(&["infer", "--model", s(&model), "--wav", s(&wav)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["model_id"], "m");
    assert_eq!(v["classes"], serde_json::json!(["non_high", "high"]));
    let p: Vec<f64> = v["probabilities"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let clip_id = v["clip_id"].as_str().unwrap();
    assert_eq!(clip_id.len(), 16);
    assert!(clip_id.chars().all(|c| c.is_ascii_hexdigit()));
    assert!(["non_high", "high"].contains(&v["predicted"].as_str().unwrap()));
}

#[test]
fn spectrogram_of_silence_is_black() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("quiet.wav");
    std::fs::write(
        &wav,
        encode_wav(&AudioClip::new(vec![0.0; 16_000], 16_000).unwrap()),
    )
    .unwrap();
    let base = dir.path().join("quiet");
    let out = aktv(&["spectrogram", "--wav", s(&wav), "--out", s(&base)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let pgm = std::fs::read(dir.path().join("quiet.pgm")).unwrap();
    // 1 s at 10 ms hop with 25 ms frames: 98 frames, 40 bands
    let header = b"P5\n98 40\n255\n";
    assert!(
        pgm.starts_with(header),
        "{:?}",
        String::from_utf8_lossy(&pgm[..16])
    );
    assert_eq!(pgm.len(), header.len() + 98 * 40);
    assert!(pgm[header.len()..].iter().all(|&b| b == 0));
    assert!(dir.path().join("quiet.csv").exists());
}

#[test]
fn simulate_nominal_session() {
    let out = aktv(&["simulate", "--nominal"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.starts_with("10 records, completed\n"), "{text}");
    assert_eq!(code(&aktv(&["simulate"])), 1);
}

//! Acceptance suite. One PASS/FAIL line per criterion; exits non-zero when
//! any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use aktivtalk_core::audio_io::{encode_wav, AudioClip};
use aktivtalk_core::classifier::{gradient_check, NetConfig, Task};
use aktivtalk_core::corpus::{assign_folds, load_manifest, synth_corpus, LabelSource, SynthConfig};
use aktivtalk_core::dsp::{dct_matrix, fft_real};
use aktivtalk_core::labeling::{
    to_binary, zone_from_borg, zone_from_ynns, BinaryZone, ExertionZone, Method, YnnsAnswer,
};
use aktivtalk_core::session::{
    nominal_script, EngineError, EventKind, Phase, Session, SessionConfig, SessionEvent, TimedEvent,
};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(started: Instant, limit_s: f64) -> Result<f64, String> {
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < limit_s, || {
        format!("took {secs:.2} s, limit {limit_s} s")
    })?;
    Ok(secs)
}

fn aktv() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aktv"))
}

fn run_aktv(args: &[&str]) -> Result<String, String> {
    let out = aktv()
        .args(args)
        .output()
        .map_err(|e| format!("spawn aktv: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "aktv {} exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("temp paths are utf-8")
}

// ---- transforms ----

fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (t, &v) in x.iter().enumerate() {
                // reduce k*t mod n first so the angle stays small
                let a = -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            (re, im)
        })
        .collect()
}

fn fft_matches_dft() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for &n in &[8usize, 64, 512] {
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let got = fft_real(&x, n).map_err(|e| e.to_string())?;
            // real input: bins above n/2 mirror the lower half
            ensure(got.len() == n / 2 + 1, || {
                format!("size {n}: fft returned {} bins", got.len())
            })?;
            for (g, (re, im)) in got.iter().zip(naive_dft(&x)) {
                worst = worst.max((g.re - re).abs()).max((g.im - im).abs());
            }
        }
    }
    ensure(worst <= 1e-9, || format!("max bin error {worst:e}"))?;
    let secs = within(started, 5.0)?;
    Ok(format!(
        "max bin error {worst:.2e} over 300 signals, {secs:.2} s"
    ))
}

fn dct_round_trip() -> Check {
    let started = Instant::now();
    let n = 40;
    let m = dct_matrix(n, n);
    ensure(m.len() == n * n, || {
        format!("dct matrix has {} entries", m.len())
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        // log-mel magnitudes: log of small positive energies
        let x: Vec<f64> = (0..n)
            .map(|_| rng.random_range(1e-6f64..10.0).ln())
            .collect();
        let c: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| m[i * n + j] * x[j]).sum())
            .collect();
        // orthonormal: the inverse is the transpose
        for j in 0..n {
            let back: f64 = (0..n).map(|i| m[i * n + j] * c[i]).sum();
            worst = worst.max((back - x[j]).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("max round-trip error {worst:e}"))?;
    let secs = within(started, 1.0)?;
    Ok(format!(
        "max round-trip error {worst:.2e} over 1000 frames, {secs:.3} s"
    ))
}

fn gradients_match() -> Check {
    let started = Instant::now();
    let mut errs = Vec::new();
    for seed in 0..5u64 {
        let config = NetConfig::for_task(Task::ThreeClass, 20, seed);
        ensure(config.widths() == [20, 64, 32, 3], || {
            format!("network widths {:?}", config.widths())
        })?;
        let err = gradient_check(&config, 8);
        ensure(err < 1e-4, || {
            format!("seed {seed}: max relative error {err:e}")
        })?;
        errs.push(err);
    }
    let secs = within(started, 10.0)?;
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    Ok(format!(
        "max relative error {worst:.2e} over 5 seeds, {secs:.2} s"
    ))
}

// ---- labels and folds ----

fn label_tables() -> Check {
    use ExertionZone::*;
    let mut deviations = Vec::new();
    for r in 6..=20 {
        let want = match r {
            6..=10 => Light,
            11..=13 => Moderate,
            _ => High,
        };
        match zone_from_borg(r) {
            Ok(z) if z == want => {}
            other => deviations.push(format!("BORG {r}: {other:?}")),
        }
    }
    for r in [5, 21, 0, -1] {
        if zone_from_borg(r).is_ok() {
            deviations.push(format!("BORG {r} accepted"));
        }
    }
    for (a, want) in [
        (YnnsAnswer::Yes, Light),
        (YnnsAnswer::NotSure, Moderate),
        (YnnsAnswer::No, High),
    ] {
        if zone_from_ynns(a) != want {
            deviations.push(format!("YNNS {a:?}: {:?}", zone_from_ynns(a)));
        }
    }
    for (z, want) in [
        (Light, BinaryZone::NonHigh),
        (Moderate, BinaryZone::NonHigh),
        (High, BinaryZone::High),
    ] {
        if to_binary(z) != want {
            deviations.push(format!("binary {z:?}: {:?}", to_binary(z)));
        }
    }
    ensure(deviations.is_empty(), || deviations.join("; "))?;
    Ok("15 BORG, 3 YNNS, 3 binary entries, 0 deviations".into())
}

fn fold_integrity() -> Check {
    let corpus = synth_corpus(SynthConfig::new(20, 30, 42)).map_err(|e| e.to_string())?;
    let samples = &corpus.samples;
    let participants: BTreeSet<&str> = samples.iter().map(|s| s.participant_id.as_str()).collect();
    ensure(participants.len() == 20, || {
        format!("{} participants", participants.len())
    })?;
    for seed in 0..10u64 {
        let a =
            assign_folds(samples, 5, seed, LabelSource::SelfReport).map_err(|e| e.to_string())?;
        let b =
            assign_folds(samples, 5, seed, LabelSource::SelfReport).map_err(|e| e.to_string())?;
        ensure(a == b, || {
            format!("seed {seed}: assignment not deterministic")
        })?;
        // which folds each participant's samples landed in
        let mut seen: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
        let mut per_fold = [0usize; 5];
        for s in samples {
            let f = a
                .fold(&s.participant_id)
                .ok_or_else(|| format!("seed {seed}: {} unassigned", s.participant_id))?;
            ensure(f < 5, || format!("seed {seed}: fold index {f}"))?;
            seen.entry(s.participant_id.as_str()).or_default().insert(f);
            per_fold[f] += 1;
        }
        ensure(seen.values().all(|f| f.len() == 1), || {
            format!("seed {seed}: participant split across folds")
        })?;
        ensure(per_fold.iter().all(|&n| n > 0), || {
            format!("seed {seed}: empty fold {per_fold:?}")
        })?;
    }
    Ok("10 seeds: every participant in one fold, 5 non-empty folds, repeatable".into())
}

// ---- cross-validation through the CLI ----

struct CvRuns {
    binary: f64,
    three: f64,
    binary_report: PathBuf,
    manifest: PathBuf,
    dir: PathBuf,
}

fn mean_accuracy(report: &Path) -> Result<f64, String> {
    let text = std::fs::read_to_string(report).map_err(|e| format!("{}: {e}", report.display()))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", report.display()))?;
    v["mean_accuracy"]
        .as_f64()
        .ok_or_else(|| "report has no mean_accuracy".to_string())
}

fn cv_run(manifest: &Path, task: &str, out: &Path) -> Result<f64, String> {
    run_aktv(&[
        "cv",
        "--manifest",
        path_str(manifest),
        "--task",
        task,
        "--labels",
        "self",
        "--folds",
        "5",
        "--seed",
        "42",
        "--out",
        path_str(out),
    ])?;
    mean_accuracy(out)
}

fn cv_accuracy(dir: &Path, runs: &mut Option<CvRuns>) -> Check {
    let started = Instant::now();
    let corpus = dir.join("corpus");
    run_aktv(&[
        "synth",
        "--participants",
        "20",
        "--clips",
        "30",
        "--seed",
        "42",
        "--out",
        path_str(&corpus),
    ])?;
    let manifest = corpus.join("manifest.csv");
    let binary_report = dir.join("cv_binary.json");
    let binary = cv_run(&manifest, "binary", &binary_report)?;
    let three = cv_run(&manifest, "three", &dir.join("cv_three.json"))?;
    let secs = started.elapsed().as_secs_f64();
    *runs = Some(CvRuns {
        binary,
        three,
        binary_report,
        manifest,
        dir: dir.to_path_buf(),
    });
    ensure(binary >= 0.90, || format!("binary mean {binary:.4} < 0.90"))?;
    ensure(three >= 0.80, || {
        format!("three-class mean {three:.4} < 0.80")
    })?;
    ensure(secs < 120.0, || {
        format!("synth + cv took {secs:.1} s, limit 120 s")
    })?;
    Ok(format!(
        "binary {binary:.4}, three-class {three:.4}, {secs:.1} s end to end"
    ))
}

fn cv_ordering(runs: &Option<CvRuns>) -> Check {
    let r = runs.as_ref().ok_or("cross-validation did not run")?;
    ensure(r.binary >= r.three, || {
        format!("binary {:.4} < three-class {:.4}", r.binary, r.three)
    })?;
    Ok(format!(
        "binary {:.4} >= three-class {:.4}",
        r.binary, r.three
    ))
}

fn cv_determinism(runs: &Option<CvRuns>) -> Check {
    let r = runs.as_ref().ok_or("cross-validation did not run")?;
    let again = r.dir.join("cv_binary_again.json");
    cv_run(&r.manifest, "binary", &again)?;
    let a = std::fs::read(&r.binary_report).map_err(|e| e.to_string())?;
    let b = std::fs::read(&again).map_err(|e| e.to_string())?;
    ensure(a == b, || "repeated cv reports differ".into())?;
    Ok(format!("{} bytes identical", a.len()))
}

// ---- session protocol ----

fn simulate_json(
    dir: &Path,
    name: &str,
    config: &SessionConfig,
    script: &[TimedEvent],
) -> Result<Value, String> {
    let cfg_path = dir.join(format!("{name}_config.json"));
    let script_path = dir.join(format!("{name}_script.json"));
    std::fs::write(&cfg_path, serde_json::to_string(config).unwrap()).map_err(|e| e.to_string())?;
    std::fs::write(&script_path, serde_json::to_string(script).unwrap())
        .map_err(|e| e.to_string())?;
    let out = run_aktv(&[
        "--json",
        "simulate",
        "--session-config",
        path_str(&cfg_path),
        "--script",
        path_str(&script_path),
    ])?;
    serde_json::from_str(&out).map_err(|e| format!("simulate output: {e}"))
}

fn legal(phase: Phase, kind: EventKind, fallback_armed: bool) -> bool {
    use EventKind as K;
    use Phase as P;
    match (phase, kind) {
        (P::Completed | P::Aborted, _) => false,
        (_, K::AbortRequested) => true,
        (P::Paused, k) => k == K::ResumeRequested,
        (_, K::PauseRequested) => true,
        (P::Configured | P::WarmUp | P::Feedback, K::TimerElapsed) => true,
        (P::Reading, K::RecordingDone) => true,
        (P::AwaitingRating, K::RatingGiven | K::RatingTimeout) => !fallback_armed,
        (P::AwaitingRating, K::TouchFallback) => fallback_armed,
        (P::RetakeOffered, K::RetakeRequested | K::RetakeDeclined | K::TimerElapsed) => true,
        _ => false,
    }
}

fn random_event(rng: &mut ChaCha8Rng) -> (SessionEvent, Option<i64>) {
    let kind = EventKind::ALL[rng.random_range(0..EventKind::ALL.len())];
    let rating = rng.random_range(0..26i64);
    let ev = match kind {
        EventKind::TimerElapsed => SessionEvent::TimerElapsed,
        EventKind::RecordingDone => SessionEvent::RecordingDone {
            clip_id: format!("clip{}", rng.random_range(0..1000)),
            wav_path: None,
        },
        EventKind::RatingGiven => SessionEvent::RatingGiven { raw: rating.into() },
        EventKind::RatingTimeout => SessionEvent::RatingTimeout,
        EventKind::TouchFallback => SessionEvent::TouchFallback { raw: rating.into() },
        EventKind::RetakeRequested => SessionEvent::RetakeRequested,
        EventKind::RetakeDeclined => SessionEvent::RetakeDeclined,
        EventKind::PauseRequested => SessionEvent::PauseRequested,
        EventKind::ResumeRequested => SessionEvent::ResumeRequested,
        EventKind::AbortRequested => SessionEvent::AbortRequested,
    };
    let carries = matches!(kind, EventKind::RatingGiven | EventKind::TouchFallback);
    (ev, carries.then_some(rating))
}

fn random_sequences() -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut illegal_seen = 0;
    for case in 0..1000 {
        let config = SessionConfig {
            repetitions: rng.random_range(1..4),
            warmup_s: rng.random_range(0..2),
            ..SessionConfig::new(Method::Borg, "p01")
        };
        let mut s = Session::start(config, 0).map_err(|e| e.to_string())?;
        let mut t = 0;
        for _ in 0..rng.random_range(0..80) {
            t += rng.random_range(0..5000);
            let (ev, rating) = random_event(&mut rng);
            let before = s.clone();
            let expect_legal = legal(before.state.phase, ev.kind(), before.state.fallback_armed);
            let got = catch_unwind(AssertUnwindSafe(|| s.advance(&ev, t)))
                .map_err(|_| format!("case {case}: panic on {ev:?} in {:?}", before.state.phase))?;
            match (expect_legal, got) {
                (false, Err(EngineError::IllegalTransition { state, event })) => {
                    illegal_seen += 1;
                    ensure(state == before.state.phase && event == ev.kind(), || {
                        format!("case {case}: error names {state:?}/{event:?}")
                    })?;
                    ensure(s == before, || {
                        format!("case {case}: rejected event changed the session")
                    })?;
                }
                (true, Ok(_)) => {
                    ensure(rating.is_none_or(|r| (6..=20).contains(&r)), || {
                        format!("case {case}: accepted rating {rating:?}")
                    })?;
                }
                (true, Err(EngineError::InvalidRating(_))) => {
                    ensure(rating.is_some_and(|r| !(6..=20).contains(&r)), || {
                        format!("case {case}: rejected rating {rating:?}")
                    })?;
                    ensure(s == before, || {
                        format!("case {case}: rejected rating changed the session")
                    })?;
                }
                (legal, other) => {
                    return Err(format!(
                        "case {case}: {ev:?} in {:?} (legal: {legal}) gave {other:?}",
                        before.state.phase
                    ))
                }
            }
        }
    }
    Ok(illegal_seen)
}

fn session_protocol(dir: &Path) -> Check {
    let config = SessionConfig::new(Method::Borg, "p07");
    let nominal = nominal_script(&config, 0);
    let sim = simulate_json(dir, "nominal", &config, &nominal)?;
    let n = sim["records"].as_array().map_or(0, Vec::len);
    ensure(n == 10, || format!("nominal script gave {n} records"))?;
    ensure(sim["final_state"]["phase"] == "completed", || {
        format!("nominal final phase {}", sim["final_state"]["phase"])
    })?;

    // cycle 4: retake instead of letting the window lapse
    let mut script = nominal.clone();
    let idx = 1 + 4 * 4 + 3;
    let at = script[idx].at_ms;
    script[idx] = TimedEvent::new(at - 14_000, SessionEvent::RetakeRequested);
    let extra = [
        TimedEvent::new(
            at - 10_000,
            SessionEvent::RecordingDone {
                clip_id: "p07-c004-retake".into(),
                wav_path: None,
            },
        ),
        TimedEvent::new(at - 3_000, SessionEvent::RatingGiven { raw: 15.into() }),
        TimedEvent::new(at - 1_000, SessionEvent::TimerElapsed),
        TimedEvent::new(at, SessionEvent::RetakeDeclined),
    ];
    script.splice(idx + 1..idx + 1, extra);
    let sim = simulate_json(dir, "retake", &config, &script)?;
    let records = sim["records"].as_array().cloned().unwrap_or_default();
    let active = records.iter().filter(|r| r["superseded"] == false).count();
    let retaken = records.iter().filter(|r| r["retaken"] == true).count();
    ensure(active == 10 && records.len() == 10, || {
        format!(
            "retake script gave {active} active of {} records",
            records.len()
        )
    })?;
    ensure(retaken == 1, || {
        format!("retake script marked {retaken} records retaken")
    })?;
    ensure(sim["final_state"]["phase"] == "completed", || {
        format!("retake final phase {}", sim["final_state"]["phase"])
    })?;

    let illegal = random_sequences()?;
    Ok(format!("nominal 10 records completed; retake 10 records, 1 retaken; 1000 random sequences, {illegal} illegal pairs rejected"))
}

// ---- service ----

struct Server {
    child: Child,
    base: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn start_server(data_dir: &Path) -> Result<Server, String> {
    let mut child = aktv()
        .args(["serve", "--port", "0", "--data-dir", path_str(data_dir)])
        .env("RUST_LOG", "warn")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| format!("spawn serve: {e}"))?;
    let stdout = child.stdout.take().ok_or("no stdout")?;
    let mut line = String::new();
    BufReader::new(stdout)
        .read_line(&mut line)
        .map_err(|e| e.to_string())?;
    let base = line
        .trim()
        .strip_prefix("listening on ")
        .ok_or_else(|| format!("unexpected serve banner {line:?}"))?
        .to_string();
    Ok(Server { child, base })
}

fn fifteen_second_wav(seed: u32) -> Vec<u8> {
    let n = 15 * 16_000;
    let samples = (0..n)
        .map(|i| (i as f64 * 0.03 + f64::from(seed)).sin() * 0.25)
        .collect();
    encode_wav(&AudioClip::new(samples, 16_000).unwrap())
}

async fn call(req: reqwest::RequestBuilder) -> Result<(u16, String), String> {
    let resp = req.send().await.map_err(|e| e.to_string())?;
    let status = resp.status().as_u16();
    let text = resp.text().await.map_err(|e| e.to_string())?;
    Ok((status, text))
}

async fn expect_json(req: reqwest::RequestBuilder, want: u16) -> Result<Value, String> {
    let (status, text) = call(req).await?;
    ensure(status == want, || {
        format!("status {status}, expected {want}: {text}")
    })?;
    serde_json::from_str(&text).map_err(|e| format!("{e}: {text}"))
}

async fn post_event(
    client: &reqwest::Client,
    base: &str,
    id: &str,
    body: Value,
) -> Result<Value, String> {
    expect_json(
        client
            .post(format!("{base}/sessions/{id}/events"))
            .json(&body),
        200,
    )
    .await
}

async fn record(client: &reqwest::Client, base: &str, id: &str, cycle: u32) -> Result<(), String> {
    let clip = expect_json(
        client
            .post(format!("{base}/sessions/{id}/clips"))
            .header("x-cycle-index", cycle.to_string())
            .body(fifteen_second_wav(cycle)),
        200,
    )
    .await?;
    let clip_id = clip["clip_id"]
        .as_str()
        .ok_or("clip response without clip_id")?
        .to_string();
    let v = post_event(
        client,
        base,
        id,
        json!({"type": "recording_done", "clip_id": clip_id}),
    )
    .await?;
    ensure(v["state"] == "awaiting_rating", || {
        format!("after recording: {}", v["state"])
    })
}

async fn finish_cycle(
    client: &reqwest::Client,
    base: &str,
    id: &str,
    rating: i64,
) -> Result<(), String> {
    post_event(
        client,
        base,
        id,
        json!({"type": "rating_given", "raw": rating}),
    )
    .await?;
    post_event(client, base, id, json!({"type": "timer_elapsed"})).await?;
    post_event(client, base, id, json!({"type": "retake_declined"})).await?;
    Ok(())
}

async fn service_flow(dir: &Path) -> Result<String, String> {
    let data = dir.join("service-data");
    let client = reqwest::Client::builder()
        .timeout(Duration::from_secs(5))
        .build()
        .map_err(|e| e.to_string())?;
    let server = start_server(&data)?;
    let base = server.base.clone();
    let config =
        json!({"method": "BORG", "participant_id": "p42", "repetitions": 3, "warmup_s": 0});
    let created = expect_json(client.post(format!("{base}/sessions")).json(&config), 201).await?;
    let id = created["session_id"]
        .as_str()
        .ok_or("no session_id")?
        .to_string();

    record(&client, &base, &id, 0).await?;
    finish_cycle(&client, &base, &id, 9).await?;
    record(&client, &base, &id, 1).await?;
    let before = expect_json(client.get(format!("{base}/sessions/{id}")), 200).await?;

    // crash mid-cycle and come back on the same data directory
    drop(server);
    let server = start_server(&data)?;
    let base = server.base.clone();
    let after = expect_json(client.get(format!("{base}/sessions/{id}")), 200).await?;
    ensure(before == after, || {
        format!("state after restart differs:\n{before}\n{after}")
    })?;

    finish_cycle(&client, &base, &id, 15).await?;
    let (status, csv) = call(client.get(format!("{base}/sessions/{id}/export?format=csv"))).await?;
    ensure(status == 200, || format!("export status {status}: {csv}"))?;
    let manifest = dir.join("exported.csv");
    std::fs::write(&manifest, &csv).map_err(|e| e.to_string())?;
    let rows = load_manifest(&manifest).map_err(|e| e.to_string())?;
    ensure(rows.len() == 2, || {
        format!("exported manifest has {} rows", rows.len())
    })?;
    let zones: Vec<&str> = rows.iter().map(|r| r.zone.as_str()).collect();
    ensure(zones == ["light", "high"], || {
        format!("exported zones {zones:?}")
    })?;
    Ok(format!(
        "session {id}: 2 cycles, restart state identical, 2 manifest rows"
    ))
}

fn service_round_trip(dir: &Path) -> Check {
    let started = Instant::now();
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    let detail = rt.block_on(service_flow(dir))?;
    let secs = within(started, 10.0)?;
    Ok(format!("{detail}, {secs:.2} s"))
}

// ---- driver ----

fn report(name: &str, result: std::thread::Result<Check>) -> bool {
    match result {
        Ok(Ok(detail)) => {
            println!("PASS {name}: {detail}");
            true
        }
        Ok(Err(why)) => {
            println!("FAIL {name}: {why}");
            false
        }
        Err(_) => {
            println!("FAIL {name}: panicked");
            false
        }
    }
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temp dir");
    let dir = tmp.path();
    let mut runs = None;
    let mut ok = true;
    ok &= report("fft matches naive dft", catch_unwind(fft_matches_dft));
    ok &= report("dct round trip", catch_unwind(dct_round_trip));
    ok &= report("gradient check", catch_unwind(gradients_match));
    ok &= report("label tables exact", catch_unwind(label_tables));
    ok &= report("fold integrity", catch_unwind(fold_integrity));
    ok &= report(
        "cv accuracy on synthetic corpus",
        catch_unwind(AssertUnwindSafe(|| cv_accuracy(dir, &mut runs))),
    );
    ok &= report(
        "binary at least three-class",
        catch_unwind(AssertUnwindSafe(|| cv_ordering(&runs))),
    );
    ok &= report(
        "cv determinism",
        catch_unwind(AssertUnwindSafe(|| cv_determinism(&runs))),
    );
    ok &= report(
        "session protocol",
        catch_unwind(AssertUnwindSafe(|| session_protocol(dir))),
    );
    ok &= report(
        "service round trip",
        catch_unwind(AssertUnwindSafe(|| service_round_trip(dir))),
    );
    if ok {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance criteria failed");
        ExitCode::FAILURE
    }
}

use std::fmt::Display;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use aktivtalk_core::audio_io::read_wav;
use aktivtalk_core::classifier::{
    argmax_severe, cross_validate, fit, forward, read_model, write_model, ClassifierError,
    NetConfig,
};
use aktivtalk_core::corpus::{
    assign_folds, load_ages, load_heart_rate, load_manifest, parse_manifest, sync_all,
    synth_corpus, LabelSource, LabeledSample, SynthConfig,
};
use aktivtalk_core::dsp::{
    export_spectrogram, extract_features, mel_spectrogram, FeatureConfig, FeatureVector,
};
use aktivtalk_core::labeling::{ExertionZone, Method, YnnsAnswer};
use aktivtalk_core::session::{nominal_script, simulate, SessionConfig, TimedEvent};
use aktivtalk_service::{AppState, InferenceResult};

use crate::features_csv;
use crate::{
    Cli, Command, CorpusArgs, CvArgs, ExtractArgs, Failure, FeatureOpts, InferArgs, ServeArgs,
    SimulateArgs, SpectrogramArgs, SynthArgs, TrainArgs,
};

type Outcome = Result<(), Failure>;

fn data(e: impl Display) -> Failure {
    Failure::Data(e.to_string())
}

fn internal(e: impl Display) -> Failure {
    Failure::Internal(e.to_string())
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Outcome {
    std::fs::write(path, bytes).map_err(|e| data(format!("cannot write {}: {e}", path.display())))
}

fn print_json(value: &impl serde::Serialize) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(internal)?;
    println!("{text}");
    Ok(())
}

fn classifier_failure(e: ClassifierError) -> Failure {
    match e {
        ClassifierError::InvalidConfig(m) => Failure::Usage(m),
        ClassifierError::ShapeMismatch(m) => Failure::Internal(format!("shape mismatch: {m}")),
        other => data(other),
    }
}

pub fn run(cli: Cli) -> Outcome {
    let json = cli.json;
    match cli.command {
        Command::Extract(a) => extract(a, json),
        Command::Train(a) => train(a, json),
        Command::Cv(a) => cv(a, json),
        Command::Infer(a) => infer(a),
        Command::Synth(a) => synth(a, json),
        Command::Spectrogram(a) => spectrogram(a, json),
        Command::Simulate(a) => simulate_cmd(a, json),
        Command::Serve(a) => serve(a),
    }
}

fn feature_config(opts: &FeatureOpts) -> Result<FeatureConfig, Failure> {
    let cfg = match &opts.feature_config {
        Some(path) => {
            FeatureConfig::from_kv(&read_text(path)?).map_err(|e| Failure::Usage(e.to_string()))?
        }
        None => FeatureConfig::default(),
    };
    cfg.validate(aktivtalk_core::audio_io::CANONICAL_RATE_HZ)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

/// Decode and featurize every sample; failures are collected and reported together.
fn extract_all(
    samples: &[LabeledSample],
    cfg: &FeatureConfig,
) -> Result<Vec<FeatureVector>, Failure> {
    let results: Vec<Result<FeatureVector, String>> = samples
        .par_iter()
        .map(|s| {
            let clip = read_wav(&s.wav_path)
                .map_err(|e| format!("{} ({}): {e}", s.clip_id, s.wav_path.display()))?;
            let mut f = extract_features(&clip, cfg)
                .map_err(|e| format!("{} ({}): {e}", s.clip_id, s.wav_path.display()))?;
            f.clip_id = s.clip_id.clone();
            Ok(f)
        })
        .collect();
    let failed: Vec<String> = results
        .iter()
        .filter_map(|r| r.as_ref().err().cloned())
        .collect();
    if !failed.is_empty() {
        return Err(data(format!(
            "{} unreadable clips:\n  {}",
            failed.len(),
            failed.join("\n  ")
        )));
    }
    Ok(results.into_iter().map(|r| r.unwrap()).collect())
}

fn extract(a: ExtractArgs, json: bool) -> Outcome {
    let cfg = feature_config(&a.features)?;
    let samples = load_manifest(&a.manifest).map_err(data)?;
    let features = extract_all(&samples, &cfg)?;
    let rows: Vec<_> = samples.iter().zip(&features).collect();
    write_file(&a.out, features_csv::render(&rows))?;
    if json {
        print_json(&json!({"out": a.out, "rows": rows.len(), "dim": cfg.n_mfcc}))
    } else {
        println!(
            "wrote {} feature rows ({} dims) to {}",
            rows.len(),
            cfg.n_mfcc,
            a.out.display()
        );
        Ok(())
    }
}

/// Samples stand-in for rows read from a feature file without a manifest.
fn sample_from_feature_row(
    clip_id: &str,
    participant_id: &str,
    zone: &str,
) -> Result<LabeledSample, Failure> {
    let zone: ExertionZone = zone.parse().map_err(data)?;
    let answer = match zone {
        ExertionZone::Light => YnnsAnswer::Yes,
        ExertionZone::Moderate => YnnsAnswer::NotSure,
        ExertionZone::High => YnnsAnswer::No,
    };
    Ok(LabeledSample {
        clip_id: clip_id.to_string(),
        participant_id: participant_id.to_string(),
        wav_path: PathBuf::new(),
        method: Method::Ynns,
        raw_rating: answer.token().to_string(),
        zone,
        recorded_at_ms: 0,
        mean_pulse_bpm: None,
        pulse_zone: None,
    })
}

fn load_corpus(
    a: &CorpusArgs,
) -> Result<(Vec<LabeledSample>, Vec<FeatureVector>, FeatureConfig), Failure> {
    if a.labels == LabelSource::Pulse
        && (a.hr.is_none() || a.ages.is_none() || a.manifest.is_none())
    {
        return Err(Failure::Usage(
            "--labels pulse needs --manifest, --hr and --ages".into(),
        ));
    }
    if a.manifest.is_none() && a.features.is_none() {
        return Err(Failure::Usage(
            "one of --manifest or --features is required".into(),
        ));
    }
    let cfg = feature_config(&a.feature_opts)?;
    let table = match &a.features {
        Some(path) => Some(features_csv::parse(&read_text(path)?).map_err(data)?),
        None => None,
    };

    let mut samples = match (&a.manifest, &table) {
        (Some(m), None) => load_manifest(m).map_err(data)?,
        (Some(m), Some(_)) => {
            let base = m.parent().unwrap_or_else(|| Path::new("."));
            parse_manifest(
                std::fs::File::open(m).map_err(|e| data(format!("{}: {e}", m.display())))?,
                base,
                &m.display().to_string(),
            )
            .map_err(data)?
        }
        (None, Some(t)) => t
            .iter()
            .map(|(id, (pid, zone, _))| sample_from_feature_row(id, pid, zone))
            .collect::<Result<_, _>>()?,
        (None, None) => unreachable!("checked above"),
    };
    if a.labels == LabelSource::Pulse {
        let hr = load_heart_rate(a.hr.as_ref().unwrap()).map_err(data)?;
        let ages = load_ages(a.ages.as_ref().unwrap()).map_err(data)?;
        samples = sync_all(&samples, &hr, &ages).map_err(data)?;
    }

    let features = match &table {
        Some(t) => {
            let missing: Vec<&str> = samples
                .iter()
                .filter(|s| !t.contains_key(&s.clip_id))
                .map(|s| s.clip_id.as_str())
                .collect();
            if !missing.is_empty() {
                return Err(data(format!(
                    "feature file lacks clips: {}",
                    missing.join(", ")
                )));
            }
            let features: Vec<FeatureVector> =
                samples.iter().map(|s| t[&s.clip_id].2.clone()).collect();
            if let Some(f) = features.iter().find(|f| f.values.len() != cfg.n_mfcc) {
                return Err(data(format!(
                    "clip {} has {} features; config expects {}",
                    f.clip_id,
                    f.values.len(),
                    cfg.n_mfcc
                )));
            }
            features
        }
        None => extract_all(&samples, &cfg)?,
    };
    Ok((samples, features, cfg))
}

fn net_config(a: &CorpusArgs, input_dim: usize) -> NetConfig {
    let mut net = NetConfig::for_task(a.task, input_dim, a.seed);
    if let Some(e) = a.epochs {
        net.epochs = e;
    }
    net
}

fn cv(a: CvArgs, json: bool) -> Outcome {
    let (samples, features, cfg) = load_corpus(&a.corpus)?;
    let folds = assign_folds(&samples, a.folds, a.corpus.seed, a.corpus.labels).map_err(data)?;
    let report = cross_validate(
        &features,
        &samples,
        &folds,
        a.corpus.task,
        a.corpus.labels,
        &net_config(&a.corpus, cfg.n_mfcc),
        &cfg,
    )
    .map_err(classifier_failure)?;
    if let Some(out) = &a.out {
        write_file(out, report.to_json() + "\n")?;
    }
    if json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_table());
        if let Some(out) = &a.out {
            println!("\nreport written to {}", out.display());
        }
    }
    Ok(())
}

fn train(a: TrainArgs, json: bool) -> Outcome {
    let (samples, features, cfg) = load_corpus(&a.corpus)?;
    let labels: Vec<usize> = samples
        .iter()
        .map(|s| {
            s.label(a.corpus.labels)
                .map(|z| a.corpus.task.class_of(z))
                .ok_or_else(|| {
                    data(format!(
                        "clip {} has no {} label",
                        s.clip_id, a.corpus.labels
                    ))
                })
        })
        .collect::<Result<_, _>>()?;
    let net = net_config(&a.corpus, cfg.n_mfcc);
    let outcome = fit(&features, &labels, &net, &cfg).map_err(classifier_failure)?;
    write_model(&outcome.params, &a.out).map_err(data)?;
    let correct = features
        .iter()
        .zip(&labels)
        .filter(|(x, &y)| {
            forward(&outcome.params, &x.values)
                .map(|p| argmax_severe(&p) == y)
                .unwrap_or(false)
        })
        .count();
    let final_loss = outcome.loss_history.last().copied().unwrap_or(f64::NAN);
    let accuracy = correct as f64 / labels.len() as f64;
    if json {
        print_json(&json!({
            "out": a.out,
            "task": a.corpus.task,
            "label_source": a.corpus.labels,
            "n_samples": labels.len(),
            "class_weights": outcome.class_weights,
            "final_loss": final_loss,
            "training_accuracy": accuracy,
            "warnings": outcome.warnings,
        }))
    } else {
        for w in &outcome.warnings {
            eprintln!("warning: {w}");
        }
        println!(
            "trained {} model on {} clips: final loss {final_loss:.4}, training accuracy {accuracy:.4}\nwrote {}",
            a.corpus.task,
            labels.len(),
            a.out.display()
        );
        Ok(())
    }
}

fn infer(a: InferArgs) -> Outcome {
    let model = read_model(&a.model).map_err(|e| data(format!("{}: {e}", a.model.display())))?;
    let bytes = std::fs::read(&a.wav).map_err(|e| data(format!("{}: {e}", a.wav.display())))?;
    let clip = aktivtalk_core::audio_io::decode_wav(&bytes)
        .map_err(|e| data(format!("{}: {e}", a.wav.display())))?;
    let features = extract_features(&clip, &model.features).map_err(data)?;
    let probabilities = forward(&model, &features.values).map_err(classifier_failure)?;
    let classes: Vec<String> = model
        .task()
        .class_names()
        .iter()
        .map(|s| s.to_string())
        .collect();
    let predicted = classes[argmax_severe(&probabilities)].clone();
    let model_id = a.model_id.unwrap_or_else(|| {
        a.model
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    print_json(&InferenceResult {
        clip_id: aktivtalk_service::content_id(&bytes),
        model_id,
        classes,
        probabilities,
        predicted,
    })
}

fn synth(a: SynthArgs, json: bool) -> Outcome {
    if !(a.clip_seconds >= 1.0) {
        return Err(Failure::Usage("--clip-seconds must be at least 1".into()));
    }
    let config = SynthConfig {
        clip_seconds: a.clip_seconds,
        ..SynthConfig::new(a.participants, a.clips, a.seed)
    };
    let corpus = synth_corpus(config).map_err(|e| Failure::Usage(e.to_string()))?;
    let out = corpus.write_to_dir(&a.out).map_err(data)?;
    if json {
        print_json(&json!({
            "manifest": out.manifest,
            "heart_rate": out.heart_rate,
            "ages": out.ages,
            "wav_dir": out.wav_dir,
            "participants": a.participants,
            "clips": corpus.len(),
        }))
    } else {
        let mut counts = [0usize; 3];
        for s in &corpus.samples {
            counts[s.zone.index()] += 1;
        }
        println!(
            "wrote {} clips for {} participants (light {}, moderate {}, high {})\nmanifest: {}",
            corpus.len(),
            a.participants,
            counts[0],
            counts[1],
            counts[2],
            out.manifest.display()
        );
        Ok(())
    }
}

fn spectrogram(a: SpectrogramArgs, json: bool) -> Outcome {
    let cfg = feature_config(&a.features)?;
    let clip = read_wav(&a.wav).map_err(|e| data(format!("{}: {e}", a.wav.display())))?;
    let clip =
        aktivtalk_core::audio_io::resample(&clip, aktivtalk_core::audio_io::CANONICAL_RATE_HZ)
            .map_err(data)?;
    let spec = mel_spectrogram(&clip, &cfg).map_err(data)?;
    let base = a.out.to_string_lossy().into_owned();
    // the exporter swaps the extension; keep any dots in the base name
    let files = export_spectrogram(&spec, format!("{base}.x")).map_err(data)?;
    if json {
        print_json(
            &json!({"csv": files.csv, "pgm": files.pgm, "frames": spec.n_frames(), "mels": spec.n_mels()}),
        )
    } else {
        println!(
            "{} frames x {} mels\nwrote {} and {}",
            spec.n_frames(),
            spec.n_mels(),
            files.csv.display(),
            files.pgm.display()
        );
        Ok(())
    }
}

fn simulate_cmd(a: SimulateArgs, json: bool) -> Outcome {
    let config: SessionConfig = match &a.session_config {
        Some(path) => serde_json::from_str(&read_text(path)?)
            .map_err(|e| data(format!("{}: {e}", path.display())))?,
        None => SessionConfig::new(Method::Ynns, "p01"),
    };
    config.validate().map_err(data)?;
    let script: Vec<TimedEvent> = match (&a.script, a.nominal) {
        (Some(path), _) => serde_json::from_str(&read_text(path)?)
            .map_err(|e| data(format!("{}: {e}", path.display())))?,
        (None, true) => nominal_script(&config, a.start_ms),
        (None, false) => return Err(Failure::Usage("give --script FILE or --nominal".into())),
    };
    if let Some(path) = &a.save_script {
        write_file(
            path,
            serde_json::to_string_pretty(&script).map_err(internal)? + "\n",
        )?;
    }
    let sim = simulate(&config, a.start_ms, &script).map_err(data)?;
    if json {
        return print_json(&sim);
    }
    println!("{} records, {}", sim.records.len(), sim.final_state.phase);
    if sim.history.len() != sim.records.len() {
        println!(
            "{} superseded by retakes",
            sim.history.len() - sim.records.len()
        );
    }
    for r in &sim.records {
        println!(
            "cycle {:>2}  {:<8} {:<9} {:<16} {}{}",
            r.cycle_index,
            r.raw_rating.to_string(),
            r.zone.as_str(),
            serde_json::to_value(r.rated_via)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
            r.clip_id,
            if r.retaken { "  (retaken)" } else { "" }
        );
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Outcome {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .try_init();
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| Failure::Usage(format!("bad --host/--port: {e}")))?;
    let state =
        AppState::open(&a.data_dir).map_err(|e| data(format!("{}: {e}", a.data_dir.display())))?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(internal)?;
    rt.block_on(aktivtalk_service::serve(state, addr, |bound| {
        println!("listening on http://{bound}");
        let _ = std::io::stdout().flush();
    }))
    .map_err(|e| data(format!("cannot serve on {addr}: {e}")))
}

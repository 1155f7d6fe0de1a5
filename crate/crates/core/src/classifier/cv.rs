use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::net::predict;
use super::train::fit;
use super::{ClassifierError, NetConfig, Task};
use crate::corpus::{FoldAssignment, LabelSource, LabeledSample};
use crate::dsp::{FeatureConfig, FeatureVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub seed: u64,
    pub train_participants: Vec<String>,
    pub test_participants: Vec<String>,
    pub n_train: usize,
    pub n_test: usize,
    pub class_weights: Vec<f64>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    pub final_loss: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub task: Task,
    pub label_source: LabelSource,
    pub n_folds: usize,
    pub class_names: Vec<String>,
    pub fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    /// Population standard deviation over folds.
    pub std_accuracy: f64,
    pub folds: Vec<FoldReport>,
    pub net_config: NetConfig,
    pub feature_config: String,
}

impl CvReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "task={} labels={} folds={} seed={}",
            self.task, self.label_source, self.n_folds, self.net_config.seed
        );
        let _ = writeln!(out, "{:<6}{:>8}{:>8}{:>10}", "fold", "train", "test", "accuracy");
        for f in &self.folds {
            let _ = writeln!(out, "{:<6}{:>8}{:>8}{:>10.4}", f.fold, f.n_train, f.n_test, f.accuracy);
        }
        let _ = writeln!(out, "mean {:.4} +/- {:.4}", self.mean_accuracy, self.std_accuracy);
        let width = self.class_names.iter().map(|n| n.len()).max().unwrap_or(4).max(6) + 2;
        for f in &self.folds {
            let _ = writeln!(out, "\nfold {} confusion (rows true, cols predicted)", f.fold);
            let _ = write!(out, "{:<width$}", "");
            for name in &self.class_names {
                let _ = write!(out, "{name:>width$}");
            }
            out.push('\n');
            for (name, row) in self.class_names.iter().zip(&f.confusion) {
                let _ = write!(out, "{name:<width$}");
                for c in row {
                    let _ = write!(out, "{c:>width$}");
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Train on every participant outside fold `f` and test on fold `f`, for
/// every fold. `features[i]` belongs to `samples[i]`. Fold `f` trains with
/// seed `config.seed + f`; folds run in parallel.
pub fn cross_validate(
    features: &[FeatureVector],
    samples: &[LabeledSample],
    folds: &FoldAssignment,
    task: Task,
    source: LabelSource,
    config: &NetConfig,
    feature_config: &FeatureConfig,
) -> Result<CvReport, ClassifierError> {
    if features.len() != samples.len() {
        return Err(ClassifierError::ShapeMismatch(format!(
            "{} feature vectors for {} samples",
            features.len(),
            samples.len()
        )));
    }
    let config = NetConfig {
        n_classes: task.n_classes(),
        ..config.clone()
    };
    config.validate()?;

    let mut labels = Vec::with_capacity(samples.len());
    let mut fold_idx = Vec::with_capacity(samples.len());
    for s in samples {
        let zone = s.label(source).ok_or_else(|| ClassifierError::MissingLabel {
            clip_id: s.clip_id.clone(),
            label_source: source.to_string(),
        })?;
        labels.push(task.class_of(zone));
        let f = folds.fold(&s.participant_id).ok_or_else(|| {
            ClassifierError::InvalidConfig(format!("participant {} has no fold", s.participant_id))
        })?;
        fold_idx.push(f);
    }

    let reports: Vec<FoldReport> = (0..folds.n_folds)
        .into_par_iter()
        .map(|f| {
            run_fold(f, features, samples, &labels, &fold_idx, task, &config, feature_config)
        })
        .collect::<Result<_, _>>()?;

    let fold_accuracy: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    let n = fold_accuracy.len() as f64;
    let mean = fold_accuracy.iter().sum::<f64>() / n;
    let var = fold_accuracy.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    Ok(CvReport {
        task,
        label_source: source,
        n_folds: folds.n_folds,
        class_names: task.class_names().iter().map(|s| s.to_string()).collect(),
        fold_accuracy,
        mean_accuracy: mean,
        std_accuracy: var.sqrt(),
        folds: reports,
        net_config: config,
        feature_config: feature_config.to_kv(),
    })
}

#[allow(clippy::too_many_arguments)]
fn run_fold(
    f: usize,
    features: &[FeatureVector],
    samples: &[LabeledSample],
    labels: &[usize],
    fold_idx: &[usize],
    task: Task,
    config: &NetConfig,
    feature_config: &FeatureConfig,
) -> Result<FoldReport, ClassifierError> {
    let (test, train): (Vec<usize>, Vec<usize>) = (0..samples.len()).partition(|&i| fold_idx[i] == f);
    if test.is_empty() {
        return Err(ClassifierError::InvalidConfig(format!("fold {f} has no test samples")));
    }
    let train_p: BTreeSet<&str> = train.iter().map(|&i| samples[i].participant_id.as_str()).collect();
    let test_p: BTreeSet<&str> = test.iter().map(|&i| samples[i].participant_id.as_str()).collect();
    if let Some(p) = train_p.intersection(&test_p).next() {
        return Err(ClassifierError::ParticipantLeak(p.to_string()));
    }

    let seed = config.seed + f as u64;
    let fold_config = NetConfig { seed, ..config.clone() };
    let train_x: Vec<FeatureVector> = train.iter().map(|&i| features[i].clone()).collect();
    let train_y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let outcome = fit(&train_x, &train_y, &fold_config, feature_config)?;

    let k = task.n_classes();
    let mut confusion = vec![vec![0usize; k]; k];
    let mut correct = 0;
    for &i in &test {
        let pred = predict(&outcome.params, &features[i])?;
        confusion[labels[i]][pred] += 1;
        if pred == labels[i] {
            correct += 1;
        }
    }
    Ok(FoldReport {
        fold: f,
        seed,
        train_participants: train_p.into_iter().map(String::from).collect(),
        test_participants: test_p.into_iter().map(String::from).collect(),
        n_train: train.len(),
        n_test: test.len(),
        class_weights: outcome.class_weights,
        confusion,
        accuracy: correct as f64 / test.len() as f64,
        final_loss: outcome.loss_history.last().copied().unwrap_or(f64::NAN),
        warnings: outcome.warnings,
    })
}

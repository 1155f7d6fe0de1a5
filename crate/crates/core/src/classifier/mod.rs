//! Class-balanced feedforward classifier over pooled MFCC vectors, trained
//! with momentum SGD and evaluated under participant-grouped folds.

mod cv;
mod model_file;
mod net;
mod train;

pub use cv::{cross_validate, CvReport, FoldReport};
pub use model_file::{decode_model, encode_model, read_model, write_model, MODEL_MAGIC};
pub use net::{forward, loss_and_gradients, predict, Gradients, Layer, ModelParams};
pub use train::{fit, gradient_check, gradient_check_at, train, TrainOutcome};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::dsp::parse_kv;
use crate::labeling::{to_binary, BinaryZone, ExertionZone};

pub const MOMENTUM: f64 = 0.9;
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("class {0} has no training samples")]
    EmptyClass(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("sample {clip_id} has no {label_source} label")]
    MissingLabel { clip_id: String, label_source: String },
    #[error("participant {0} appears in both the training and test split")]
    ParticipantLeak(String),
    #[error("bad model file: {0}")]
    BadModel(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Task {
    ThreeClass,
    Binary,
}

impl Task {
    pub fn n_classes(self) -> usize {
        match self {
            Self::ThreeClass => 3,
            Self::Binary => 2,
        }
    }

    pub fn from_n_classes(n: usize) -> Option<Self> {
        match n {
            3 => Some(Self::ThreeClass),
            2 => Some(Self::Binary),
            _ => None,
        }
    }

    /// Class index of a zone; ordered by severity.
    pub fn class_of(self, zone: ExertionZone) -> usize {
        match self {
            Self::ThreeClass => zone.index(),
            Self::Binary => match to_binary(zone) {
                BinaryZone::NonHigh => 0,
                BinaryZone::High => 1,
            },
        }
    }

    pub fn class_names(self) -> &'static [&'static str] {
        match self {
            Self::ThreeClass => &["light", "moderate", "high"],
            Self::Binary => &["non_high", "high"],
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ThreeClass => "three",
            Self::Binary => "binary",
        })
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "three" | "three_class" | "3" => Ok(Self::ThreeClass),
            "binary" | "2" => Ok(Self::Binary),
            other => Err(format!("unknown task {other:?} (expected binary or three)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub n_classes: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub l2_penalty: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            input_dim: 20,
            hidden_dims: vec![64, 32],
            n_classes: 3,
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            l2_penalty: 1e-4,
        }
    }
}

impl NetConfig {
    pub fn for_task(task: Task, input_dim: usize, seed: u64) -> Self {
        Self {
            input_dim,
            n_classes: task.n_classes(),
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: String| Err(ClassifierError::InvalidConfig(m));
        if self.input_dim == 0 || self.n_classes < 2 || self.hidden_dims.contains(&0) {
            return bad(format!(
                "dims must be >= 1 and n_classes >= 2 (got {} -> {:?} -> {})",
                self.input_dim, self.hidden_dims, self.n_classes
            ));
        }
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning_rate {} must be > 0", self.learning_rate));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be >= 1".into());
        }
        if !(self.l2_penalty >= 0.0) {
            return bad("l2_penalty must be >= 0".into());
        }
        Ok(())
    }

    /// Layer widths from input to output.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim)
            .chain(self.hidden_dims.iter().copied())
            .chain(std::iter::once(self.n_classes))
            .collect()
    }

    pub fn to_kv(&self) -> String {
        let hidden: Vec<String> = self.hidden_dims.iter().map(|d| d.to_string()).collect();
        format!(
            "input_dim={}\nhidden_dims={}\nn_classes={}\nlearning_rate={}\nepochs={}\nbatch_size={}\nseed={}\nl2_penalty={}\nmomentum={}\n",
            self.input_dim,
            hidden.join(","),
            self.n_classes,
            self.learning_rate,
            self.epochs,
            self.batch_size,
            self.seed,
            self.l2_penalty,
            MOMENTUM
        )
    }

    pub fn from_kv(text: &str) -> Result<Self, ClassifierError> {
        let map = parse_kv(text);
        let get = |k: &str| {
            map.get(k)
                .ok_or_else(|| ClassifierError::BadModel(format!("missing {k}")))
        };
        let parse_err = |k: &str| ClassifierError::BadModel(format!("unparsable {k}"));
        let hidden = get("hidden_dims")?;
        let hidden_dims = if hidden.is_empty() {
            Vec::new()
        } else {
            hidden
                .split(',')
                .map(|d| d.trim().parse().map_err(|_| parse_err("hidden_dims")))
                .collect::<Result<_, _>>()?
        };
        Ok(Self {
            input_dim: get("input_dim")?.parse().map_err(|_| parse_err("input_dim"))?,
            hidden_dims,
            n_classes: get("n_classes")?.parse().map_err(|_| parse_err("n_classes"))?,
            learning_rate: get("learning_rate")?.parse().map_err(|_| parse_err("learning_rate"))?,
            epochs: get("epochs")?.parse().map_err(|_| parse_err("epochs"))?,
            batch_size: get("batch_size")?.parse().map_err(|_| parse_err("batch_size"))?,
            seed: get("seed")?.parse().map_err(|_| parse_err("seed"))?,
            l2_penalty: get("l2_penalty")?.parse().map_err(|_| parse_err("l2_penalty"))?,
        })
    }
}

/// Inverse-frequency class weights `N / (K * count_c)`.
pub fn class_weights(labels: &[usize], n_classes: usize) -> Result<Vec<f64>, ClassifierError> {
    let mut counts = vec![0usize; n_classes];
    for &y in labels {
        if y >= n_classes {
            return Err(ClassifierError::ShapeMismatch(format!("label {y} >= {n_classes} classes")));
        }
        counts[y] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(ClassifierError::EmptyClass(empty));
    }
    let n = labels.len() as f64;
    Ok(counts
        .iter()
        .map(|&c| n / (n_classes as f64 * c as f64))
        .collect())
}

/// Index of the largest probability; ties go to the higher (more severe) class.
pub fn argmax_severe(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p >= probs[best] {
            best = i;
        }
    }
    best
}

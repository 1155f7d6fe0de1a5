//! Exertion-from-speech pipeline: WAV ingestion, pooled MFCC features,
//! Talk Test label rules, corpus handling with participant-grouped folds,
//! a class-balanced MLP classifier and the guided session state machine.

pub mod audio_io;
pub mod classifier;
pub mod corpus;
pub mod dsp;
pub mod labeling;
pub mod session;

pub use audio_io::AudioClip;
pub use classifier::{CvReport, ModelParams, NetConfig, Task};
pub use corpus::{FoldAssignment, LabelSource, LabeledSample};
pub use dsp::{FeatureConfig, FeatureVector, MelSpectrogram};
pub use labeling::{BinaryZone, ExertionZone, Method, RawRating};
pub use session::{AssessmentRecord, Session, SessionConfig, SessionEvent, SessionState};

//! Impulsive sound detection from short-window high-band spectral statistics,
//! with the tooling to evaluate it: synthetic corpora, SNR-controlled
//! embedding, feature extraction and small classifiers under cross-validation.

pub mod audio;
pub mod classify;
pub mod corpus;
pub mod detector;
pub mod features;
pub mod spectral;

pub use audio::{load_wav, normalize_peak, save_wav, AudioBuffer, AudioError};
pub use classify::{cross_validate, Algorithm, Classifier, EvalReport, LabeledDataset};
pub use detector::{detect, detect_stream, DetectionEvent, DetectorConfig, StreamDetector};
pub use features::{hf_amplitude, mfcc, FeatureKind, FeatureVector, MfccConfig};

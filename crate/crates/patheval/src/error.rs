//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest {path}: {detail}")]
    Manifest { path: PathBuf, detail: String },

    #[error("manifest row {row}: {detail}")]
    ManifestRow { row: u64, detail: String },

    #[error("duplicate utterance id {id:?}")]
    DuplicateUtterance { id: String },

    #[error("{path}: {detail}")]
    Wav { path: PathBuf, detail: String },

    #[error("{path}: expected mono audio, found {channels} channels")]
    MonoRequired { path: PathBuf, channels: u16 },

    #[error("sample rate mismatch in {what}: expected {expected} Hz, found {found} Hz")]
    SampleRateMismatch {
        what: String,
        expected: u32,
        found: u32,
    },

    #[error("posteriorgram: {detail}")]
    Posteriorgram { detail: String },

    #[error("{path}: {detail}")]
    Json { path: PathBuf, detail: String },

    #[error("invalid configuration: {detail}")]
    BadConfig { detail: String },

    #[error("waveform too short: need at least {needed} samples, got {got}")]
    WaveformTooShort { needed: usize, got: usize },

    #[error("empty input: {what}")]
    EmptyInput { what: &'static str },

    #[error("expected {expected} spectrum, found {found}")]
    WrongScale {
        expected: &'static str,
        found: &'static str,
    },

    #[error("spectrum has no energy; cannot normalise")]
    SilentUtterance,

    #[error("bin count mismatch: {a} vs {b}")]
    BinCountMismatch { a: usize, b: usize },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {what}")]
    NonFiniteInput { what: &'static str },

    #[error("too few {what}: need at least {needed}, got {got}")]
    TooFewSamples {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("zero variance in {what}")]
    ZeroVariance { what: &'static str },

    #[error("degenerate input: {detail}")]
    Degenerate { detail: String },

    #[error("no speech detected")]
    NoSpeechDetected,

    #[error("invalid speech segments: {detail}")]
    InvalidSegments { detail: String },

    #[error("dysarthric speaker {speaker:?} has no paired control")]
    UnpairedSpeaker { speaker: String },

    #[error("speaker {speaker:?}: {detail}")]
    BadSpeaker { speaker: String, detail: String },

    #[error("conversion pair not found: {detail}")]
    ConversionPairNotFound { detail: String },

    #[error("fold {fold}: {detail}")]
    InsufficientTraining { fold: String, detail: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn bad_config(detail: impl Into<String>) -> Self {
        Error::BadConfig {
            detail: detail.into(),
        }
    }
}

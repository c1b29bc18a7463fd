//! Corpus ingestion: manifest parsing, WAV I/O, and energy-based voice
//! activity detection / silence trimming.
//!
//! Every analysis pipeline in this crate starts here: utterances are listed in
//! a manifest CSV, audio is loaded as mono `f64` samples in [-1, 1], and
//! leading/trailing/internal silence is removed before any spectral work.

mod manifest;
mod vad;
mod wav;

pub use manifest::{
    Band, Gender, Group, Manifest, SampleKind, SpeakerInfo, UtteranceRecord, EXCLUDED_PAIR_MARK,
    MANIFEST_COLUMNS,
};
pub use vad::{detect_voice_activity, trim_silence, SpeechSegment, VadConfig, SILENCE_FLOOR_DBFS};
pub use wav::{read_wav, write_wav_f32, write_wav_pcm16};

use serde::{Deserialize, Serialize};

/// Mono audio buffer. Samples are amplitudes in [-1, 1]; integer PCM input is
/// scaled by 1/32768 at load.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        Waveform {
            samples,
            sample_rate_hz,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

/// An utterance left out of a pipeline run, with a human-readable reason.
/// Collected instead of aborting, so one bad file does not sink a whole run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedUtterance {
    pub utterance_id: String,
    pub reason: String,
}

//! Objective evaluation toolkit for synthetic pathological speech.
//!
//! The library covers four measurement families plus the shared plumbing they
//! need:
//!
//! * [`detector`] — leave-one-speaker-out pathological-voice detection from
//!   long-time average spectra with an L1-regularised linear model ([`lasso`]).
//! * [`sklmeasure`] — symmetric Kullback-Leibler distances between normalised
//!   spectra, grouped by intelligibility band.
//! * [`ppgdtw`] — DTW alignment of phone posteriorgrams and logistic
//!   utterance verification, yielding per-speaker intelligibility estimates.
//! * [`tempo`] — PSOLA speech-rate modification and the three-rate
//!   augmentation it supports, plus pitch tracking and F0 statistics mapping.
//!
//! Supporting modules: [`corpus`] (manifests, WAV I/O, voice activity
//! detection), [`spectral`] (windows, short-time spectra, LTAS), [`stats`]
//! (correlation, Welch's t-test, word error rate), and [`syncorp`] (a seeded
//! synthetic corpus generator used by the integration tests and the `synth`
//! subcommand).
//!
//! All pipelines are deterministic: the same inputs and configuration produce
//! byte-identical reports.

pub mod corpus;
pub mod detector;
pub mod error;
pub mod lasso;
pub mod ppgdtw;
pub mod sklmeasure;
pub mod spectral;
pub mod stats;
pub mod syncorp;
pub mod tempo;

pub use error::{Error, Result};

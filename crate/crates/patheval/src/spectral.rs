//! Long-term average spectrum (LTAS).
//!
//! The LTAS of an utterance is the per-bin mean of the power spectra
//! (|FFT|²) of Hann-windowed frames taken at a fixed hop. Trailing samples
//! that do not fill a complete frame are dropped. The result can be kept as
//! linear power, converted to dB (with a floor so digital silence stays
//! finite), or normalized to sum to one for use as a distribution.

use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::corpus::Waveform;
use crate::error::{Error, Result};

/// Floor applied when converting power to dB: bins at or below zero power,
/// or quieter than this, report exactly this value.
pub const DB_FLOOR: f64 = -120.0;

/// Analysis frame geometry for an LTAS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LtasConfig {
    pub fft_size: usize,
    pub hop: usize,
}

impl LtasConfig {
    pub fn new(fft_size: usize, hop: usize) -> Result<Self> {
        let cfg = LtasConfig { fft_size, hop };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Geometry used by the voice-quality detector: 512-point FFT, 128 hop.
    pub fn detector_preset() -> Self {
        LtasConfig {
            fft_size: 512,
            hop: 128,
        }
    }

    /// Geometry used by spectral-divergence measurements: 1024-point FFT,
    /// 256 hop.
    pub fn skl_preset() -> Self {
        LtasConfig {
            fft_size: 1024,
            hop: 256,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fft_size < 2 {
            return Err(Error::bad_config(format!(
                "ltas fft_size must be at least 2, found {}",
                self.fft_size
            )));
        }
        if self.hop == 0 {
            return Err(Error::bad_config("ltas hop must be positive"));
        }
        Ok(())
    }

    /// Number of spectrum bins kept: DC through Nyquist inclusive.
    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }
}

/// Value scale an [`Ltas`] is currently expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LtasScale {
    LinearPower,
    Db,
    Normalized,
}

impl LtasScale {
    pub fn as_str(self) -> &'static str {
        match self {
            LtasScale::LinearPower => "linear_power",
            LtasScale::Db => "db",
            LtasScale::Normalized => "normalized",
        }
    }
}

/// A long-term average spectrum: one value per bin from DC to Nyquist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ltas {
    pub bins: Vec<f64>,
    pub config: LtasConfig,
    pub scale: LtasScale,
    pub sample_rate_hz: u32,
}

impl Ltas {
    /// Center frequency of bin `k` in Hz.
    pub fn bin_frequency_hz(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate_hz as f64 / self.config.fft_size as f64
    }

    /// Convert linear power to dB (`10·log10`), flooring at [`DB_FLOOR`].
    /// Only meaningful on linear power, so other scales are rejected.
    pub fn to_db(self) -> Result<Ltas> {
        if self.scale != LtasScale::LinearPower {
            return Err(Error::WrongScale {
                expected: LtasScale::LinearPower.as_str(),
                found: self.scale.as_str(),
            });
        }
        let bins = self
            .bins
            .into_iter()
            .map(|p| {
                if p > 0.0 {
                    (10.0 * p.log10()).max(DB_FLOOR)
                } else {
                    DB_FLOOR
                }
            })
            .collect();
        Ok(Ltas {
            bins,
            scale: LtasScale::Db,
            ..self
        })
    }

    /// Scale bins to sum to one, turning the spectrum into a distribution.
    /// Idempotent: already-normalized input passes through unchanged. dB
    /// input is rejected (its values are not non-negative masses).
    pub fn normalized(self) -> Result<Ltas> {
        match self.scale {
            LtasScale::Normalized => Ok(self),
            LtasScale::Db => Err(Error::WrongScale {
                expected: LtasScale::LinearPower.as_str(),
                found: self.scale.as_str(),
            }),
            LtasScale::LinearPower => {
                let total: f64 = self.bins.iter().sum();
                if !(total > 0.0) {
                    return Err(Error::SilentUtterance);
                }
                let bins = self.bins.into_iter().map(|p| p / total).collect();
                Ok(Ltas {
                    bins,
                    scale: LtasScale::Normalized,
                    ..self
                })
            }
        }
    }
}

/// Periodic Hann window: `w[k] = 0.5·(1 − cos(2πk/n))`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()))
        .collect()
}

/// Power spectra (|FFT|², bins 0..=fft_size/2) of every complete
/// Hann-windowed frame. Trailing samples short of a full frame are dropped.
pub fn stft_power_frames(waveform: &Waveform, config: &LtasConfig) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let n = waveform.samples.len();
    let fft_size = config.fft_size;
    if n < fft_size {
        return Err(Error::WaveformTooShort {
            needed: fft_size,
            got: n,
        });
    }
    if waveform.samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput { what: "waveform" });
    }

    let window = hann_window(fft_size);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_size);
    let n_bins = config.n_bins();

    let mut frames = Vec::new();
    let mut buf = vec![Complex::new(0.0, 0.0); fft_size];
    let mut start = 0;
    while start + fft_size <= n {
        for (k, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(waveform.samples[start + k] * window[k], 0.0);
        }
        fft.process(&mut buf);
        frames.push(buf[..n_bins].iter().map(|c| c.norm_sqr()).collect());
        start += config.hop;
    }
    Ok(frames)
}

/// Compute the LTAS of a waveform: mean per-bin power over all complete
/// frames, on the linear power scale.
pub fn compute_ltas(waveform: &Waveform, config: &LtasConfig) -> Result<Ltas> {
    let frames = stft_power_frames(waveform, config)?;
    let n_frames = frames.len() as f64;
    let n_bins = config.n_bins();
    let mut bins = vec![0.0f64; n_bins];
    for frame in &frames {
        for (acc, &p) in bins.iter_mut().zip(frame) {
            *acc += p;
        }
    }
    for b in &mut bins {
        *b /= n_frames;
    }
    Ok(Ltas {
        bins,
        config: *config,
        scale: LtasScale::LinearPower,
        sample_rate_hz: waveform.sample_rate_hz,
    })
}

/// Write an LTAS as CSV with header `bin_index,frequency_hz,value,scale`.
pub fn write_ltas_csv(path: &Path, ltas: &Ltas) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })?;
    writer
        .write_record(["bin_index", "frequency_hz", "value", "scale"])
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        })?;
    for (k, &v) in ltas.bins.iter().enumerate() {
        writer
            .write_record([
                k.to_string(),
                format!("{}", ltas.bin_frequency_hz(k)),
                format!("{v}"),
                ltas.scale.as_str().to_string(),
            ])
            .map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: std::io::Error::other(e.to_string()),
            })?;
    }
    writer.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })?;
    Ok(())
}

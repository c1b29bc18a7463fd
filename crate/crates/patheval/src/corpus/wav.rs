//! WAV reading and writing.
//!
//! Analysis code works on mono `f64` in [-1, 1]. Two on-disk encodings are
//! accepted: 16-bit integer PCM (scaled by 1/32768 at load) and 32-bit float.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::Waveform;
use crate::error::{Error, Result};

const PCM16_SCALE: f64 = 1.0 / 32768.0;

/// Load a mono WAV file. Multi-channel files are rejected rather than
/// silently downmixed, since channel balance is not this crate's call to make.
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let reader = WavReader::open(path).map_err(|e| Error::Wav {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::MonoRequired {
            path: path.to_path_buf(),
            channels: spec.channels,
        });
    }

    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 * PCM16_SCALE))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Wav {
                path: path.to_path_buf(),
                detail: format!("truncated or corrupt sample data: {e}"),
            })?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Wav {
                path: path.to_path_buf(),
                detail: format!("truncated or corrupt sample data: {e}"),
            })?,
        (format, bits) => {
            return Err(Error::Wav {
                path: path.to_path_buf(),
                detail: format!(
                    "unsupported encoding {format:?}/{bits}-bit \
                     (expected 16-bit PCM or 32-bit float)"
                ),
            })
        }
    };

    Ok(Waveform::new(samples, spec.sample_rate))
}

/// Write 16-bit integer PCM. Samples are clamped to [-1, 1] and scaled by
/// 32768 (the inverse of the load scale), so in-range values round-trip to
/// within half a quantization step — except within half a step of +1.0,
/// where the missing +32768 code saturates to 32767 and costs up to one
/// full step.
pub fn write_wav_pcm16(path: &Path, waveform: &Waveform) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: waveform.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| Error::Wav {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    for &x in &waveform.samples {
        let v = (x.clamp(-1.0, 1.0) / PCM16_SCALE).round();
        let v = v.clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        writer.write_sample(v).map_err(|e| Error::Wav {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
    }
    writer.finalize().map_err(|e| Error::Wav {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    Ok(())
}

/// Write 32-bit float WAV (no clamping; exact within f32 precision).
pub fn write_wav_f32(path: &Path, waveform: &Waveform) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: waveform.sample_rate_hz,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| Error::Wav {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    for &x in &waveform.samples {
        writer.write_sample(x as f32).map_err(|e| Error::Wav {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
    }
    writer.finalize().map_err(|e| Error::Wav {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    Ok(())
}

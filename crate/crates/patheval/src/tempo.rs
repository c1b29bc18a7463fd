//! Speech-rate modification with pitch-synchronous overlap-add.
//!
//! Changing playback speed by resampling shifts pitch; this module instead
//! tracks the pitch, places one analysis mark per glottal cycle, and
//! re-spaces whole cycles along the stretched timeline. Duration scales by
//! the requested factor while the pitch contour stays put, which is what a
//! pathological-speech corpus needs when slow speaking rate is part of the
//! condition being modelled.

use serde::{Deserialize, Serialize};

use crate::corpus::Waveform;
use crate::error::{Error, Result};

/// Supported time-stretch factor range (duration multipliers).
pub const MIN_STRETCH_FACTOR: f64 = 0.25;
pub const MAX_STRETCH_FACTOR: f64 = 4.0;

/// Pitch tracker settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PitchConfig {
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    pub frame_ms: f64,
    pub hop_ms: f64,
    /// Normalized-autocorrelation peak height above which a frame counts as
    /// voiced.
    pub voicing_threshold: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        PitchConfig {
            f0_min_hz: 75.0,
            f0_max_hz: 500.0,
            frame_ms: 40.0,
            hop_ms: 10.0,
            voicing_threshold: 0.45,
        }
    }
}

impl PitchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.f0_min_hz > 0.0 && self.f0_max_hz.is_finite() && self.f0_min_hz < self.f0_max_hz)
        {
            return Err(Error::bad_config(format!(
                "pitch range must satisfy 0 < f0_min < f0_max, found [{}, {}]",
                self.f0_min_hz, self.f0_max_hz
            )));
        }
        if !(self.frame_ms > 0.0 && self.hop_ms > 0.0) {
            return Err(Error::bad_config(
                "pitch frame and hop must be positive",
            ));
        }
        if self.hop_ms > self.frame_ms {
            return Err(Error::bad_config(format!(
                "pitch hop ({} ms) must not exceed the frame ({} ms)",
                self.hop_ms, self.frame_ms
            )));
        }
        if !(self.voicing_threshold > 0.0 && self.voicing_threshold < 1.0) {
            return Err(Error::bad_config(format!(
                "voicing threshold must lie in (0, 1), found {}",
                self.voicing_threshold
            )));
        }
        Ok(())
    }

    fn frame_samples(&self, rate: u32) -> usize {
        ((self.frame_ms / 1000.0 * rate as f64).round() as usize).max(1)
    }

    fn hop_samples(&self, rate: u32) -> usize {
        ((self.hop_ms / 1000.0 * rate as f64).round() as usize).max(1)
    }
}

/// Frame-wise pitch estimates; `f0_hz` is 0 for unvoiced frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchTrack {
    /// Frame-center times, seconds.
    pub times_s: Vec<f64>,
    pub f0_hz: Vec<f64>,
    pub sample_rate_hz: u32,
}

/// Mean and spread of the voiced part of a pitch contour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0Stats {
    pub mean_hz: f64,
    pub std_hz: f64,
}

impl PitchTrack {
    pub fn voiced_f0(&self) -> Vec<f64> {
        self.f0_hz.iter().copied().filter(|&f| f > 0.0).collect()
    }

    /// Mean and population standard deviation over voiced frames.
    pub fn stats(&self) -> Result<F0Stats> {
        let voiced = self.voiced_f0();
        if voiced.is_empty() {
            return Err(Error::Degenerate {
                detail: "pitch track has no voiced frames".to_string(),
            });
        }
        let mean = crate::stats::mean(&voiced);
        let var = crate::stats::population_variance(&voiced);
        Ok(F0Stats {
            mean_hz: mean,
            std_hz: var.sqrt(),
        })
    }

    /// Nearest frame's f0 at a sample position (0 when unvoiced).
    fn f0_at_sample(&self, pos: usize, cfg: &PitchConfig) -> f64 {
        if self.f0_hz.is_empty() {
            return 0.0;
        }
        let hop = cfg.hop_samples(self.sample_rate_hz) as f64;
        let half_frame = cfg.frame_samples(self.sample_rate_hz) as f64 / 2.0;
        let idx = ((pos as f64 - half_frame) / hop).round();
        let idx = idx.clamp(0.0, (self.f0_hz.len() - 1) as f64) as usize;
        self.f0_hz[idx]
    }
}

/// Track pitch with the normalized-autocorrelation method: per frame, mean
/// subtraction, then the lag in `[rate/f0_max, rate/f0_min]` maximizing the
/// length-compensated autocorrelation, refined by parabolic interpolation.
/// Frames whose peak falls below the voicing threshold report f0 = 0.
pub fn estimate_pitch(w: &Waveform, cfg: &PitchConfig) -> Result<PitchTrack> {
    cfg.validate()?;
    let rate = w.sample_rate_hz;
    let n = w.samples.len();
    let frame = cfg.frame_samples(rate);
    let hop = cfg.hop_samples(rate);
    if n < frame {
        return Err(Error::WaveformTooShort {
            needed: frame,
            got: n,
        });
    }
    if w.samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput { what: "waveform" });
    }

    let lag_min = ((rate as f64 / cfg.f0_max_hz).floor() as usize).max(1);
    let lag_max = ((rate as f64 / cfg.f0_min_hz).ceil() as usize).min(frame - 1);
    if lag_min >= lag_max {
        return Err(Error::bad_config(format!(
            "pitch range [{}, {}] Hz needs lags {}..{} which do not fit a {frame}-sample frame",
            cfg.f0_min_hz, cfg.f0_max_hz, lag_min, lag_max
        )));
    }

    let mut times_s = Vec::new();
    let mut f0_hz = Vec::new();
    let mut start = 0usize;
    while start + frame <= n {
        let samples = &w.samples[start..start + frame];
        let mean: f64 = samples.iter().sum::<f64>() / frame as f64;
        let x: Vec<f64> = samples.iter().map(|v| v - mean).collect();
        let r0: f64 = x.iter().map(|v| v * v).sum();

        times_s.push((start as f64 + frame as f64 / 2.0) / rate as f64);

        // Effectively silent frames are unvoiced by definition.
        if r0 / frame as f64 <= 1e-12 {
            f0_hz.push(0.0);
            start += hop;
            continue;
        }

        // Length-compensated normalized autocorrelation over the lag range.
        let rn = |tau: usize| -> f64 {
            let dot: f64 = (0..frame - tau).map(|k| x[k] * x[k + tau]).sum();
            (dot / r0) * (frame as f64 / (frame - tau) as f64)
        };
        let values: Vec<f64> = (lag_min..=lag_max).map(rn).collect();
        let (global_off, &best_val) = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty lag range");

        if best_val < cfg.voicing_threshold {
            f0_hz.push(0.0);
            start += hop;
            continue;
        }

        // A perfectly periodic frame peaks equally at every multiple of its
        // period, so the global maximum alone is prone to octave-down errors.
        // Among local maxima within a small margin of the global peak, the
        // smallest lag is the true period: none of its submultiples can reach
        // the peak value unless they are themselves a period of the signal.
        const PEAK_MARGIN: f64 = 0.02;
        let best_off = values
            .iter()
            .enumerate()
            .find(|&(i, &v)| {
                let left_ok = i == 0 || values[i - 1] <= v;
                let right_ok = i + 1 == values.len() || values[i + 1] <= v;
                left_ok && right_ok && v >= best_val - PEAK_MARGIN
            })
            .map_or(global_off, |(i, _)| i);

        // Parabolic refinement of the peak lag.
        let tau = (lag_min + best_off) as f64;
        let refined = if best_off > 0 && best_off + 1 < values.len() {
            let (a, b, c) = (
                values[best_off - 1],
                values[best_off],
                values[best_off + 1],
            );
            let denom = a - 2.0 * b + c;
            if denom.abs() > 1e-12 {
                tau + (0.5 * (a - c) / denom).clamp(-1.0, 1.0)
            } else {
                tau
            }
        } else {
            tau
        };
        f0_hz.push(rate as f64 / refined);
        start += hop;
    }

    Ok(PitchTrack {
        times_s,
        f0_hz,
        sample_rate_hz: rate,
    })
}

/// Place one pitch mark per glottal cycle: in voiced regions the next mark
/// is the waveform maximum one local period (±20%) after the current mark;
/// in unvoiced regions marks advance uniformly by 10 ms without searching.
pub fn place_pitch_marks(w: &Waveform, track: &PitchTrack, cfg: &PitchConfig) -> Vec<usize> {
    let n = w.samples.len();
    if n == 0 {
        return Vec::new();
    }
    let rate = w.sample_rate_hz as f64;
    let unvoiced_step = ((rate / 100.0).round() as usize).max(1); // 10 ms

    let argmax = |lo: usize, hi: usize| -> usize {
        (lo..hi.min(n))
            .max_by(|&a, &b| w.samples[a].total_cmp(&w.samples[b]))
            .unwrap_or(lo)
    };

    // First mark: the maximum inside the first local period when voiced,
    // otherwise sample 0.
    let f0_start = track.f0_at_sample(0, cfg);
    let mut marks = Vec::new();
    let first = if f0_start > 0.0 {
        let period = (rate / f0_start).round() as usize;
        argmax(0, period.max(1))
    } else {
        0
    };
    marks.push(first);

    loop {
        let cur = *marks.last().expect("at least the first mark");
        let f0 = track.f0_at_sample(cur, cfg);
        let next = if f0 > 0.0 {
            let period = rate / f0;
            let lo = cur + (0.8 * period).floor().max(1.0) as usize;
            let hi = cur + (1.2 * period).ceil() as usize;
            if lo >= n {
                break;
            }
            argmax(lo, hi)
        } else {
            let next = cur + unvoiced_step;
            if next >= n {
                break;
            }
            next
        };
        // Guard against stalls on pathological waveforms.
        if next <= cur {
            break;
        }
        marks.push(next);
    }
    marks
}

fn hann_symmetric(len: usize) -> Vec<f64> {
    if len <= 1 {
        return vec![1.0; len];
    }
    (0..len)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (len - 1) as f64).cos()))
        .collect()
}

fn validate_factor(factor: f64) -> Result<()> {
    if !factor.is_finite() || !(MIN_STRETCH_FACTOR..=MAX_STRETCH_FACTOR).contains(&factor) {
        return Err(Error::bad_config(format!(
            "stretch factor {factor} outside supported range [{MIN_STRETCH_FACTOR}, {MAX_STRETCH_FACTOR}]"
        )));
    }
    Ok(())
}

/// Stretch a waveform's duration by `factor` (0.25–4×) while preserving its
/// pitch contour. Output length is exactly `round(len · factor)`.
pub fn psola_stretch(w: &Waveform, factor: f64, cfg: &PitchConfig) -> Result<Waveform> {
    validate_factor(factor)?;
    let track = estimate_pitch(w, cfg)?;
    let marks = place_pitch_marks(w, &track, cfg);
    let n_in = w.samples.len();
    let n_out = (n_in as f64 * factor).round() as usize;
    if marks.is_empty() || n_out == 0 {
        return Ok(Waveform::new(vec![0.0; n_out], w.sample_rate_hz));
    }

    // Local analysis period at each mark: gap to the next mark (the last
    // mark inherits its predecessor's period).
    let periods: Vec<usize> = (0..marks.len())
        .map(|k| {
            if k + 1 < marks.len() {
                marks[k + 1] - marks[k]
            } else if k > 0 {
                marks[k] - marks[k - 1]
            } else {
                n_in
            }
        })
        .map(|p| p.max(1))
        .collect();

    let nearest_mark = |u: usize| -> usize {
        let i = marks.partition_point(|&m| m < u);
        if i == 0 {
            0
        } else if i == marks.len() {
            marks.len() - 1
        } else if u - marks[i - 1] <= marks[i] - u {
            i - 1
        } else {
            i
        }
    };

    let mut out = vec![0.0f64; n_out];
    let mut norm = vec![0.0f64; n_out];
    let mut t = 0usize;
    while t < n_out {
        // Inverse map of the stretch: which input sample does this output
        // instant correspond to?
        let u = ((t as f64 / factor).round() as usize).min(n_in - 1);
        let k = nearest_mark(u);
        let p = periods[k];
        // One two-period Hann-windowed cycle, overlap-added at the output
        // mark. Synthesis marks advance by the analysis period, so the local
        // pitch is reproduced rather than scaled.
        let window = hann_symmetric(2 * p + 1);
        let center = marks[k] as i64;
        for (wi, &wv) in window.iter().enumerate() {
            let off = wi as i64 - p as i64;
            let src = center + off;
            let dst = t as i64 + off;
            if src >= 0 && (src as usize) < n_in && dst >= 0 && (dst as usize) < n_out {
                out[dst as usize] += w.samples[src as usize] * wv;
                norm[dst as usize] += wv;
            }
        }
        t += p;
    }

    for (v, &nv) in out.iter_mut().zip(&norm) {
        *v /= nv.max(1e-8);
    }
    Ok(Waveform::new(out, w.sample_rate_hz))
}

/// The rate-augmentation set for one utterance: the original, a half-way
/// stretch, and the full target stretch, tagged with their factors. The
/// unit factor is a verbatim copy, not a resynthesis.
pub fn augmentation_triple(
    w: &Waveform,
    target_factor: f64,
    cfg: &PitchConfig,
) -> Result<Vec<(f64, Waveform)>> {
    validate_factor(target_factor)?;
    let halfway = (1.0 + target_factor) / 2.0;
    let mut out = Vec::with_capacity(3);
    for factor in [1.0, halfway, target_factor] {
        let rendered = if factor == 1.0 {
            w.clone()
        } else {
            psola_stretch(w, factor, cfg)?
        };
        out.push((factor, rendered));
    }
    Ok(out)
}

/// Map a pitch contour onto a target speaker's f0 distribution:
/// `f0' = (f0 − src.mean)·(tgt.std/src.std) + tgt.mean` on voiced frames,
/// clamped to the representable range `[1, rate/2)`.
pub fn f0_transform(track: &PitchTrack, src: &F0Stats, tgt: &F0Stats) -> Result<PitchTrack> {
    if !(src.std_hz > 0.0) {
        return Err(Error::ZeroVariance {
            what: "source f0 distribution",
        });
    }
    for (label, stats) in [("source", src), ("target", tgt)] {
        if !(stats.mean_hz.is_finite() && stats.std_hz.is_finite() && stats.std_hz >= 0.0) {
            return Err(Error::bad_config(format!(
                "{label} f0 statistics must be finite with non-negative spread"
            )));
        }
    }
    let nyquist = track.sample_rate_hz as f64 / 2.0;
    let scale = tgt.std_hz / src.std_hz;
    let f0_hz = track
        .f0_hz
        .iter()
        .map(|&f| {
            if f > 0.0 {
                ((f - src.mean_hz) * scale + tgt.mean_hz).clamp(1.0, nyquist.next_down())
            } else {
                0.0
            }
        })
        .collect();
    Ok(PitchTrack {
        times_s: track.times_s.clone(),
        f0_hz,
        sample_rate_hz: track.sample_rate_hz,
    })
}

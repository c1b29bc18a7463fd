//! Energy-based voice activity detection.
//!
//! Frames the signal, measures per-frame RMS in dB, and marks frames within
//! `threshold_db` of the loudest frame as speech (subject to an absolute
//! floor, so an all-quiet recording yields no speech at all). Active frame
//! runs become segments whose boundaries sit at frame centers — the center of
//! an edge frame is a far better estimate of where energy actually starts
//! than the frame's left edge, because partially overlapping frames already
//! trigger. Runs touching the first or last frame extend to the signal
//! edges. Nearby segments separated by no more than `hangover_ms` merge, and
//! anything still shorter than `min_speech_ms` is discarded as a click.

use serde::{Deserialize, Serialize};

use super::Waveform;
use crate::error::{Error, Result};

/// Absolute energy floor in dBFS. Frames quieter than this are never speech,
/// no matter how quiet the rest of the recording is; this keeps digital
/// silence with a faint hiss from being promoted to "speech".
pub const SILENCE_FLOOR_DBFS: f64 = -80.0;

/// Voice activity detector settings. Defaults: 25 ms frames, 10 ms hop,
/// 30 dB dynamic threshold below the peak frame, 100 ms minimum segment,
/// 50 ms hangover for bridging short intra-utterance gaps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VadConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    /// Frames more than this many dB below the loudest frame are silence.
    pub threshold_db: f64,
    pub min_speech_ms: f64,
    pub hangover_ms: f64,
}

impl Default for VadConfig {
    fn default() -> Self {
        VadConfig {
            frame_ms: 25.0,
            hop_ms: 10.0,
            threshold_db: 30.0,
            min_speech_ms: 100.0,
            hangover_ms: 50.0,
        }
    }
}

impl VadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_ms.is_finite() && self.frame_ms > 0.0) {
            return Err(Error::bad_config(format!(
                "vad frame_ms must be positive, found {}",
                self.frame_ms
            )));
        }
        if !(self.hop_ms.is_finite() && self.hop_ms > 0.0) {
            return Err(Error::bad_config(format!(
                "vad hop_ms must be positive, found {}",
                self.hop_ms
            )));
        }
        if self.hop_ms > self.frame_ms {
            return Err(Error::bad_config(format!(
                "vad hop_ms ({}) must not exceed frame_ms ({}); larger hops leave \
                 unanalyzed gaps",
                self.hop_ms, self.frame_ms
            )));
        }
        if !(self.threshold_db.is_finite() && self.threshold_db > 0.0) {
            return Err(Error::bad_config(format!(
                "vad threshold_db must be positive, found {}",
                self.threshold_db
            )));
        }
        if !(self.min_speech_ms.is_finite() && self.min_speech_ms >= 0.0) {
            return Err(Error::bad_config(format!(
                "vad min_speech_ms must be non-negative, found {}",
                self.min_speech_ms
            )));
        }
        if !(self.hangover_ms.is_finite() && self.hangover_ms >= 0.0) {
            return Err(Error::bad_config(format!(
                "vad hangover_ms must be non-negative, found {}",
                self.hangover_ms
            )));
        }
        Ok(())
    }

    fn frame_samples(&self, rate: u32) -> usize {
        ((self.frame_ms * rate as f64 / 1000.0).round() as usize).max(1)
    }

    fn hop_samples(&self, rate: u32) -> usize {
        ((self.hop_ms * rate as f64 / 1000.0).round() as usize).max(1)
    }

    fn min_speech_samples(&self, rate: u32) -> usize {
        (self.min_speech_ms * rate as f64 / 1000.0).round() as usize
    }

    fn hangover_samples(&self, rate: u32) -> usize {
        (self.hangover_ms * rate as f64 / 1000.0).round() as usize
    }
}

/// Half-open sample range `[start, end)` judged to contain speech.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeechSegment {
    pub start: usize,
    pub end: usize,
}

impl SpeechSegment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

fn frame_rms_db(samples: &[f64]) -> f64 {
    let energy: f64 = samples.iter().map(|x| x * x).sum();
    let rms = (energy / samples.len() as f64).sqrt();
    if rms > 0.0 {
        20.0 * rms.log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// Find speech segments. Returns an empty list (not an error) when nothing
/// rises above the silence floor. Segments come back sorted, non-overlapping,
/// and each at least `min_speech_ms` long.
pub fn detect_voice_activity(waveform: &Waveform, config: &VadConfig) -> Result<Vec<SpeechSegment>> {
    config.validate()?;
    let n = waveform.samples.len();
    if n == 0 {
        return Ok(Vec::new());
    }

    let rate = waveform.sample_rate_hz;
    let frame = config.frame_samples(rate);
    let hop = config.hop_samples(rate);

    // Frame the signal; a recording shorter than one frame is analyzed as a
    // single frame so short clips are not silently unjudgeable.
    let mut frame_db = Vec::new();
    if n < frame {
        frame_db.push(frame_rms_db(&waveform.samples));
    } else {
        let mut start = 0;
        while start + frame <= n {
            frame_db.push(frame_rms_db(&waveform.samples[start..start + frame]));
            start += hop;
        }
    }
    let n_frames = frame_db.len();

    let peak_db = frame_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let threshold = (peak_db - config.threshold_db).max(SILENCE_FLOOR_DBFS);
    if peak_db < SILENCE_FLOOR_DBFS {
        return Ok(Vec::new());
    }
    let active: Vec<bool> = frame_db.iter().map(|&db| db >= threshold).collect();

    // Active runs -> segments with frame-center boundaries, extended to the
    // signal edges when a run touches the first or last frame.
    let center = |i: usize| (i * hop + frame / 2).min(n);
    let mut segments: Vec<SpeechSegment> = Vec::new();
    let mut run_start: Option<usize> = None;
    for i in 0..=n_frames {
        let is_active = i < n_frames && active[i];
        match (run_start, is_active) {
            (None, true) => run_start = Some(i),
            (Some(f0), false) => {
                let f1 = i - 1;
                let start = if f0 == 0 { 0 } else { center(f0) };
                let end = if f1 == n_frames - 1 { n } else { center(f1) };
                if end > start {
                    segments.push(SpeechSegment { start, end });
                }
                run_start = None;
            }
            _ => {}
        }
    }

    // Hangover: bridge gaps of at most hangover_ms between segments.
    let hangover = config.hangover_samples(rate);
    let mut merged: Vec<SpeechSegment> = Vec::new();
    for seg in segments {
        match merged.last_mut() {
            Some(prev) if seg.start <= prev.end + hangover => {
                prev.end = prev.end.max(seg.end);
            }
            _ => merged.push(seg),
        }
    }

    let min_len = config.min_speech_samples(rate);
    merged.retain(|s| s.len() >= min_len && !s.is_empty());
    Ok(merged)
}

/// Concatenate the given segments of a waveform, validating that they are
/// in order, in bounds, and non-overlapping.
pub fn extract_segments(waveform: &Waveform, segments: &[SpeechSegment]) -> Result<Waveform> {
    let n = waveform.samples.len();
    let mut cursor = 0usize;
    let mut samples = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        if seg.start >= seg.end {
            return Err(Error::InvalidSegments {
                detail: format!("segment {i} is empty or reversed ({}..{})", seg.start, seg.end),
            });
        }
        if seg.start < cursor {
            return Err(Error::InvalidSegments {
                detail: format!(
                    "segment {i} starts at {} before previous segment ended at {cursor}",
                    seg.start
                ),
            });
        }
        if seg.end > n {
            return Err(Error::InvalidSegments {
                detail: format!("segment {i} ends at {} past signal length {n}", seg.end),
            });
        }
        samples.extend_from_slice(&waveform.samples[seg.start..seg.end]);
        cursor = seg.end;
    }
    Ok(Waveform::new(samples, waveform.sample_rate_hz))
}

/// Remove leading, trailing, and internal silence: detect speech segments and
/// concatenate them. Errors with [`Error::NoSpeechDetected`] when the
/// detector finds nothing.
pub fn trim_silence(waveform: &Waveform, config: &VadConfig) -> Result<Waveform> {
    let segments = detect_voice_activity(waveform, config)?;
    if segments.is_empty() {
        return Err(Error::NoSpeechDetected);
    }
    extract_segments(waveform, &segments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const RATE: u32 = 16000;

    fn at_ms(ms: f64) -> usize {
        (ms * RATE as f64 / 1000.0).round() as usize
    }

    /// Silence with 0.5-amplitude sine bursts over the given ms ranges.
    fn bursts(total_ms: f64, ranges: &[(f64, f64)]) -> Waveform {
        let n = at_ms(total_ms);
        let mut samples = vec![0.0f64; n];
        for &(a, b) in ranges {
            for i in at_ms(a)..at_ms(b).min(n) {
                let t = i as f64 / RATE as f64;
                samples[i] = 0.5 * (2.0 * std::f64::consts::PI * 220.0 * t).sin();
            }
        }
        Waveform::new(samples, RATE)
    }

    #[test]
    fn digital_silence_yields_no_segments() {
        let w = Waveform::new(vec![0.0; RATE as usize], RATE);
        assert!(detect_voice_activity(&w, &VadConfig::default()).unwrap().is_empty());
        assert!(matches!(
            trim_silence(&w, &VadConfig::default()).unwrap_err(),
            Error::NoSpeechDetected
        ));
    }

    #[test]
    fn faint_hiss_below_floor_is_silence() {
        // -86 dBFS noise: audible to the dynamic threshold (it IS the peak)
        // but below the absolute floor.
        let samples: Vec<f64> = (0..RATE as usize)
            .map(|i| 5e-5 * if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let w = Waveform::new(samples, RATE);
        assert!(detect_voice_activity(&w, &VadConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn tone_bounds_recovered_within_one_hop() {
        // 300 ms tone inside 1 s of silence.
        let w = bursts(1000.0, &[(200.0, 500.0)]);
        let segs = detect_voice_activity(&w, &VadConfig::default()).unwrap();
        assert_eq!(segs.len(), 1, "{segs:?}");
        let hop = at_ms(10.0);
        assert!(
            (segs[0].start as i64 - at_ms(200.0) as i64).unsigned_abs() as usize <= hop,
            "start {} vs true {}",
            segs[0].start,
            at_ms(200.0)
        );
        assert!(
            (segs[0].end as i64 - at_ms(500.0) as i64).unsigned_abs() as usize <= hop,
            "end {} vs true {}",
            segs[0].end,
            at_ms(500.0)
        );
    }

    #[test]
    fn speech_touching_signal_edges_extends_to_them() {
        let w = bursts(300.0, &[(0.0, 300.0)]);
        let segs = detect_voice_activity(&w, &VadConfig::default()).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].start, 0);
        assert_eq!(segs[0].end, w.len());
    }

    #[test]
    fn short_gap_bridged_long_gap_split() {
        // 40 ms gap: inside the 50 ms hangover once boundaries land at frame
        // centers, so the two bursts merge.
        let merged = bursts(1000.0, &[(200.0, 400.0), (440.0, 640.0)]);
        let segs = detect_voice_activity(&merged, &VadConfig::default()).unwrap();
        assert_eq!(segs.len(), 1, "{segs:?}");

        // 200 ms gap: far beyond the hangover, stays split.
        let split = bursts(1000.0, &[(200.0, 400.0), (600.0, 800.0)]);
        let segs = detect_voice_activity(&split, &VadConfig::default()).unwrap();
        assert_eq!(segs.len(), 2, "{segs:?}");
    }

    #[test]
    fn click_shorter_than_min_speech_dropped() {
        let w = bursts(1000.0, &[(500.0, 550.0)]);
        let segs = detect_voice_activity(&w, &VadConfig::default()).unwrap();
        assert!(segs.is_empty(), "{segs:?}");
    }

    #[test]
    fn trim_concatenates_exactly_the_segments() {
        let w = bursts(1500.0, &[(200.0, 500.0), (900.0, 1200.0)]);
        let segs = detect_voice_activity(&w, &VadConfig::default()).unwrap();
        assert_eq!(segs.len(), 2);
        let trimmed = trim_silence(&w, &VadConfig::default()).unwrap();
        let expected: Vec<f64> = segs
            .iter()
            .flat_map(|s| w.samples[s.start..s.end].iter().copied())
            .collect();
        assert_eq!(trimmed.samples, expected);
        assert_eq!(trimmed.sample_rate_hz, RATE);
        assert_eq!(
            trimmed.len(),
            segs.iter().map(SpeechSegment::len).sum::<usize>()
        );
    }

    #[test]
    fn extract_segments_validates_order_and_bounds() {
        let w = Waveform::new(vec![0.0; 100], RATE);
        let overlap = [
            SpeechSegment { start: 0, end: 50 },
            SpeechSegment { start: 40, end: 80 },
        ];
        assert!(matches!(
            extract_segments(&w, &overlap).unwrap_err(),
            Error::InvalidSegments { .. }
        ));
        let oob = [SpeechSegment { start: 50, end: 101 }];
        assert!(matches!(
            extract_segments(&w, &oob).unwrap_err(),
            Error::InvalidSegments { .. }
        ));
        let reversed = [SpeechSegment { start: 50, end: 50 }];
        assert!(matches!(
            extract_segments(&w, &reversed).unwrap_err(),
            Error::InvalidSegments { .. }
        ));
    }

    #[test]
    fn config_validation_catches_bad_values() {
        for cfg in [
            VadConfig {
                frame_ms: 0.0,
                ..VadConfig::default()
            },
            VadConfig {
                hop_ms: -1.0,
                ..VadConfig::default()
            },
            VadConfig {
                hop_ms: 40.0,
                ..VadConfig::default()
            },
            VadConfig {
                threshold_db: 0.0,
                ..VadConfig::default()
            },
            VadConfig {
                min_speech_ms: f64::NAN,
                ..VadConfig::default()
            },
            VadConfig {
                hangover_ms: -0.5,
                ..VadConfig::default()
            },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?} should be invalid");
        }
        VadConfig::default().validate().unwrap();
    }

    proptest! {
        #[test]
        fn segments_sorted_disjoint_in_bounds_and_long_enough(
            ranges in prop::collection::vec((0u32..900, 50u32..400), 0..4),
            seed in 0u64..1000,
        ) {
            let _ = seed;
            let ms_ranges: Vec<(f64, f64)> = ranges
                .iter()
                .map(|&(a, len)| (a as f64, (a + len).min(1000) as f64))
                .collect();
            let w = bursts(1000.0, &ms_ranges);
            let cfg = VadConfig::default();
            let segs = detect_voice_activity(&w, &cfg).unwrap();
            let min_len = at_ms(cfg.min_speech_ms);
            let mut cursor = 0usize;
            for s in &segs {
                prop_assert!(s.start < s.end);
                prop_assert!(s.end <= w.len());
                prop_assert!(s.len() >= min_len);
                prop_assert!(s.start >= cursor);
                cursor = s.end;
            }
            // Extraction of detected segments always succeeds.
            let trimmed = extract_segments(&w, &segs).unwrap();
            prop_assert_eq!(trimmed.len(), segs.iter().map(SpeechSegment::len).sum::<usize>());
        }
    }
}

//! Synthetic evaluation corpus with controllable pathology.
//!
//! Real dysarthric speech is scarce and sensitive; this generator renders a
//! small word corpus whose pathological markers are injected with known
//! strength, so every downstream measure can be checked against the ground
//! truth that produced the audio. Each dysarthric voice differs from its
//! matched control by a spectral tilt above a low corner frequency (graded
//! in dB/octave), a breathiness floor that rises with that severity and is
//! shaped by the same tilt, a slower speaking rate, and noisier phone
//! posteriors; listener scores follow the injected severity.
//!
//! Generation is single-threaded and seeds a fresh RNG per entity from the
//! corpus seed, so outputs are byte-identical for a given spec regardless
//! of environment.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_wav_pcm16, Band, Gender, Group, Manifest, UtteranceRecord, Waveform};
use crate::error::{Error, Result};
use crate::ppgdtw::{write_posteriorgram, Posteriorgram};
use crate::tempo::{MAX_STRETCH_FACTOR, MIN_STRETCH_FACTOR};

/// Shape of a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    /// Speakers per class (controls and dysarthric speakers alike).
    pub n_speakers_per_class: usize,
    /// Words per speaker.
    pub n_words: usize,
    pub sample_rate_hz: u32,
    /// Spectral-tilt increments in dB/octave above the tilt corner,
    /// mildest first, strictly increasing. Dysarthric speakers cycle
    /// through these levels.
    pub severity_levels: Vec<f64>,
    /// Duration multiplier per severity level (slower speech reads > 1).
    pub tempo_factors: Vec<f64>,
    /// Mean posteriorgram noise mixing weight per severity level, each in
    /// [0, 1). Every rendition draws its own weight around the level mean.
    pub ppg_noise_levels: Vec<f64>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_speakers_per_class: 6,
            n_words: 10,
            sample_rate_hz: 16_000,
            severity_levels: vec![0.0, 3.0, 6.0],
            tempo_factors: vec![1.0, 1.2, 1.4],
            ppg_noise_levels: vec![0.0, 0.3, 0.6],
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_speakers_per_class == 0 {
            return Err(Error::bad_config("need at least one speaker per class"));
        }
        if self.n_words == 0 {
            return Err(Error::bad_config("need at least one word"));
        }
        if self.sample_rate_hz < 8_000 {
            return Err(Error::bad_config(format!(
                "sample rate {} Hz is too low for voiced synthesis (need ≥ 8000)",
                self.sample_rate_hz
            )));
        }
        if self.severity_levels.is_empty() {
            return Err(Error::bad_config("severity_levels must not be empty"));
        }
        for pair in self.severity_levels.windows(2) {
            if !(pair[0] < pair[1]) {
                return Err(Error::bad_config(format!(
                    "severity_levels must be strictly increasing, found {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if self.severity_levels.iter().any(|&s| !(s.is_finite() && s >= 0.0)) {
            return Err(Error::bad_config(
                "severity levels are dB/octave tilts and must be non-negative",
            ));
        }
        let n_levels = self.severity_levels.len();
        if self.tempo_factors.len() != n_levels {
            return Err(Error::bad_config(format!(
                "tempo_factors has {} entries for {} severity levels",
                self.tempo_factors.len(),
                n_levels
            )));
        }
        if self
            .tempo_factors
            .iter()
            .any(|&f| !(MIN_STRETCH_FACTOR..=MAX_STRETCH_FACTOR).contains(&f))
        {
            return Err(Error::bad_config(format!(
                "tempo factors must lie in [{MIN_STRETCH_FACTOR}, {MAX_STRETCH_FACTOR}]"
            )));
        }
        if self.ppg_noise_levels.len() != n_levels {
            return Err(Error::bad_config(format!(
                "ppg_noise_levels has {} entries for {} severity levels",
                self.ppg_noise_levels.len(),
                n_levels
            )));
        }
        if self.ppg_noise_levels.iter().any(|&l| !(0.0..1.0).contains(&l)) {
            return Err(Error::bad_config(
                "ppg noise levels must lie in [0, 1)",
            ));
        }
        Ok(())
    }
}

/// Phone inventory size of generated posteriorgrams.
pub const PPG_DIM: usize = 12;
/// Posteriorgram frame hop, milliseconds.
pub const PPG_HOP_MS: f64 = 10.0;
/// Mass a clean posteriorgram frame puts on its active phone.
const PPG_MAIN_MASS: f64 = 0.86;
/// Mild frame noise applied to every speaker, so even clean renditions of
/// the same word differ by a little.
const PPG_BASE_JITTER: f64 = 0.04;
/// Breathiness floor relative to speech RMS for a healthy voice.
const MARKER_DB_CONTROL: f64 = -40.0;
/// How much the breathiness floor rises per dB/octave of injected tilt, so
/// voice quality degrades together with severity instead of switching on.
const MARKER_DB_PER_SEVERITY: f64 = 4.0;
/// The floor never rises above this, however extreme the severity.
const MARKER_DB_CEILING: f64 = -12.0;
/// Severity tilt sets in above this frequency.
const TILT_CORNER_HZ: f64 = 250.0;
/// Fractional rise–fall pitch excursion within each utterance. The moving
/// pitch smears harmonics into bands, giving long-term spectra the smooth
/// envelope of natural prosody instead of a line comb.
const RISE_FALL_SPAN: f64 = 0.20;
/// Word token lexicon for transcripts.
const LEXICON: [&str; 10] = [
    "lake", "north", "stone", "river", "amber", "field", "crane", "winter", "moss", "harbor",
];

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Independent RNG for one named entity of the corpus. Seeding per entity
/// (not sequentially) keeps outputs identical however generation is ordered.
fn entity_rng(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ fnv1a(tag)))
}

#[derive(Debug, Clone)]
struct SpeakerDef {
    id: String,
    gender: Gender,
    group: Group,
    band: Band,
    /// Index into the severity/tempo/noise level tables (dysarthric only).
    level_idx: Option<usize>,
    paired_control_id: Option<String>,
    f0_hz: f64,
}

fn band_for_level(idx: usize, n_levels: usize) -> Band {
    if n_levels == 1 || idx == n_levels - 1 {
        Band::Low
    } else if idx == 0 {
        Band::High
    } else {
        Band::Mid
    }
}

fn subjective_for_level(level_db_per_octave: f64) -> f64 {
    1.0 / (1.0 + level_db_per_octave)
}

/// Class index → gender: even male, odd female.
fn gender_for_index(i: usize) -> Gender {
    if i % 2 == 0 {
        Gender::M
    } else {
        Gender::F
    }
}

fn speaker_table(spec: &SynthSpec) -> (Vec<SpeakerDef>, Vec<SpeakerDef>) {
    let n_levels = spec.severity_levels.len();
    let mut controls = Vec::new();
    let mut dysarthric = Vec::new();
    let mut per_gender_ordinal = [0usize; 2];
    for i in 0..spec.n_speakers_per_class {
        let gender = gender_for_index(i);
        let ordinal = per_gender_ordinal[(gender == Gender::F) as usize];
        per_gender_ordinal[(gender == Gender::F) as usize] += 1;
        let base_f0 = match gender {
            Gender::M => 108.0,
            Gender::F => 196.0,
        };
        let control_id = format!("C{:02}", i + 1);
        controls.push(SpeakerDef {
            id: control_id.clone(),
            gender,
            group: Group::Control,
            band: Band::Control,
            level_idx: None,
            paired_control_id: None,
            f0_hz: base_f0 + 11.0 * ordinal as f64,
        });
        let level_idx = ordinal % n_levels;
        // The pair shares a pitch register: paired comparisons should see
        // the injected pathology, not an arbitrary voice difference.
        dysarthric.push(SpeakerDef {
            id: format!("D{:02}", i + 1),
            gender,
            group: Group::Dysarthric,
            band: band_for_level(level_idx, n_levels),
            level_idx: Some(level_idx),
            paired_control_id: Some(control_id),
            f0_hz: base_f0 + 11.0 * ordinal as f64,
        });
    }
    (controls, dysarthric)
}

/// Spectrally shaped unit-RMS noise: flat up to the tilt corner, then rolled
/// off by `tilt_db_per_octave`, synthesized from a random-phase spectrum so
/// the breathiness floor carries the same severity tilt as the harmonics.
fn shaped_noise(rng: &mut ChaCha8Rng, n: usize, rate: u32, tilt_db_per_octave: f64) -> Vec<f64> {
    use rustfft::num_complex::Complex;
    if n == 0 {
        return Vec::new();
    }
    let mut spec = vec![Complex::new(0.0f64, 0.0); n];
    let mag_at = |i: usize| {
        let freq = i as f64 * rate as f64 / n as f64;
        if tilt_db_per_octave > 0.0 && freq > TILT_CORNER_HZ {
            10.0f64.powf(-tilt_db_per_octave * (freq / TILT_CORNER_HZ).log2() / 20.0)
        } else {
            1.0
        }
    };
    for i in 1..n.div_ceil(2) {
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let c = Complex::from_polar(mag_at(i), phase);
        spec[i] = c;
        spec[n - i] = c.conj();
    }
    if n % 2 == 0 && n > 1 {
        spec[n / 2] = Complex::new(mag_at(n / 2), 0.0);
    }
    rustfft::FftPlanner::new()
        .plan_fft_inverse(n)
        .process(&mut spec);
    let mut noise: Vec<f64> = spec.iter().map(|c| c.re).collect();
    let rms = (noise.iter().map(|v| v * v).sum::<f64>() / n as f64)
        .sqrt()
        .max(1e-12);
    for v in &mut noise {
        *v /= rms;
    }
    noise
}

/// Render one word utterance: a harmonic complex with 1/k partial rolloff
/// under a rise–fall pitch contour, an extra `tilt_db_per_octave`
/// attenuation above the tilt corner, and contour-gated breathiness
/// `marker_db` below the speech level, spectrally shaped like the voice.
fn render_voice(
    rng: &mut ChaCha8Rng,
    rate: u32,
    f0: f64,
    tilt_db_per_octave: f64,
    marker_db: f64,
    seconds: f64,
) -> Waveform {
    let n = (seconds * rate as f64).round() as usize;
    let nyquist = rate as f64 / 2.0;

    // Cumulative phase of the fundamental under the pitch contour.
    let mut phase0 = Vec::with_capacity(n);
    let mut acc = 0.0f64;
    for i in 0..n {
        let t = i as f64 / rate as f64;
        let contour = (std::f64::consts::PI * t / seconds.max(1e-9)).sin();
        let inst = f0 * (1.0 - RISE_FALL_SPAN + 2.0 * RISE_FALL_SPAN * contour);
        acc += std::f64::consts::TAU * inst / rate as f64;
        phase0.push(acc);
    }

    let mut speech = vec![0.0f64; n];
    let mut k = 1usize;
    loop {
        let freq = f0 * k as f64;
        if freq >= 0.95 * nyquist {
            break;
        }
        let tilt_db = if freq > TILT_CORNER_HZ {
            -tilt_db_per_octave * (freq / TILT_CORNER_HZ).log2()
        } else {
            0.0
        };
        let amp = 10.0f64.powf(tilt_db / 20.0) / k as f64;
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        for (s, p0) in speech.iter_mut().zip(&phase0) {
            *s += amp * (k as f64 * p0 + phase).sin();
        }
        k += 1;
    }

    // Amplitude contour: raised-cosine edges plus a slow syllabic ripple.
    let fade = (0.03 * rate as f64).round() as usize;
    let am_phase = rng.random_range(0.0..std::f64::consts::TAU);
    let envelope: Vec<f64> = (0..n)
        .map(|i| {
            let edge = if i < fade {
                0.5 - 0.5 * (std::f64::consts::PI * i as f64 / fade as f64).cos()
            } else if i + fade >= n {
                let j = n - 1 - i;
                0.5 - 0.5 * (std::f64::consts::PI * j as f64 / fade as f64).cos()
            } else {
                1.0
            };
            let t = i as f64 / rate as f64;
            edge * (0.85 + 0.15 * (std::f64::consts::TAU * 3.0 * t + am_phase).cos())
        })
        .collect();
    for (s, e) in speech.iter_mut().zip(&envelope) {
        *s *= e;
    }

    let speech_rms =
        (speech.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64).sqrt().max(1e-9);
    let noise_rms = speech_rms * 10.0f64.powf(marker_db / 20.0);
    // Gate the breathiness with the same contour as the voice so it reads
    // as breathiness, not room noise.
    let noise = shaped_noise(rng, n, rate, tilt_db_per_octave);
    let mut samples = speech;
    for ((s, e), nz) in samples.iter_mut().zip(&envelope).zip(&noise) {
        *s += nz * noise_rms * e;
    }

    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-9);
    let gain = 0.5 / peak;
    for s in samples.iter_mut() {
        *s *= gain;
    }
    Waveform::new(samples, rate)
}

/// The deterministic phone sequence for a word, shared by all speakers.
fn word_phone_path(seed: u64, word_idx: usize) -> Vec<usize> {
    let mut rng = entity_rng(seed, &format!("word-path:{word_idx}"));
    let len = 3 + word_idx % 3;
    let mut phones = Vec::with_capacity(len);
    let mut prev = usize::MAX;
    while phones.len() < len {
        let p = rng.random_range(0..PPG_DIM);
        if p != prev {
            phones.push(p);
            prev = p;
        }
    }
    phones
}

/// The deterministic reference transcript for a word.
fn word_transcript(seed: u64, word_idx: usize) -> Vec<&'static str> {
    let mut rng = entity_rng(seed, &format!("word-text:{word_idx}"));
    let len = 2 + word_idx % 3;
    (0..len)
        .map(|_| LEXICON[rng.random_range(0..LEXICON.len())])
        .collect()
}

fn dirichlet_uniform(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..dim)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|v| v / total).collect()
}

/// Posteriorgram for one rendition: smoothed one-hot rows along the word's
/// phone path (one-frame crossfade at phone boundaries, the rest of the
/// mass uniform), mixed with a random simplex point at weight `lambda`.
fn render_ppg(
    rng: &mut ChaCha8Rng,
    phones: &[usize],
    frames_per_phone: usize,
    lambda: f64,
) -> Posteriorgram {
    let uniform_rest = (1.0 - PPG_MAIN_MASS) / PPG_DIM as f64;
    let mut frames = Vec::new();
    for (pi, &phone) in phones.iter().enumerate() {
        for f in 0..frames_per_phone {
            let mut row = vec![uniform_rest; PPG_DIM];
            if f == 0 && pi > 0 {
                row[phones[pi - 1]] += PPG_MAIN_MASS * 0.5;
                row[phone] += PPG_MAIN_MASS * 0.5;
            } else {
                row[phone] += PPG_MAIN_MASS;
            }
            // Per-utterance wobble: every rendition mixes in a little
            // randomness, pathological ones much more.
            let mix = (PPG_BASE_JITTER + lambda).min(0.98);
            let noise = dirichlet_uniform(rng, PPG_DIM);
            for (r, n) in row.iter_mut().zip(&noise) {
                *r = (1.0 - mix) * *r + mix * n;
            }
            frames.push(row);
        }
    }
    Posteriorgram::new(frames, PPG_HOP_MS).expect("generated rows are on the simplex")
}

/// Corrupt a transcript: each token is independently replaced by `ERR` with
/// probability `1 − 1/(1+level)` — no corruption at level 0.
fn corrupt_transcript(rng: &mut ChaCha8Rng, reference: &[&'static str], level: f64) -> String {
    let p_sub = 1.0 - 1.0 / (1.0 + level);
    reference
        .iter()
        .map(|&tok| {
            if p_sub > 0.0 && rng.random::<f64>() < p_sub {
                "ERR"
            } else {
                tok
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

struct RenditionParams<'a> {
    utterance_id: String,
    speaker: &'a SpeakerDef,
    /// Effective level for audio/PPG/transcript (a converted rendition uses
    /// its target speaker's level).
    level_idx: Option<usize>,
    f0_hz: f64,
    group: Group,
    paired_control_id: Option<String>,
}

/// Generate a corpus under `out_dir` (wav/, ppg/, manifest.csv,
/// transcripts.csv) and return its loaded manifest.
pub fn generate(spec: &SynthSpec, out_dir: &Path) -> Result<Manifest> {
    spec.validate()?;
    let wav_dir = out_dir.join("wav");
    let ppg_dir = out_dir.join("ppg");
    for dir in [out_dir, &wav_dir, &ppg_dir] {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let (controls, dysarthric) = speaker_table(spec);

    // Conversion source per gender: the control of the last pair, so the
    // remaining (evaluable) dysarthric speakers still cover every level.
    let mut conversion_controls: Vec<(Gender, String, String)> = Vec::new(); // (gender, control, its dys)
    for gender in [Gender::M, Gender::F] {
        if let Some(last) = dysarthric.iter().filter(|d| d.gender == gender).next_back() {
            conversion_controls.push((
                gender,
                last.paired_control_id.clone().expect("dysarthric speakers are paired"),
                last.id.clone(),
            ));
        }
    }

    let mut renditions: Vec<RenditionParams> = Vec::new();
    for speaker in controls.iter().chain(&dysarthric) {
        for w in 0..spec.n_words {
            renditions.push(RenditionParams {
                utterance_id: format!("{}_w{w:02}", speaker.id),
                speaker,
                level_idx: speaker.level_idx,
                f0_hz: speaker.f0_hz,
                group: speaker.group,
                paired_control_id: speaker.paired_control_id.clone(),
            });
        }
    }
    // Converted renditions: the source control's voice driven toward every
    // same-gender dysarthric target except the source's own partner.
    for (gender, source_control, source_partner) in &conversion_controls {
        let source_f0 = controls
            .iter()
            .find(|c| c.id == *source_control)
            .expect("conversion source exists")
            .f0_hz;
        for target in dysarthric
            .iter()
            .filter(|d| d.gender == *gender && d.id != *source_partner)
        {
            for w in 0..spec.n_words {
                renditions.push(RenditionParams {
                    utterance_id: format!("{}_vc_w{w:02}", target.id),
                    speaker: target,
                    level_idx: target.level_idx,
                    f0_hz: (source_f0 + target.f0_hz) / 2.0,
                    group: Group::Vc,
                    paired_control_id: Some(source_control.clone()),
                });
            }
        }
    }
    renditions.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));

    let mut records = Vec::with_capacity(renditions.len());
    let mut transcripts: Vec<(String, String, String)> = Vec::new();
    for r in &renditions {
        let word_idx: usize = r.utterance_id[r.utterance_id.len() - 2..]
            .parse()
            .expect("utterance ids end in the word index");
        let word_id = format!("w{word_idx:02}");
        let mut rng = entity_rng(spec.seed, &format!("utt:{}", r.utterance_id));

        let (tilt, tempo, lambda, marker_db, level) = match r.level_idx {
            Some(idx) => {
                let severity = spec.severity_levels[idx];
                (
                    severity,
                    spec.tempo_factors[idx],
                    spec.ppg_noise_levels[idx],
                    (MARKER_DB_CONTROL + MARKER_DB_PER_SEVERITY * severity)
                        .min(MARKER_DB_CEILING),
                    severity,
                )
            }
            None => (0.0, 1.0, 0.0, MARKER_DB_CONTROL, 0.0),
        };

        let base_seconds = 0.34 + 0.02 * (word_idx % 5) as f64 + rng.random_range(0.0..0.02);
        let jittered_f0 = r.f0_hz * rng.random_range(0.98..1.02);
        let audio = render_voice(
            &mut rng,
            spec.sample_rate_hz,
            jittered_f0,
            tilt,
            marker_db,
            base_seconds * tempo,
        );
        let wav_rel = format!("wav/{}.wav", r.utterance_id);
        write_wav_pcm16(&out_dir.join(&wav_rel), &audio)?;

        let phones = word_phone_path(spec.seed, word_idx);
        let frames_per_phone = ((4.0 * tempo).round() as usize).max(2);
        // Takes vary: each rendition draws its own corruption weight around
        // the speaker's level mean, so per-speaker verification percentages
        // grade instead of pinning at 0 or 100.
        let lambda = (lambda * rng.random_range(0.25..1.75)).min(0.98);
        let ppg = render_ppg(&mut rng, &phones, frames_per_phone, lambda);
        let ppg_rel = format!("ppg/{}.ppg.csv", r.utterance_id);
        write_posteriorgram(&out_dir.join(&ppg_rel), &ppg)?;

        let reference = word_transcript(spec.seed, word_idx);
        let hypothesis = corrupt_transcript(&mut rng, &reference, level);
        transcripts.push((
            r.utterance_id.clone(),
            reference.join(" "),
            hypothesis,
        ));

        records.push(UtteranceRecord {
            utterance_id: r.utterance_id.clone(),
            speaker_id: r.speaker.id.clone(),
            gender: r.speaker.gender,
            group: r.group,
            intelligibility_band: r.speaker.band,
            subjective_score: r
                .speaker
                .level_idx
                .map(|idx| subjective_for_level(spec.severity_levels[idx])),
            word_id,
            wav_path: wav_rel,
            ppg_path: Some(ppg_rel),
            paired_control_id: r.paired_control_id.clone(),
        });
    }

    let manifest = Manifest::from_records(records, out_dir.to_path_buf())?;
    manifest.write(&out_dir.join("manifest.csv"))?;
    write_transcripts(&out_dir.join("transcripts.csv"), &transcripts)?;
    Ok(manifest)
}

/// Write `utterance_id,reference,hypothesis` rows.
fn write_transcripts(path: &Path, rows: &[(String, String, String)]) -> Result<()> {
    let io_err = |e: csv::Error| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    };
    let mut writer = csv::Writer::from_path(path).map_err(io_err)?;
    writer
        .write_record(["utterance_id", "reference", "hypothesis"])
        .map_err(io_err)?;
    for (utt, reference, hypothesis) in rows {
        writer
            .write_record([utt, reference, hypothesis])
            .map_err(io_err)?;
    }
    writer.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

/// Read a transcripts CSV back as `(utterance_id, reference, hypothesis)`.
pub fn read_transcripts(path: &Path) -> Result<Vec<(String, String, String)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?
        .clone();
    let expected = ["utterance_id", "reference", "hypothesis"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Manifest {
            path: path.to_path_buf(),
            detail: format!("expected columns {expected:?}, found {headers:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        if record.len() != 3 {
            return Err(Error::ManifestRow {
                row: i as u64 + 1,
                detail: format!("expected 3 columns, found {}", record.len()),
            });
        }
        rows.push((
            record[0].to_string(),
            record[1].to_string(),
            record[2].to_string(),
        ));
    }
    Ok(rows)
}

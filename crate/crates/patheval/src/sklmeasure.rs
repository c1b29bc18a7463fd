//! Spectral-divergence intelligibility measurement.
//!
//! Compares every word of reference (control) speakers against the same word
//! from every other speaker using the symmetric Kullback-Leibler divergence
//! between normalized long-term average spectra, then groups the divergences
//! by intelligibility band and tests adjacent bands for significant
//! differences. Rising divergence against healthy references tracks falling
//! intelligibility.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    read_wav, trim_silence, Band, Manifest, SampleKind, SkippedUtterance, UtteranceRecord,
    VadConfig,
};
use crate::error::{Error, Result};
use crate::spectral::{compute_ltas, Ltas, LtasConfig};
use crate::stats::{welch_ttest, TTestResult};

/// Floor applied to distribution bins before the divergence is taken, so
/// zero-probability bins cannot produce infinite logs.
pub const SKL_EPSILON: f64 = 1e-12;

/// Symmetric Kullback-Leibler divergence `KL(p‖q) + KL(q‖p)` in nats.
///
/// Inputs are non-negative vectors of equal length; each is floored at
/// [`SKL_EPSILON`] and renormalized to a distribution before the divergence
/// is computed.
pub fn symmetric_kl(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::BinCountMismatch {
            a: p.len(),
            b: q.len(),
        });
    }
    if p.is_empty() {
        return Err(Error::EmptyInput {
            what: "distribution",
        });
    }
    for (name, v) in [("first", p), ("second", q)] {
        for &x in v {
            if !x.is_finite() {
                return Err(Error::NonFiniteInput {
                    what: "distribution",
                });
            }
            if x < 0.0 {
                return Err(Error::Degenerate {
                    detail: format!("negative mass in {name} distribution"),
                });
            }
        }
        if !(v.iter().sum::<f64>() > 0.0) {
            return Err(Error::SilentUtterance);
        }
    }

    let floor_norm = |v: &[f64]| -> Vec<f64> {
        let floored: Vec<f64> = v.iter().map(|&x| x.max(SKL_EPSILON)).collect();
        let total: f64 = floored.iter().sum();
        floored.into_iter().map(|x| x / total).collect()
    };
    let pf = floor_norm(p);
    let qf = floor_norm(q);

    // KL(p‖q) + KL(q‖p) = Σ (p−q)·(ln p − ln q), always ≥ 0.
    let skl: f64 = pf
        .iter()
        .zip(&qf)
        .map(|(&a, &b)| (a - b) * (a.ln() - b.ln()))
        .sum();
    Ok(skl.max(0.0)) // clamp away -0.0 / rounding dust at identity
}

/// Divergence between a reference speaker's word and another speaker's
/// rendition of the same word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SklEntry {
    pub reference_speaker: String,
    pub other_speaker: String,
    pub word_id: String,
    pub skl: f64,
    pub other_band: Band,
    pub other_kind: SampleKind,
}

/// A word that produced no entries for a reference speaker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordSkip {
    pub reference_speaker: String,
    pub word_id: String,
    pub reason: String,
}

/// Output of a divergence run: entries plus logs of everything left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SklRun {
    pub entries: Vec<SklEntry>,
    pub skipped_utterances: Vec<SkippedUtterance>,
    pub skipped_words: Vec<WordSkip>,
}

/// Box-plot statistics for one (band, kind) group of divergences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub band: Band,
    pub kind: SampleKind,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub n: usize,
}

/// Result of comparing two adjacent band groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TestOutcome {
    Tested(TTestResult),
    /// One or both groups have fewer than two entries; no test was run.
    Insufficient { n_a: usize, n_b: usize },
    /// The test itself was undefined on this data (e.g. two constant,
    /// identical groups).
    Degenerate { detail: String },
}

/// Welch test between two adjacent bands within one sample kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacentBandTest {
    pub kind: SampleKind,
    pub band_a: Band,
    pub band_b: Band,
    pub outcome: TestOutcome,
}

/// Grouped view of a divergence run: per-(band, kind) box-plot summaries and
/// adjacent-band significance tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SklGrouping {
    pub summaries: Vec<GroupSummary>,
    pub tests: Vec<AdjacentBandTest>,
}

/// Linear-interpolation quantile of already-sorted values (the common
/// "position (n−1)·q" convention).
fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Group entries by (band, kind), summarize each group, and Welch-test
/// adjacent bands (per `bands_order`) within each kind. Groups below two
/// entries are marked insufficient rather than tested.
pub fn group_and_test(entries: &[SklEntry], bands_order: &[Band]) -> SklGrouping {
    let mut groups: BTreeMap<(Band, SampleKind), Vec<f64>> = BTreeMap::new();
    for e in entries {
        groups
            .entry((e.other_band, e.other_kind))
            .or_default()
            .push(e.skl);
    }
    for values in groups.values_mut() {
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }

    let mut summaries = Vec::new();
    for kind in [SampleKind::Gt, SampleKind::Vc] {
        for &band in bands_order {
            if let Some(values) = groups.get(&(band, kind)) {
                summaries.push(GroupSummary {
                    band,
                    kind,
                    median: sorted_quantile(values, 0.5),
                    q1: sorted_quantile(values, 0.25),
                    q3: sorted_quantile(values, 0.75),
                    n: values.len(),
                });
            }
        }
    }

    let mut tests = Vec::new();
    for kind in [SampleKind::Gt, SampleKind::Vc] {
        for pair in bands_order.windows(2) {
            let a = groups.get(&(pair[0], kind));
            let b = groups.get(&(pair[1], kind));
            // A pair with a band entirely absent for this kind produces no
            // test row; present-but-small groups are reported as insufficient.
            if a.is_none() || b.is_none() {
                continue;
            }
            let n_a = a.map_or(0, Vec::len);
            let n_b = b.map_or(0, Vec::len);
            let outcome = if n_a < 2 || n_b < 2 {
                TestOutcome::Insufficient { n_a, n_b }
            } else {
                match welch_ttest(a.unwrap(), b.unwrap()) {
                    Ok(result) => TestOutcome::Tested(result),
                    Err(e) => TestOutcome::Degenerate {
                        detail: e.to_string(),
                    },
                }
            };
            tests.push(AdjacentBandTest {
                kind,
                band_a: pair[0],
                band_b: pair[1],
                outcome,
            });
        }
    }

    SklGrouping { summaries, tests }
}

/// Key identifying one comparable rendition: a speaker's take on a word in
/// one sample kind (a dysarthric speaker can appear both as itself and as a
/// conversion target).
type RenditionKey = (String, SampleKind, String);

/// Pick the utterance that represents each (speaker, kind, word): the
/// lexicographically first utterance id, so repeated recordings resolve
/// deterministically.
fn select_renditions(m: &Manifest) -> BTreeMap<RenditionKey, &UtteranceRecord> {
    let mut selected: BTreeMap<RenditionKey, &UtteranceRecord> = BTreeMap::new();
    for r in m.records() {
        let key = (r.speaker_id.clone(), r.sample_kind(), r.word_id.clone());
        match selected.get(&key) {
            Some(prev) if prev.utterance_id <= r.utterance_id => {}
            _ => {
                selected.insert(key, r);
            }
        }
    }
    selected
}

/// Trim silence and compute the normalized LTAS of one utterance.
fn utterance_spectrum(
    m: &Manifest,
    record: &UtteranceRecord,
    cfg: &LtasConfig,
    vad: &VadConfig,
) -> Result<Ltas> {
    let wav = read_wav(&m.wav_path(record))?;
    let trimmed = trim_silence(&wav, vad)?;
    compute_ltas(&trimmed, cfg)?.normalized()
}

/// Compute spectra for every selected rendition in parallel; failures become
/// skip-log entries instead of aborting the run.
fn rendition_spectra(
    m: &Manifest,
    cfg: &LtasConfig,
    vad: &VadConfig,
) -> (BTreeMap<RenditionKey, Ltas>, Vec<SkippedUtterance>) {
    let selected = select_renditions(m);
    let work: Vec<(RenditionKey, &UtteranceRecord)> =
        selected.into_iter().map(|(k, r)| (k, r)).collect();
    let results: Vec<(RenditionKey, std::result::Result<Ltas, SkippedUtterance>)> = work
        .into_par_iter()
        .map(|(key, record)| {
            let outcome = utterance_spectrum(m, record, cfg, vad).map_err(|e| SkippedUtterance {
                utterance_id: record.utterance_id.clone(),
                reason: e.to_string(),
            });
            (key, outcome)
        })
        .collect();

    let mut spectra = BTreeMap::new();
    let mut skipped = Vec::new();
    for (key, outcome) in results {
        match outcome {
            Ok(ltas) => {
                spectra.insert(key, ltas);
            }
            Err(skip) => skipped.push(skip),
        }
    }
    skipped.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
    (spectra, skipped)
}

fn entries_for_reference(
    reference: &str,
    spectra: &BTreeMap<RenditionKey, Ltas>,
    speakers: &BTreeMap<String, crate::corpus::SpeakerInfo>,
    allowed: Option<&BTreeSet<(String, SampleKind)>>,
    skipped_words: &mut Vec<WordSkip>,
) -> Result<Vec<SklEntry>> {
    // Words the reference speaker can offer.
    let ref_words: BTreeMap<&str, &Ltas> = spectra
        .iter()
        .filter(|((s, k, _), _)| s == reference && *k == SampleKind::Gt)
        .map(|((_, _, w), ltas)| (w.as_str(), ltas))
        .collect();

    let in_scope = |speaker: &str, kind: SampleKind| {
        allowed.is_none_or(|set| set.contains(&(speaker.to_string(), kind)))
    };

    let comparable_words: BTreeSet<&str> = spectra
        .keys()
        .filter(|(s, k, _)| s != reference && in_scope(s, *k))
        .map(|(_, _, w)| w.as_str())
        .collect();
    for &word in &comparable_words {
        if !ref_words.contains_key(word) {
            skipped_words.push(WordSkip {
                reference_speaker: reference.to_string(),
                word_id: word.to_string(),
                reason: "reference speaker has no usable rendition of this word".to_string(),
            });
        }
    }

    let mut entries = Vec::new();
    for ((other, kind, word), other_ltas) in spectra {
        if other == reference || !in_scope(other, *kind) {
            continue;
        }
        let Some(ref_ltas) = ref_words.get(word.as_str()) else {
            continue;
        };
        let info = speakers.get(other).ok_or_else(|| Error::BadSpeaker {
            speaker: other.clone(),
            detail: "rendition exists but speaker missing from manifest".to_string(),
        })?;
        entries.push(SklEntry {
            reference_speaker: reference.to_string(),
            other_speaker: other.clone(),
            word_id: word.clone(),
            skl: symmetric_kl(&ref_ltas.bins, &other_ltas.bins)?,
            other_band: info.band,
            other_kind: *kind,
        });
    }
    Ok(entries)
}

/// Word-by-word divergences of every other speaker against one reference
/// control speaker. Words missing on either side are skipped and logged.
pub fn pairwise_word_skl(
    m: &Manifest,
    reference_speaker: &str,
    cfg: &LtasConfig,
    vad: &VadConfig,
) -> Result<SklRun> {
    let speakers = m.speakers();
    let info = speakers
        .get(reference_speaker)
        .ok_or_else(|| Error::BadSpeaker {
            speaker: reference_speaker.to_string(),
            detail: "not present in manifest".to_string(),
        })?;
    if info.group != crate::corpus::Group::Control {
        return Err(Error::BadSpeaker {
            speaker: reference_speaker.to_string(),
            detail: format!("reference must be a control speaker, found group {}", info.group),
        });
    }

    let (spectra, skipped_utterances) = rendition_spectra(m, cfg, vad);
    let mut skipped_words = Vec::new();
    let mut entries =
        entries_for_reference(reference_speaker, &spectra, &speakers, None, &mut skipped_words)?;
    entries.sort_by(|a, b| {
        (&a.reference_speaker, &a.other_speaker, a.other_kind, &a.word_id).cmp(&(
            &b.reference_speaker,
            &b.other_speaker,
            b.other_kind,
            &b.word_id,
        ))
    });
    Ok(SklRun {
        entries,
        skipped_utterances,
        skipped_words,
    })
}

/// Divergences of every paired speaker against its own matched control
/// reference: each dysarthric speaker's recordings — and any converted
/// renditions targeting that speaker — are compared to the control speaker
/// named by the speaker's pairing column. Matching each speaker to a fixed
/// same-register reference keeps the band-level grouping free of
/// cross-speaker pitch-register confounds. Speakers marked excluded from
/// pairing, and unpaired speakers, produce no entries.
pub fn paired_control_skl(m: &Manifest, cfg: &LtasConfig, vad: &VadConfig) -> Result<SklRun> {
    let speakers = m.speakers();

    // Kinds each speaker actually has renditions of.
    let mut kinds_present: BTreeSet<(String, SampleKind)> = BTreeSet::new();
    for r in m.records() {
        kinds_present.insert((r.speaker_id.clone(), r.sample_kind()));
    }

    // reference control -> the (speaker, kind) renditions it is matched to
    let mut partners: BTreeMap<&str, BTreeSet<(String, SampleKind)>> = BTreeMap::new();
    for info in speakers.values() {
        if info.group != crate::corpus::Group::Dysarthric || info.is_excluded_from_pairing() {
            continue;
        }
        let Some(pair) = info.paired_control_id.as_deref() else {
            continue;
        };
        let pair_info = speakers.get(pair).ok_or_else(|| Error::UnpairedSpeaker {
            speaker: info.speaker_id.clone(),
        })?;
        if pair_info.group != crate::corpus::Group::Control {
            return Err(Error::BadSpeaker {
                speaker: pair.to_string(),
                detail: format!(
                    "named as {}'s paired control but has group {}",
                    info.speaker_id, pair_info.group
                ),
            });
        }
        let set = partners.entry(pair_info.speaker_id.as_str()).or_default();
        for kind in [SampleKind::Gt, SampleKind::Vc] {
            if kinds_present.contains(&(info.speaker_id.clone(), kind)) {
                set.insert((info.speaker_id.clone(), kind));
            }
        }
    }
    if partners.is_empty() {
        return Err(Error::EmptyInput {
            what: "paired speakers",
        });
    }

    let (spectra, skipped_utterances) = rendition_spectra(m, cfg, vad);
    let mut entries = Vec::new();
    let mut skipped_words = Vec::new();
    for (reference, allowed) in &partners {
        entries.extend(entries_for_reference(
            reference,
            &spectra,
            &speakers,
            Some(allowed),
            &mut skipped_words,
        )?);
    }
    entries.sort_by(|a, b| {
        (&a.reference_speaker, &a.other_speaker, a.other_kind, &a.word_id).cmp(&(
            &b.reference_speaker,
            &b.other_speaker,
            b.other_kind,
            &b.word_id,
        ))
    });
    Ok(SklRun {
        entries,
        skipped_utterances,
        skipped_words,
    })
}

/// Write entries as CSV:
/// `reference_speaker,other_speaker,word_id,skl,other_band,other_kind`.
pub fn write_entries_csv(path: &Path, entries: &[SklEntry]) -> Result<()> {
    let io_err = |e: csv::Error| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    };
    let mut writer = csv::Writer::from_path(path).map_err(io_err)?;
    writer
        .write_record([
            "reference_speaker",
            "other_speaker",
            "word_id",
            "skl",
            "other_band",
            "other_kind",
        ])
        .map_err(io_err)?;
    for e in entries {
        writer
            .write_record([
                e.reference_speaker.as_str(),
                e.other_speaker.as_str(),
                e.word_id.as_str(),
                &format!("{}", e.skl),
                e.other_band.as_str(),
                e.other_kind.as_str(),
            ])
            .map_err(io_err)?;
    }
    writer.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

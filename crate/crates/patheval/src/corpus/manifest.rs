//! Manifest CSV: the table of utterances a run operates on.
//!
//! One row per utterance. Paths are stored as written; relative paths resolve
//! against the manifest file's directory, so a corpus directory can be moved
//! wholesale. Loading validates the header, every row, and cross-row
//! consistency (duplicate ids, dangling speaker pairings, per-speaker
//! metadata agreement), reporting 1-based data-row numbers in errors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact manifest header, in column order.
pub const MANIFEST_COLUMNS: [&str; 10] = [
    "utterance_id",
    "speaker_id",
    "gender",
    "group",
    "intelligibility_band",
    "subjective_score",
    "word_id",
    "wav_path",
    "ppg_path",
    "paired_control_id",
];

/// Sentinel in `paired_control_id` marking a dysarthric speaker that has no
/// usable control partner and sits out pairing-based evaluation.
pub const EXCLUDED_PAIR_MARK: &str = "excluded";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    M,
    F,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::M => "M",
            Gender::F => "F",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "M" => Some(Gender::M),
            "F" => Some(Gender::F),
            _ => None,
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which population an utterance belongs to: genuine dysarthric speech,
/// genuine control (typical) speech, or converted speech that imitates a
/// dysarthric target speaker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Dysarthric,
    Control,
    Vc,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Dysarthric => "dysarthric",
            Group::Control => "control",
            Group::Vc => "vc",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "dysarthric" => Some(Group::Dysarthric),
            "control" => Some(Group::Control),
            "vc" => Some(Group::Vc),
            _ => None,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Coarse intelligibility band. `Control` is reserved for control speakers;
/// dysarthric and converted utterances carry one of the three severity bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Low,
    Mid,
    High,
    Control,
}

impl Band {
    pub fn as_str(self) -> &'static str {
        match self {
            Band::Low => "low",
            Band::Mid => "mid",
            Band::High => "high",
            Band::Control => "control",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "low" => Some(Band::Low),
            "mid" => Some(Band::Mid),
            "high" => Some(Band::High),
            "control" => Some(Band::Control),
            _ => None,
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether a scored utterance is genuine target speech (`gt`) or converted
/// speech aimed at that target (`vc`). Used in per-speaker result rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleKind {
    Gt,
    Vc,
}

impl SampleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleKind::Gt => "gt",
            SampleKind::Vc => "vc",
        }
    }
}

impl fmt::Display for SampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One manifest row.
///
/// `subjective_score` is stored normalized to (0, 1]; sources that rate on a
/// percentage scale (values in (1, 100]) are divided by 100 at load.
/// `paired_control_id` holds, for dysarthric rows, the paired control speaker
/// (or [`EXCLUDED_PAIR_MARK`]); for `vc` rows, the source control speaker the
/// conversion started from; blank for control rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub utterance_id: String,
    pub speaker_id: String,
    pub gender: Gender,
    pub group: Group,
    pub intelligibility_band: Band,
    pub subjective_score: Option<f64>,
    pub word_id: String,
    pub wav_path: String,
    pub ppg_path: Option<String>,
    pub paired_control_id: Option<String>,
}

impl UtteranceRecord {
    /// Result-row kind for this record; control rows score as genuine speech.
    pub fn sample_kind(&self) -> SampleKind {
        match self.group {
            Group::Vc => SampleKind::Vc,
            Group::Dysarthric | Group::Control => SampleKind::Gt,
        }
    }

    pub fn is_excluded_from_pairing(&self) -> bool {
        self.paired_control_id.as_deref() == Some(EXCLUDED_PAIR_MARK)
    }
}

/// Per-speaker view aggregated from manifest rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerInfo {
    pub speaker_id: String,
    pub gender: Gender,
    pub group: Group,
    pub band: Band,
    /// Pairing column as written (dysarthric: partner or the exclusion mark;
    /// vc: conversion source control).
    pub paired_control_id: Option<String>,
    pub n_utterances: usize,
    subjective_scores: Vec<f64>,
}

impl SpeakerInfo {
    /// Mean of the rows that carry a subjective score; `None` if none do.
    pub fn mean_subjective_score(&self) -> Option<f64> {
        if self.subjective_scores.is_empty() {
            None
        } else {
            Some(self.subjective_scores.iter().sum::<f64>() / self.subjective_scores.len() as f64)
        }
    }

    pub fn is_excluded_from_pairing(&self) -> bool {
        self.paired_control_id.as_deref() == Some(EXCLUDED_PAIR_MARK)
    }
}

/// A loaded, validated manifest plus the directory its relative paths
/// resolve against.
#[derive(Debug, Clone)]
pub struct Manifest {
    records: Vec<UtteranceRecord>,
    root: PathBuf,
}

impl Manifest {
    /// Read and validate a manifest CSV. `path`'s parent directory becomes
    /// the resolution root for relative `wav_path`/`ppg_path` entries.
    pub fn load(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Manifest {
                path: path.to_path_buf(),
                detail: e.to_string(),
            })?;

        let headers = reader.headers().map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            detail: format!("unreadable header: {e}"),
        })?;
        let got: Vec<&str> = headers.iter().collect();
        if got != MANIFEST_COLUMNS {
            return Err(Error::Manifest {
                path: path.to_path_buf(),
                detail: format!(
                    "header mismatch: expected {:?}, found {:?}",
                    MANIFEST_COLUMNS, got
                ),
            });
        }

        let mut records = Vec::new();
        for (idx, row) in reader.records().enumerate() {
            let row_no = idx as u64 + 1; // 1-based data row
            let row = row.map_err(|e| Error::ManifestRow {
                row: row_no,
                detail: e.to_string(),
            })?;
            records.push(parse_row(&row, row_no)?);
        }

        let root = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Manifest::from_records(records, root)
    }

    /// Build a manifest from in-memory rows (e.g. a freshly generated corpus),
    /// running the same cross-row validation as [`Manifest::load`].
    pub fn from_records(records: Vec<UtteranceRecord>, root: PathBuf) -> Result<Self> {
        validate_records(&records)?;
        Ok(Manifest { records, root })
    }

    /// Write the manifest CSV to `path`. Subjective scores are written in
    /// their normalized (0, 1] form, so a rewritten manifest reloads
    /// identically.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        writer
            .write_record(MANIFEST_COLUMNS)
            .map_err(|e| Error::Manifest {
                path: path.to_path_buf(),
                detail: e.to_string(),
            })?;
        for r in &self.records {
            let score = r
                .subjective_score
                .map(|s| format!("{s}"))
                .unwrap_or_default();
            writer
                .write_record([
                    r.utterance_id.as_str(),
                    r.speaker_id.as_str(),
                    r.gender.as_str(),
                    r.group.as_str(),
                    r.intelligibility_band.as_str(),
                    score.as_str(),
                    r.word_id.as_str(),
                    r.wav_path.as_str(),
                    r.ppg_path.as_deref().unwrap_or(""),
                    r.paired_control_id.as_deref().unwrap_or(""),
                ])
                .map_err(|e| Error::Manifest {
                    path: path.to_path_buf(),
                    detail: e.to_string(),
                })?;
        }
        writer.flush().map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        Ok(())
    }

    pub fn records(&self) -> &[UtteranceRecord] {
        &self.records
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Resolve a manifest-relative path (absolute paths pass through).
    pub fn resolve(&self, stored: &str) -> PathBuf {
        let p = Path::new(stored);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn wav_path(&self, record: &UtteranceRecord) -> PathBuf {
        self.resolve(&record.wav_path)
    }

    pub fn ppg_path(&self, record: &UtteranceRecord) -> Option<PathBuf> {
        record.ppg_path.as_deref().map(|p| self.resolve(p))
    }

    /// Aggregate rows into per-speaker summaries, keyed by speaker id.
    ///
    /// A dysarthric speaker can appear both through its own recordings and as
    /// the target of converted renditions (`group = vc`). The speaker's
    /// identity fields (group, pairing) come from the original rows whenever
    /// any exist, independent of row order; counts and scores pool all rows.
    pub fn speakers(&self) -> BTreeMap<String, SpeakerInfo> {
        let mut out: BTreeMap<String, SpeakerInfo> = BTreeMap::new();
        for r in &self.records {
            let info = out
                .entry(r.speaker_id.clone())
                .or_insert_with(|| SpeakerInfo {
                    speaker_id: r.speaker_id.clone(),
                    gender: r.gender,
                    group: r.group,
                    band: r.intelligibility_band,
                    paired_control_id: r.paired_control_id.clone(),
                    n_utterances: 0,
                    subjective_scores: Vec::new(),
                });
            if info.group == Group::Vc && r.group != Group::Vc {
                info.gender = r.gender;
                info.group = r.group;
                info.band = r.intelligibility_band;
                info.paired_control_id = r.paired_control_id.clone();
            }
            info.n_utterances += 1;
            if let Some(s) = r.subjective_score {
                info.subjective_scores.push(s);
            }
        }
        out
    }

    pub fn records_for_speaker<'a>(&'a self, speaker_id: &str) -> Vec<&'a UtteranceRecord> {
        self.records
            .iter()
            .filter(|r| r.speaker_id == speaker_id)
            .collect()
    }
}

fn field<'a>(row: &'a csv::StringRecord, i: usize) -> &'a str {
    row.get(i).unwrap_or("")
}

fn parse_row(row: &csv::StringRecord, row_no: u64) -> Result<UtteranceRecord> {
    let bad = |detail: String| Error::ManifestRow {
        row: row_no,
        detail,
    };

    if row.len() != MANIFEST_COLUMNS.len() {
        return Err(bad(format!(
            "expected {} fields, found {}",
            MANIFEST_COLUMNS.len(),
            row.len()
        )));
    }

    let utterance_id = field(row, 0).to_string();
    if utterance_id.is_empty() {
        return Err(bad("empty utterance_id".into()));
    }
    let speaker_id = field(row, 1).to_string();
    if speaker_id.is_empty() {
        return Err(bad("empty speaker_id".into()));
    }
    let gender = Gender::parse(field(row, 2))
        .ok_or_else(|| bad(format!("gender must be M or F, found {:?}", field(row, 2))))?;
    let group = Group::parse(field(row, 3)).ok_or_else(|| {
        bad(format!(
            "group must be dysarthric, control, or vc, found {:?}",
            field(row, 3)
        ))
    })?;
    let band = Band::parse(field(row, 4)).ok_or_else(|| {
        bad(format!(
            "intelligibility_band must be low, mid, high, or control, found {:?}",
            field(row, 4)
        ))
    })?;

    let score_raw = field(row, 5);
    let subjective_score = if score_raw.is_empty() {
        None
    } else {
        let s: f64 = score_raw
            .parse()
            .map_err(|e| bad(format!("unparseable subjective_score {score_raw:?}: {e}")))?;
        if !s.is_finite() {
            return Err(bad(format!("non-finite subjective_score {score_raw:?}")));
        }
        // Scores are fractions in (0, 1]; percentage-scale sources in
        // (1, 100] are normalized here so everything downstream is a fraction.
        if s > 0.0 && s <= 1.0 {
            Some(s)
        } else if s > 1.0 && s <= 100.0 {
            Some(s / 100.0)
        } else {
            return Err(bad(format!(
                "subjective_score must lie in (0, 1] or (1, 100], found {s}"
            )));
        }
    };

    let word_id = field(row, 6).to_string();
    if word_id.is_empty() {
        return Err(bad("empty word_id".into()));
    }
    let wav_path = field(row, 7).to_string();
    if wav_path.is_empty() {
        return Err(bad("empty wav_path".into()));
    }
    let ppg_path = match field(row, 8) {
        "" => None,
        p => Some(p.to_string()),
    };
    let paired_control_id = match field(row, 9) {
        "" => None,
        p => Some(p.to_string()),
    };

    // Group-dependent consistency for the row itself.
    match group {
        Group::Control => {
            if band != Band::Control {
                return Err(bad(format!(
                    "control rows must carry intelligibility_band control, found {band}"
                )));
            }
        }
        Group::Dysarthric => {
            if band == Band::Control {
                return Err(bad(
                    "dysarthric rows must carry a severity band, not control".into(),
                ));
            }
            if paired_control_id.is_none() {
                return Err(bad(format!(
                    "dysarthric rows need paired_control_id (a control speaker id \
                     or {EXCLUDED_PAIR_MARK:?})"
                )));
            }
        }
        Group::Vc => {
            if band == Band::Control {
                return Err(bad(
                    "vc rows must carry the target's severity band, not control".into(),
                ));
            }
            match paired_control_id.as_deref() {
                None => {
                    return Err(bad(
                        "vc rows need paired_control_id (the source control speaker)".into(),
                    ))
                }
                Some(EXCLUDED_PAIR_MARK) => {
                    return Err(bad(format!(
                        "vc rows must name a real source control, not {EXCLUDED_PAIR_MARK:?}"
                    )))
                }
                Some(_) => {}
            }
        }
    }

    Ok(UtteranceRecord {
        utterance_id,
        speaker_id,
        gender,
        group,
        intelligibility_band: band,
        subjective_score,
        word_id,
        wav_path,
        ppg_path,
        paired_control_id,
    })
}

fn validate_records(records: &[UtteranceRecord]) -> Result<()> {
    let mut seen_ids = BTreeSet::new();
    for r in records {
        if !seen_ids.insert(r.utterance_id.as_str()) {
            return Err(Error::DuplicateUtterance {
                id: r.utterance_id.clone(),
            });
        }
    }

    // Per-speaker metadata must agree across rows. Converted renditions
    // (group `vc`) carry their target speaker's id but their own group and
    // pairing (the conversion's source control), so they form a separate
    // stratum: full agreement inside each stratum, and gender/band
    // agreement between a speaker's converted and genuine rows.
    let mut meta: BTreeMap<(&str, bool), (&UtteranceRecord, u64)> = BTreeMap::new();
    for (idx, r) in records.iter().enumerate() {
        let row_no = idx as u64 + 1;
        let key = (r.speaker_id.as_str(), r.group == Group::Vc);
        match meta.get(&key) {
            None => {
                meta.insert(key, (r, row_no));
            }
            Some((first, first_row)) => {
                if first.gender != r.gender
                    || first.group != r.group
                    || first.intelligibility_band != r.intelligibility_band
                    || first.paired_control_id != r.paired_control_id
                {
                    return Err(Error::ManifestRow {
                        row: row_no,
                        detail: format!(
                            "speaker {} metadata disagrees with row {first_row} \
                             (gender/group/band/paired_control_id must be constant per speaker)",
                            r.speaker_id
                        ),
                    });
                }
            }
        }
    }
    for (&(speaker, is_vc), &(vc_first, vc_row)) in &meta {
        if !is_vc {
            continue;
        }
        if let Some(&(own_first, own_row)) = meta.get(&(speaker, false)) {
            if own_first.gender != vc_first.gender
                || own_first.intelligibility_band != vc_first.intelligibility_band
            {
                return Err(Error::ManifestRow {
                    row: vc_row.max(own_row),
                    detail: format!(
                        "converted rows for speaker {speaker} disagree with their genuine \
                         rows on gender or band"
                    ),
                });
            }
        }
    }

    // Pairings must reference control speakers that exist in this manifest.
    let controls: BTreeSet<&str> = records
        .iter()
        .filter(|r| r.group == Group::Control)
        .map(|r| r.speaker_id.as_str())
        .collect();
    for r in records {
        if let Some(pair) = r.paired_control_id.as_deref() {
            if pair != EXCLUDED_PAIR_MARK && !controls.contains(pair) {
                return Err(Error::UnpairedSpeaker {
                    speaker: format!(
                        "{} (references control {pair:?}, which has no control rows)",
                        r.speaker_id
                    ),
                });
            }
        }
    }

    Ok(())
}

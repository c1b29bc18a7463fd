//! Posteriorgram alignment and utterance verification.
//!
//! Each evaluated utterance's phone posteriorgram is aligned against a
//! healthy reference rendition of the same word with dynamic time warping
//! (symmetric KL local cost). The path-length-normalized alignment cost is
//! the matching score; a logistic map turns it into a verification
//! probability, and the percentage of verified utterances per speaker is
//! that speaker's intelligibility estimate.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Band, Gender, Group, Manifest, SampleKind, SkippedUtterance};
use crate::error::{Error, Result};
use crate::sklmeasure::SKL_EPSILON;
use crate::stats::{pearson, spearman, MaybeCorrelation};

/// A phone posteriorgram: `T` frames × `D` phone posteriors, rows on the
/// probability simplex. Construction renormalizes rows, so downstream code
/// can rely on row sums of 1 ± 1e-12.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posteriorgram {
    pub frames: Vec<Vec<f64>>,
    pub frame_hop_ms: f64,
}

/// Row sums may deviate from 1 by at most this much before renormalization.
pub const ROW_SUM_TOLERANCE: f64 = 1e-3;

impl Posteriorgram {
    /// Validate and renormalize frames: equal row lengths, non-negative
    /// finite entries, row sums within [`ROW_SUM_TOLERANCE`] of 1.
    pub fn new(frames: Vec<Vec<f64>>, frame_hop_ms: f64) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptyInput {
                what: "posteriorgram frames",
            });
        }
        if !(frame_hop_ms.is_finite() && frame_hop_ms > 0.0) {
            return Err(Error::Posteriorgram {
                detail: format!("frame hop must be positive, found {frame_hop_ms}"),
            });
        }
        let dim = frames[0].len();
        if dim == 0 {
            return Err(Error::Posteriorgram {
                detail: "zero-dimensional frames".to_string(),
            });
        }
        let mut normalized = Vec::with_capacity(frames.len());
        for (i, row) in frames.into_iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Posteriorgram {
                    detail: format!(
                        "ragged rows: row {i} has {} values, expected {dim}",
                        row.len()
                    ),
                });
            }
            let mut sum = 0.0;
            for &v in &row {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Posteriorgram {
                        detail: format!("row {i} contains a negative or non-finite posterior"),
                    });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::Posteriorgram {
                    detail: format!("row {i} sums to {sum}, outside 1 ± {ROW_SUM_TOLERANCE}"),
                });
            }
            normalized.push(row.into_iter().map(|v| v / sum).collect());
        }
        Ok(Posteriorgram {
            frames: normalized,
            frame_hop_ms,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn dim(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }
}

/// Read a posteriorgram CSV: first line `D=<dim>,hop_ms=<hop>`, then one
/// comma-separated row of `D` posteriors per frame.
pub fn load_posteriorgram(path: &Path) -> Result<Posteriorgram> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Posteriorgram {
        detail: format!("{}: empty file", path.display()),
    })?;

    let mut dim: Option<usize> = None;
    let mut hop_ms: Option<f64> = None;
    for part in header.split(',') {
        match part.trim().split_once('=') {
            Some(("D", v)) => {
                dim = Some(v.trim().parse().map_err(|_| Error::Posteriorgram {
                    detail: format!("{}: unparseable dimension {v:?}", path.display()),
                })?)
            }
            Some(("hop_ms", v)) => {
                hop_ms = Some(v.trim().parse().map_err(|_| Error::Posteriorgram {
                    detail: format!("{}: unparseable hop {v:?}", path.display()),
                })?)
            }
            _ => {
                return Err(Error::Posteriorgram {
                    detail: format!("{}: bad header field {part:?}", path.display()),
                })
            }
        }
    }
    let (Some(dim), Some(hop_ms)) = (dim, hop_ms) else {
        return Err(Error::Posteriorgram {
            detail: format!("{}: header must declare D and hop_ms", path.display()),
        });
    };

    let mut frames = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|_| Error::Posteriorgram {
                    detail: format!("{}: non-numeric cell in row {i}: {cell:?}", path.display()),
                })
            })
            .collect::<Result<_>>()?;
        if row.len() != dim {
            return Err(Error::Posteriorgram {
                detail: format!(
                    "{}: row {i} has {} values, header declares D={dim}",
                    path.display(),
                    row.len()
                ),
            });
        }
        frames.push(row);
    }
    Posteriorgram::new(frames, hop_ms).map_err(|e| match e {
        Error::Posteriorgram { detail } => Error::Posteriorgram {
            detail: format!("{}: {detail}", path.display()),
        },
        other => other,
    })
}

/// Write the posteriorgram CSV format read by [`load_posteriorgram`].
pub fn write_posteriorgram(path: &Path, ppg: &Posteriorgram) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("D={},hop_ms={}\n", ppg.dim(), ppg.frame_hop_ms));
    for row in &ppg.frames {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// The minimum-cost monotonic alignment between two posteriorgrams.
#[derive(Debug, Clone, PartialEq)]
pub struct DtwResult {
    pub total_cost: f64,
    pub path: Vec<(usize, usize)>,
    /// `total_cost / path.len()` — comparable across utterance lengths.
    pub normalized_cost: f64,
}

/// Align two posteriorgrams with dynamic time warping.
///
/// Steps are {(1,0), (0,1), (1,1)}; the local cost of matching frame `i` to
/// frame `j` is their symmetric KL divergence (ε-floored). Cost ties during
/// backtrace prefer the diagonal step, then (1,0).
pub fn dtw_align(a: &Posteriorgram, b: &Posteriorgram) -> Result<DtwResult> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            what: "posteriorgram phone dimensions",
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let t1 = a.n_frames();
    let t2 = b.n_frames();

    // Floor + renormalize rows once and cache logs, so the inner loop is
    // pure arithmetic: skl(p,q) = Σ (p−q)·(ln p − ln q).
    let prep = |ppg: &Posteriorgram| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut vals = Vec::with_capacity(ppg.n_frames());
        let mut logs = Vec::with_capacity(ppg.n_frames());
        for row in &ppg.frames {
            let floored: Vec<f64> = row.iter().map(|&v| v.max(SKL_EPSILON)).collect();
            let total: f64 = floored.iter().sum();
            let v: Vec<f64> = floored.into_iter().map(|x| x / total).collect();
            logs.push(v.iter().map(|x| x.ln()).collect());
            vals.push(v);
        }
        (vals, logs)
    };
    let (av, al) = prep(a);
    let (bv, bl) = prep(b);

    let local = |i: usize, j: usize| -> f64 {
        let cost: f64 = av[i]
            .iter()
            .zip(&al[i])
            .zip(bv[j].iter().zip(&bl[j]))
            .map(|((&pa, &la), (&pb, &lb))| (pa - pb) * (la - lb))
            .sum();
        cost.max(0.0)
    };

    // Backpointer codes, in tie-preference order.
    const DIAG: u8 = 0;
    const FROM_A: u8 = 1; // step (1,0): advance in a
    const FROM_B: u8 = 2; // step (0,1): advance in b
    const START: u8 = 3;

    let idx = |i: usize, j: usize| i * t2 + j;
    let mut cost = vec![0.0f64; t1 * t2];
    let mut back = vec![START; t1 * t2];

    for i in 0..t1 {
        for j in 0..t2 {
            let c = local(i, j);
            let (prev, step) = if i == 0 && j == 0 {
                (0.0, START)
            } else if i == 0 {
                (cost[idx(0, j - 1)], FROM_B)
            } else if j == 0 {
                (cost[idx(i - 1, 0)], FROM_A)
            } else {
                // Preference on exact ties: diagonal, then (1,0), then (0,1).
                let mut best = (cost[idx(i - 1, j - 1)], DIAG);
                let up = cost[idx(i - 1, j)];
                if up < best.0 {
                    best = (up, FROM_A);
                }
                let left = cost[idx(i, j - 1)];
                if left < best.0 {
                    best = (left, FROM_B);
                }
                best
            };
            cost[idx(i, j)] = prev + c;
            back[idx(i, j)] = step;
        }
    }

    let mut path = Vec::new();
    let (mut i, mut j) = (t1 - 1, t2 - 1);
    loop {
        path.push((i, j));
        match back[idx(i, j)] {
            DIAG => {
                i -= 1;
                j -= 1;
            }
            FROM_A => i -= 1,
            FROM_B => j -= 1,
            _ => break,
        }
    }
    path.reverse();

    let total_cost = cost[idx(t1 - 1, t2 - 1)];
    Ok(DtwResult {
        total_cost,
        normalized_cost: total_cost / path.len() as f64,
        path,
    })
}

/// Parameters of the score→probability logistic map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub slope: f64,
    pub midpoint: f64,
}

impl LogisticParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.slope.is_finite() && self.slope > 0.0) {
            return Err(Error::bad_config(format!(
                "logistic slope must be positive, found {}",
                self.slope
            )));
        }
        if !self.midpoint.is_finite() {
            return Err(Error::bad_config("logistic midpoint must be finite"));
        }
        Ok(())
    }
}

/// Map a matching score (alignment cost; lower is better) to a verification
/// probability `p_c = 1 / (1 + exp(slope·(score − midpoint)))` and the
/// verified flag `p_c ≥ 0.5`.
pub fn verify_score(score: f64, params: &LogisticParams) -> (f64, bool) {
    let p_c = 1.0 / (1.0 + (params.slope * (score - params.midpoint)).exp());
    (p_c, p_c >= 0.5)
}

/// Choose logistic parameters from score samples of the two populations:
/// midpoint halfway between the class means, slope such that a score at the
/// control mean maps to `p_c = 0.9`.
pub fn calibrate_logistic(
    control_scores: &[f64],
    pathological_scores: &[f64],
) -> Result<LogisticParams> {
    if control_scores.is_empty() {
        return Err(Error::EmptyInput {
            what: "control scores",
        });
    }
    if pathological_scores.is_empty() {
        return Err(Error::EmptyInput {
            what: "pathological scores",
        });
    }
    crate::stats::ensure_finite(control_scores, "control scores")?;
    crate::stats::ensure_finite(pathological_scores, "pathological scores")?;
    let mc = crate::stats::mean(control_scores);
    let mp = crate::stats::mean(pathological_scores);
    if !(mc < mp) {
        return Err(Error::Degenerate {
            detail: format!(
                "calibration requires control mean < pathological mean, found {mc} vs {mp}"
            ),
        });
    }
    Ok(LogisticParams {
        // 2·ln9/(mp−mc): puts p_c(mc) at exactly 0.9.
        slope: 2.0 * 9.0f64.ln() / (mp - mc),
        midpoint: (mc + mp) / 2.0,
    })
}

/// One verified (or not) utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub utterance_id: String,
    pub matching_score: f64,
    pub p_c: f64,
    pub verified: bool,
}

/// Percentage of verified utterances: `100 · #verified / #total`.
pub fn speaker_intelligibility(results: &[VerificationResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::EmptyInput {
            what: "verification results",
        });
    }
    let verified = results.iter().filter(|r| r.verified).count();
    Ok(100.0 * verified as f64 / results.len() as f64)
}

/// Per-speaker intelligibility estimate (per sample kind, since a dysarthric
/// speaker is scored both as themselves and as a conversion target).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerEstimate {
    pub speaker_id: String,
    pub kind: SampleKind,
    pub band: Band,
    pub gender: Gender,
    pub percent_verified: f64,
    pub n_utterances: usize,
    pub mean_subjective_score: Option<f64>,
}

/// Full output of a verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRun {
    pub reference_speaker: String,
    pub params: LogisticParams,
    /// Whether `params` were calibrated from this run's own score
    /// distributions (as opposed to supplied by the caller).
    pub calibrated: bool,
    pub results: Vec<VerificationResult>,
    pub speaker_estimates: Vec<SpeakerEstimate>,
    pub skipped: Vec<SkippedUtterance>,
}

/// Verify every posteriorgram-bearing utterance in the manifest against the
/// same-word rendition of `reference_speaker` (a control speaker).
///
/// When `params` is `None`, the logistic map is calibrated from this run's
/// control vs dysarthric genuine-speech score distributions; converted
/// utterances are always scored but never used for calibration.
pub fn run_verification(
    m: &Manifest,
    reference_speaker: &str,
    params: Option<LogisticParams>,
) -> Result<VerificationRun> {
    let speakers = m.speakers();
    let ref_info = speakers
        .get(reference_speaker)
        .ok_or_else(|| Error::BadSpeaker {
            speaker: reference_speaker.to_string(),
            detail: "not present in manifest".to_string(),
        })?;
    if ref_info.group != Group::Control {
        return Err(Error::BadSpeaker {
            speaker: reference_speaker.to_string(),
            detail: format!(
                "reference must be a control speaker, found group {}",
                ref_info.group
            ),
        });
    }
    if let Some(p) = &params {
        p.validate()?;
    }

    let mut skipped: Vec<SkippedUtterance> = Vec::new();

    // Reference templates: the reference speaker's first utterance per word.
    let mut template_records: BTreeMap<&str, &crate::corpus::UtteranceRecord> = BTreeMap::new();
    for r in m.records() {
        if r.speaker_id != reference_speaker {
            continue;
        }
        match template_records.get(r.word_id.as_str()) {
            Some(prev) if prev.utterance_id <= r.utterance_id => {}
            _ => {
                template_records.insert(&r.word_id, r);
            }
        }
    }
    let mut templates: BTreeMap<&str, Posteriorgram> = BTreeMap::new();
    for (word, record) in &template_records {
        let Some(ppg_path) = m.ppg_path(record) else {
            skipped.push(SkippedUtterance {
                utterance_id: record.utterance_id.clone(),
                reason: "reference utterance has no posteriorgram path".to_string(),
            });
            continue;
        };
        match load_posteriorgram(&ppg_path) {
            Ok(ppg) => {
                templates.insert(word, ppg);
            }
            Err(e) => skipped.push(SkippedUtterance {
                utterance_id: record.utterance_id.clone(),
                reason: format!("reference posteriorgram unusable: {e}"),
            }),
        }
    }
    if templates.is_empty() {
        return Err(Error::BadSpeaker {
            speaker: reference_speaker.to_string(),
            detail: "no usable reference posteriorgrams".to_string(),
        });
    }

    // Score every other utterance against its word template, in parallel.
    enum Scored<'a> {
        Ok(&'a crate::corpus::UtteranceRecord, f64),
        Skip(SkippedUtterance),
    }
    let evaluated: Vec<Scored> = m
        .records()
        .par_iter()
        .filter(|r| r.speaker_id != reference_speaker)
        .map(|r| {
            let Some(template) = templates.get(r.word_id.as_str()) else {
                return Scored::Skip(SkippedUtterance {
                    utterance_id: r.utterance_id.clone(),
                    reason: format!("no reference template for word {}", r.word_id),
                });
            };
            let Some(ppg_path) = m.ppg_path(r) else {
                return Scored::Skip(SkippedUtterance {
                    utterance_id: r.utterance_id.clone(),
                    reason: "no posteriorgram path".to_string(),
                });
            };
            let ppg = match load_posteriorgram(&ppg_path) {
                Ok(p) => p,
                Err(e) => {
                    return Scored::Skip(SkippedUtterance {
                        utterance_id: r.utterance_id.clone(),
                        reason: e.to_string(),
                    })
                }
            };
            match dtw_align(&ppg, template) {
                Ok(result) => Scored::Ok(r, result.normalized_cost),
                Err(e) => Scored::Skip(SkippedUtterance {
                    utterance_id: r.utterance_id.clone(),
                    reason: e.to_string(),
                }),
            }
        })
        .collect();

    let mut scored: Vec<(&crate::corpus::UtteranceRecord, f64)> = Vec::new();
    for item in evaluated {
        match item {
            Scored::Ok(r, score) => scored.push((r, score)),
            Scored::Skip(s) => skipped.push(s),
        }
    }
    scored.sort_by(|a, b| a.0.utterance_id.cmp(&b.0.utterance_id));
    skipped.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));

    // Calibrate if no parameters were supplied: genuine control vs genuine
    // dysarthric scores only.
    let (params, calibrated) = match params {
        Some(p) => (p, false),
        None => {
            let control: Vec<f64> = scored
                .iter()
                .filter(|(r, _)| r.group == Group::Control)
                .map(|(_, s)| *s)
                .collect();
            let pathological: Vec<f64> = scored
                .iter()
                .filter(|(r, _)| r.group == Group::Dysarthric)
                .map(|(_, s)| *s)
                .collect();
            (calibrate_logistic(&control, &pathological)?, true)
        }
    };

    let results: Vec<VerificationResult> = scored
        .iter()
        .map(|(r, score)| {
            let (p_c, verified) = verify_score(*score, &params);
            VerificationResult {
                utterance_id: r.utterance_id.clone(),
                matching_score: *score,
                p_c,
                verified,
            }
        })
        .collect();

    // Per-(speaker, kind) estimates.
    let mut by_speaker: BTreeMap<(String, SampleKind), Vec<VerificationResult>> = BTreeMap::new();
    for ((r, _), result) in scored.iter().zip(&results) {
        by_speaker
            .entry((r.speaker_id.clone(), r.sample_kind()))
            .or_default()
            .push(result.clone());
    }
    let mut speaker_estimates = Vec::new();
    for ((speaker_id, kind), group) in &by_speaker {
        let info = &speakers[speaker_id];
        speaker_estimates.push(SpeakerEstimate {
            speaker_id: speaker_id.clone(),
            kind: *kind,
            band: info.band,
            gender: info.gender,
            percent_verified: speaker_intelligibility(group)?,
            n_utterances: group.len(),
            mean_subjective_score: info.mean_subjective_score(),
        });
    }

    Ok(VerificationRun {
        reference_speaker: reference_speaker.to_string(),
        params,
        calibrated,
        results,
        speaker_estimates,
        skipped,
    })
}

/// Pearson + Spearman between subjective scores and intelligibility
/// estimates over one grouping of speakers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPair {
    pub pearson: MaybeCorrelation,
    pub spearman: MaybeCorrelation,
}

/// Correlation block for one sample kind, pooled and per gender.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateCorrelations {
    pub kind: SampleKind,
    pub pooled: CorrelationPair,
    pub male: CorrelationPair,
    pub female: CorrelationPair,
}

fn correlate_subset(estimates: &[(&SpeakerEstimate, f64)]) -> CorrelationPair {
    let to_maybe = |r: Result<crate::stats::CorrelationResult>| match r {
        Ok(result) => MaybeCorrelation::Computed { result },
        Err(_) => MaybeCorrelation::NotComputable { n: estimates.len() },
    };
    if estimates.len() < 3 {
        return CorrelationPair {
            pearson: MaybeCorrelation::NotComputable { n: estimates.len() },
            spearman: MaybeCorrelation::NotComputable { n: estimates.len() },
        };
    }
    let subjective: Vec<f64> = estimates.iter().map(|(_, s)| *s).collect();
    let predicted: Vec<f64> = estimates.iter().map(|(e, _)| e.percent_verified).collect();
    CorrelationPair {
        pearson: to_maybe(pearson(&subjective, &predicted)),
        spearman: to_maybe(spearman(&subjective, &predicted)),
    }
}

/// Correlate subjective scores with estimates for one sample kind, pooled
/// and per gender. Speakers without subjective scores are left out; groups
/// below three speakers are marked not computable.
pub fn correlate_estimates(
    estimates: &[SpeakerEstimate],
    kind: SampleKind,
) -> EstimateCorrelations {
    let with_scores: Vec<(&SpeakerEstimate, f64)> = estimates
        .iter()
        .filter(|e| e.kind == kind)
        .filter_map(|e| e.mean_subjective_score.map(|s| (e, s)))
        .collect();
    let male: Vec<(&SpeakerEstimate, f64)> = with_scores
        .iter()
        .filter(|(e, _)| e.gender == Gender::M)
        .cloned()
        .collect();
    let female: Vec<(&SpeakerEstimate, f64)> = with_scores
        .iter()
        .filter(|(e, _)| e.gender == Gender::F)
        .cloned()
        .collect();
    EstimateCorrelations {
        kind,
        pooled: correlate_subset(&with_scores),
        male: correlate_subset(&male),
        female: correlate_subset(&female),
    }
}

/// Write verification results CSV: `utterance_id,matching_score,p_c,verified`.
pub fn write_verification_csv(path: &Path, results: &[VerificationResult]) -> Result<()> {
    let io_err = |e: csv::Error| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    };
    let mut writer = csv::Writer::from_path(path).map_err(io_err)?;
    writer
        .write_record(["utterance_id", "matching_score", "p_c", "verified"])
        .map_err(io_err)?;
    for r in results {
        writer
            .write_record([
                r.utterance_id.as_str(),
                &format!("{}", r.matching_score),
                &format!("{}", r.p_c),
                if r.verified { "true" } else { "false" },
            ])
            .map_err(io_err)?;
    }
    writer.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

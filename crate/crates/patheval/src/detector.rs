//! Pathological-voice detection from long-term average spectra.
//!
//! A sparse linear model is trained on dB-scale LTAS features to separate
//! dysarthric from control speakers, under leave-one-pair-out
//! cross-validation: each dysarthric/control pair is held out once while
//! the remaining pairs of the same gender train the model. The pair whose
//! control voice seeds the voice-conversion system never gets evaluated
//! (its converted renditions are the system's own output), but it does
//! stay in every training set.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    read_wav, trim_silence, Gender, Group, Manifest, SampleKind, SkippedUtterance,
    UtteranceRecord, VadConfig, EXCLUDED_PAIR_MARK,
};
use crate::error::{Error, Result};
use crate::lasso::{self, LassoConfig, LassoModel};
use crate::spectral::{compute_ltas, LtasConfig};
use crate::stats::{mean, pearson, population_variance, MaybeCorrelation};

/// A dysarthric speaker together with their matched control.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerPair {
    pub dysarthric: String,
    pub control: String,
}

/// One cross-validation fold: a held-out pair and the same-gender pairs
/// that train its model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub gender: Gender,
    pub held_out_pair: SpeakerPair,
    pub train_pairs: Vec<SpeakerPair>,
}

/// The complete cross-validation layout derived from a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
    /// Dysarthric speakers marked as having no usable pairing.
    pub excluded_speakers: Vec<String>,
    /// Per gender, the pair whose control seeds the conversion system.
    pub conversion_pairs: Vec<SpeakerPair>,
}

/// Derive the leave-one-pair-out layout: pairings come from the manifest's
/// `paired_control_id` column, the conversion pair per gender from the
/// source control named on that gender's converted rows.
pub fn build_folds(m: &Manifest) -> Result<FoldPlan> {
    let speakers = m.speakers();

    let mut excluded_speakers = Vec::new();
    let mut pairs_by_gender: BTreeMap<Gender, Vec<SpeakerPair>> = BTreeMap::new();
    for (id, info) in &speakers {
        if info.group != Group::Dysarthric {
            continue;
        }
        match info.paired_control_id.as_deref() {
            Some(EXCLUDED_PAIR_MARK) => excluded_speakers.push(id.clone()),
            Some(control) => pairs_by_gender
                .entry(info.gender)
                .or_default()
                .push(SpeakerPair {
                    dysarthric: id.clone(),
                    control: control.to_string(),
                }),
            None => {
                return Err(Error::UnpairedSpeaker {
                    speaker: id.clone(),
                })
            }
        }
    }
    for pairs in pairs_by_gender.values_mut() {
        pairs.sort_by(|a, b| a.dysarthric.cmp(&b.dysarthric));
    }

    // The conversion source for a gender is the unique control named as
    // the source of that gender's converted rows.
    let mut conversion_pairs = Vec::new();
    for (&gender, pairs) in &pairs_by_gender {
        let sources: BTreeSet<&str> = m
            .records()
            .iter()
            .filter(|r| r.group == Group::Vc && r.gender == gender)
            .filter_map(|r| r.paired_control_id.as_deref())
            .collect();
        match sources.len() {
            0 => {}
            1 => {
                let source = sources.iter().next().expect("one source");
                let pair = pairs.iter().find(|p| p.control == *source).ok_or_else(|| {
                    Error::ConversionPairNotFound {
                        detail: format!(
                            "conversion source {source} ({gender}) is not the matched control \
                             of any dysarthric speaker"
                        ),
                    }
                })?;
                conversion_pairs.push(pair.clone());
            }
            _ => {
                return Err(Error::ConversionPairNotFound {
                    detail: format!(
                        "converted rows of gender {gender} name several source controls: {}",
                        sources.into_iter().collect::<Vec<_>>().join(", ")
                    ),
                })
            }
        }
    }

    let mut folds = Vec::new();
    for (&gender, pairs) in &pairs_by_gender {
        let conversion = conversion_pairs.iter().find(|p| {
            pairs.contains(p)
        });
        for pair in pairs {
            if Some(pair) == conversion {
                continue;
            }
            let train_pairs: Vec<SpeakerPair> =
                pairs.iter().filter(|p| *p != pair).cloned().collect();
            if train_pairs.len() < 2 {
                return Err(Error::InsufficientTraining {
                    fold: pair.dysarthric.clone(),
                    detail: format!(
                        "only {} training pair(s) of gender {gender} remain",
                        train_pairs.len()
                    ),
                });
            }
            folds.push(Fold {
                gender,
                held_out_pair: pair.clone(),
                train_pairs,
            });
        }
    }

    Ok(FoldPlan {
        folds,
        excluded_speakers,
        conversion_pairs,
    })
}

/// Per-speaker detection outcome for one sample kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEntry {
    pub speaker_id: String,
    pub kind: SampleKind,
    /// Fraction of this speaker's utterances classified correctly.
    pub accuracy_mean: f64,
    /// Spread of the per-utterance 0/1 correctness values.
    pub accuracy_std: f64,
    /// Mean raw model score (≥ 0.5 classifies as pathological).
    pub mean_score: f64,
    pub n_utterances: usize,
}

/// Pearson correlation between listener scores and detection scores of
/// converted speech, per gender and pooled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectiveCorrelations {
    pub pooled: MaybeCorrelation,
    pub male: MaybeCorrelation,
    pub female: MaybeCorrelation,
}

/// Detection results over all folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    /// Evaluated dysarthric speakers: one genuine-speech row each, plus a
    /// converted-speech row when conversions targeting them exist.
    pub per_speaker: Vec<DetectionEntry>,
    /// The matched controls' genuine-speech rows, kept separate so the
    /// dysarthric table stays one-row-per-speaker-per-kind.
    pub held_out_controls: Vec<DetectionEntry>,
    pub correlation_with_subjective: SubjectiveCorrelations,
}

/// A trained fold model, tagged by its held-out speaker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldModel {
    pub held_out_dysarthric: String,
    pub gender: Gender,
    pub model: LassoModel,
}

/// Full output of a detection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRun {
    pub report: DetectionReport,
    pub fold_models: Vec<FoldModel>,
    pub skipped: Vec<SkippedUtterance>,
}

/// Speech-band dB spectrum of one utterance after silence removal — the
/// detector's feature vector.
fn utterance_features(
    m: &Manifest,
    record: &UtteranceRecord,
    ltas_cfg: &LtasConfig,
    vad: &VadConfig,
) -> Result<(Vec<f64>, u32)> {
    let waveform = read_wav(&m.wav_path(record))?;
    let rate = waveform.sample_rate_hz;
    let trimmed = trim_silence(&waveform, vad)?;
    let ltas = compute_ltas(&trimmed, ltas_cfg)?.to_db()?;
    Ok((ltas.bins, rate))
}

/// Run leave-one-pair-out detection: train one sparse model per fold and
/// score the held-out pair's genuine utterances plus the conversions
/// targeting the held-out dysarthric speaker. Utterances whose audio fails
/// any pipeline stage are skipped and reported, not fatal.
pub fn run_detection(
    m: &Manifest,
    plan: &FoldPlan,
    ltas_cfg: &LtasConfig,
    lasso_cfg: &LassoConfig,
    vad: &VadConfig,
) -> Result<DetectionRun> {
    ltas_cfg.validate()?;
    lasso_cfg.validate()?;
    vad.validate()?;
    let speakers = m.speakers();

    let evaluated_dys: BTreeSet<&str> = plan
        .folds
        .iter()
        .map(|f| f.held_out_pair.dysarthric.as_str())
        .collect();
    let participants: BTreeSet<&str> = plan
        .folds
        .iter()
        .flat_map(|f| f.train_pairs.iter().chain(std::iter::once(&f.held_out_pair)))
        .flat_map(|p| [p.dysarthric.as_str(), p.control.as_str()])
        .collect();

    let mut needed: Vec<&UtteranceRecord> = m
        .records()
        .iter()
        .filter(|r| match r.group {
            Group::Vc => evaluated_dys.contains(r.speaker_id.as_str()),
            _ => participants.contains(r.speaker_id.as_str()),
        })
        .collect();
    // Canonical processing order: training matrices and outcome lists are
    // assembled from this sequence, and floating-point sums are not
    // associative, so results must not follow the manifest's row order.
    needed.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));

    let computed: Vec<(&UtteranceRecord, std::result::Result<(Vec<f64>, u32), String>)> = needed
        .par_iter()
        .map(|r| {
            (
                *r,
                utterance_features(m, r, ltas_cfg, vad).map_err(|e| e.to_string()),
            )
        })
        .collect();

    let mut skipped: Vec<SkippedUtterance> = Vec::new();
    let mut features: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut expected_rate: Option<u32> = None;
    for (record, outcome) in computed {
        match outcome {
            Ok((bins, rate)) => {
                let expected = *expected_rate.get_or_insert(rate);
                if rate != expected {
                    skipped.push(SkippedUtterance {
                        utterance_id: record.utterance_id.clone(),
                        reason: format!("sample rate {rate} differs from corpus rate {expected}"),
                    });
                } else {
                    features.insert(&record.utterance_id, bins);
                }
            }
            Err(reason) => skipped.push(SkippedUtterance {
                utterance_id: record.utterance_id.clone(),
                reason,
            }),
        }
    }

    // (speaker, kind) → per-utterance (score, correct) outcomes.
    let mut outcomes: BTreeMap<(String, SampleKind), Vec<(f64, bool)>> = BTreeMap::new();
    let mut fold_models = Vec::new();

    for fold in &plan.folds {
        let mut rows: Vec<&[f64]> = Vec::new();
        let mut labels: Vec<f64> = Vec::new();
        for pair in &fold.train_pairs {
            for (speaker, label) in [(&pair.dysarthric, 1.0), (&pair.control, 0.0)] {
                for r in &needed {
                    if r.speaker_id == *speaker && r.group != Group::Vc {
                        if let Some(f) = features.get(r.utterance_id.as_str()) {
                            rows.push(f);
                            labels.push(label);
                        }
                    }
                }
            }
        }
        let has_both_classes =
            labels.iter().any(|&l| l == 0.0) && labels.iter().any(|&l| l == 1.0);
        if rows.is_empty() || !has_both_classes {
            return Err(Error::InsufficientTraining {
                fold: fold.held_out_pair.dysarthric.clone(),
                detail: "training utterances do not cover both classes".to_string(),
            });
        }
        let dim = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        let x = Array2::from_shape_vec((rows.len(), dim), flat).map_err(|e| Error::Degenerate {
            detail: format!("training matrix shape: {e}"),
        })?;
        let model = lasso::fit(&x, &labels, lasso_cfg)?;

        for r in &needed {
            let held = &fold.held_out_pair;
            let relevant = match r.group {
                Group::Vc => r.speaker_id == held.dysarthric,
                _ => r.speaker_id == held.dysarthric || r.speaker_id == held.control,
            };
            if !relevant {
                continue;
            }
            let Some(f) = features.get(r.utterance_id.as_str()) else {
                continue;
            };
            let score = model.predict_one(f);
            let pathological = r.group != Group::Control;
            let correct = (score >= 0.5) == pathological;
            outcomes
                .entry((r.speaker_id.clone(), r.sample_kind()))
                .or_default()
                .push((score, correct));
        }

        fold_models.push(FoldModel {
            held_out_dysarthric: fold.held_out_pair.dysarthric.clone(),
            gender: fold.gender,
            model,
        });
    }

    let mut per_speaker = Vec::new();
    let mut held_out_controls = Vec::new();
    for ((speaker_id, kind), values) in &outcomes {
        let scores: Vec<f64> = values.iter().map(|(s, _)| *s).collect();
        let correctness: Vec<f64> = values
            .iter()
            .map(|(_, c)| if *c { 1.0 } else { 0.0 })
            .collect();
        let accuracy_mean = mean(&correctness);
        let entry = DetectionEntry {
            speaker_id: speaker_id.clone(),
            kind: *kind,
            accuracy_mean,
            accuracy_std: population_variance(&correctness).sqrt(),
            mean_score: mean(&scores),
            n_utterances: values.len(),
        };
        if speakers[speaker_id].group == Group::Control {
            held_out_controls.push(entry);
        } else {
            per_speaker.push(entry);
        }
    }

    let correlation_with_subjective = correlate_with_subjective(&per_speaker, m);

    Ok(DetectionRun {
        report: DetectionReport {
            per_speaker,
            held_out_controls,
            correlation_with_subjective,
        },
        fold_models,
        skipped,
    })
}

/// Pearson between listener scores and mean detection scores of the
/// converted rows, pooled and per gender. Fewer than three speakers with
/// listener scores (or a failed computation) yields `NotComputable`.
fn correlate_with_subjective(
    per_speaker: &[DetectionEntry],
    m: &Manifest,
) -> SubjectiveCorrelations {
    let speakers = m.speakers();
    let points: Vec<(Gender, f64, f64)> = per_speaker
        .iter()
        .filter(|e| e.kind == SampleKind::Vc)
        .filter_map(|e| {
            let info = &speakers[&e.speaker_id];
            info.mean_subjective_score()
                .map(|s| (info.gender, s, e.mean_score))
        })
        .collect();
    let compute = |selected: Vec<(f64, f64)>| -> MaybeCorrelation {
        if selected.len() < 3 {
            return MaybeCorrelation::NotComputable { n: selected.len() };
        }
        let (x, y): (Vec<f64>, Vec<f64>) = selected.into_iter().unzip();
        match pearson(&x, &y) {
            Ok(result) => MaybeCorrelation::Computed { result },
            Err(_) => MaybeCorrelation::NotComputable { n: x.len() },
        }
    };
    let subset = |gender: Option<Gender>| -> Vec<(f64, f64)> {
        points
            .iter()
            .filter(|(g, _, _)| gender.is_none_or(|want| *g == want))
            .map(|(_, s, d)| (*s, *d))
            .collect()
    };
    SubjectiveCorrelations {
        pooled: compute(subset(None)),
        male: compute(subset(Some(Gender::M))),
        female: compute(subset(Some(Gender::F))),
    }
}

/// Write the detection table CSV:
/// `speaker_id,kind,accuracy_mean,accuracy_std,mean_score,n_utterances`,
/// dysarthric and control rows together, sorted by speaker then kind.
pub fn write_report_csv(path: &std::path::Path, report: &DetectionReport) -> Result<()> {
    let io_err = |e: csv::Error| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    };
    let mut rows: Vec<&DetectionEntry> = report
        .per_speaker
        .iter()
        .chain(&report.held_out_controls)
        .collect();
    rows.sort_by(|a, b| (&a.speaker_id, a.kind).cmp(&(&b.speaker_id, b.kind)));
    let mut writer = csv::Writer::from_path(path).map_err(io_err)?;
    writer
        .write_record([
            "speaker_id",
            "kind",
            "accuracy_mean",
            "accuracy_std",
            "mean_score",
            "n_utterances",
        ])
        .map_err(io_err)?;
    for e in rows {
        writer
            .write_record([
                e.speaker_id.as_str(),
                e.kind.as_str(),
                &format!("{}", e.accuracy_mean),
                &format!("{}", e.accuracy_std),
                &format!("{}", e.mean_score),
                &format!("{}", e.n_utterances),
            ])
            .map_err(io_err)?;
    }
    writer.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

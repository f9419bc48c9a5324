//! Evaluation: metrics, sliced reports, zero-shot rank correlation.

mod fusion;
mod tau;

pub use fusion::{fuse_performances, fusion_experiment, FuseStatistic, FusionTable, PerformanceSet};
pub use tau::kendall_tau_c;

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::{read_psyt, stack_multimodal, FeatureTensor, Modality};
use crate::manifest::PieceRecord;
use crate::model::{ensemble_average, DifficultyModel, TaskKind};
use crate::ordinal::decode_ordinal;

/// Fraction of exact level matches.
pub fn accuracy(pred_levels: &[u32], true_levels: &[u32]) -> Result<f64> {
    check_lengths(pred_levels, true_levels)?;
    let hits = pred_levels
        .iter()
        .zip(true_levels)
        .filter(|(p, t)| p == t)
        .count();
    Ok(hits as f64 / pred_levels.len() as f64)
}

/// Mean squared difference between decoded levels.
pub fn level_mse(pred_levels: &[u32], true_levels: &[u32]) -> Result<f64> {
    check_lengths(pred_levels, true_levels)?;
    let sum: f64 = pred_levels
        .iter()
        .zip(true_levels)
        .map(|(&p, &t)| {
            let d = p as f64 - t as f64;
            d * d
        })
        .sum();
    Ok(sum / pred_levels.len() as f64)
}

fn check_lengths(a: &[u32], b: &[u32]) -> Result<()> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::Domain(format!(
            "need equal non-zero lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Mean of per-class count ratios against the majority class, over the
/// classes that actually occur. 1.0 means a balanced distribution.
pub fn average_imbalance_ratio(class_counts: &[usize]) -> Result<f64> {
    let max = *class_counts.iter().max().unwrap_or(&0);
    if max == 0 {
        return Err(Error::Domain("all class counts are zero".into()));
    }
    let non_empty: Vec<usize> = class_counts.iter().copied().filter(|&c| c > 0).collect();
    let sum: f64 = non_empty.iter().map(|&c| c as f64 / max as f64).sum();
    Ok(sum / non_empty.len() as f64)
}

/// Rank correlation between model predictions on one ordinal scale and
/// external grades on another; no grade remapping, tau-c compares relative
/// order only.
pub fn zero_shot_tau(pred_levels: &[u32], external_grades: &[i64]) -> Result<f64> {
    let preds: Vec<i64> = pred_levels.iter().map(|&p| p as i64).collect();
    kendall_tau_c(&preds, external_grades)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKey {
    Era,
    Gender,
    Composer,
}

impl std::str::FromStr for GroupKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "era" => Ok(GroupKey::Era),
            "gender" => Ok(GroupKey::Gender),
            "composer" => Ok(GroupKey::Composer),
            other => Err(Error::Domain(format!("unknown grouping key {other:?}"))),
        }
    }
}

/// One scored piece in an evaluation run.
#[derive(Debug, Clone, Serialize)]
pub struct PredictionRow {
    pub piece_id: String,
    pub true_level: u32,
    pub pred_level: u32,
    pub era: String,
    pub gender: String,
    pub composer: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupMetrics {
    pub n: usize,
    pub accuracy: Option<f64>,
    pub mse: Option<f64>,
    pub tau_c: Option<f64>,
}

/// Global and per-group evaluation metrics.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub modality: String,
    /// Whether MSE is computed on decoded levels (as here) or on the raw
    /// ordinal vectors; recorded so reported numbers are unambiguous.
    pub mse_space: &'static str,
    pub n: usize,
    pub accuracy: f64,
    pub mse: f64,
    pub tau_c: Option<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub groups: BTreeMap<String, GroupMetrics>,
}

impl EvalReport {
    /// Builds a report from scored rows, optionally sliced by a metadata key.
    pub fn from_rows(
        modality: impl Into<String>,
        rows: &[PredictionRow],
        grouping: Option<GroupKey>,
    ) -> Result<EvalReport> {
        if rows.is_empty() {
            return Err(Error::Domain("no rows to evaluate".into()));
        }
        let preds: Vec<u32> = rows.iter().map(|r| r.pred_level).collect();
        let trues: Vec<u32> = rows.iter().map(|r| r.true_level).collect();
        let acc = accuracy(&preds, &trues)?;
        let mse = level_mse(&preds, &trues)?;
        let tau = tau_of(&preds, &trues);

        let mut groups = BTreeMap::new();
        if let Some(key) = grouping {
            let mut by_group: BTreeMap<String, Vec<&PredictionRow>> = BTreeMap::new();
            for row in rows {
                let g = match key {
                    GroupKey::Era => row.era.clone(),
                    GroupKey::Gender => row.gender.clone(),
                    GroupKey::Composer => row.composer.clone(),
                };
                by_group.entry(g).or_default().push(row);
            }
            for (name, members) in by_group {
                let p: Vec<u32> = members.iter().map(|r| r.pred_level).collect();
                let t: Vec<u32> = members.iter().map(|r| r.true_level).collect();
                groups.insert(
                    name,
                    GroupMetrics {
                        n: members.len(),
                        accuracy: accuracy(&p, &t).ok(),
                        mse: level_mse(&p, &t).ok(),
                        tau_c: tau_of(&p, &t),
                    },
                );
            }
        }

        Ok(EvalReport {
            modality: modality.into(),
            mse_space: "decoded-levels",
            n: rows.len(),
            accuracy: acc,
            mse,
            tau_c: tau,
            groups,
        })
    }

    /// Renders the report as an aligned-column text table.
    pub fn render_text(&self) -> String {
        let fmt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.4}"),
            None => "  n/a".to_string(),
        };
        let mut out = String::new();
        out.push_str(&format!("Evaluation ({})\n", self.modality));
        out.push_str(&format!(
            "{:<24} {:>6} {:>9} {:>9} {:>9}\n",
            "group", "n", "Acc", "MSE", "tau_c"
        ));
        out.push_str(&format!(
            "{:<24} {:>6} {:>9} {:>9} {:>9}\n",
            "(all)",
            self.n,
            fmt(Some(self.accuracy)),
            fmt(Some(self.mse)),
            fmt(self.tau_c)
        ));
        for (name, g) in &self.groups {
            out.push_str(&format!(
                "{:<24} {:>6} {:>9} {:>9} {:>9}\n",
                name,
                g.n,
                fmt(g.accuracy),
                fmt(g.mse),
                fmt(g.tau_c)
            ));
        }
        out
    }
}

fn tau_of(preds: &[u32], trues: &[u32]) -> Option<f64> {
    let p: Vec<i64> = preds.iter().map(|&x| x as i64).collect();
    let t: Vec<i64> = trues.iter().map(|&x| x as i64).collect();
    kendall_tau_c(&p, &t).ok()
}

/// Model side of an evaluation run: one checkpoint, or the late-fusion
/// ensemble of a CQT and a PR checkpoint.
pub enum EvalModel {
    Single(DifficultyModel),
    Ensemble {
        cqt: Box<DifficultyModel>,
        pr: Box<DifficultyModel>,
    },
}

impl EvalModel {
    pub fn modality_tag(&self) -> String {
        match self {
            EvalModel::Single(m) => m.config().modality.name().to_string(),
            EvalModel::Ensemble { .. } => "ENSEMBLE".to_string(),
        }
    }

    /// Difficulty activations for one piece.
    pub fn activations(&self, features_dir: &Path, record: &PieceRecord) -> Result<Vec<f32>> {
        match self {
            EvalModel::Single(m) => {
                let x = load_features(features_dir, record, m.config().modality)?;
                let out = m.forward(&x)?;
                out.head_activations(&TaskKind::Difficulty)
            }
            EvalModel::Ensemble { cqt, pr } => {
                let xc = load_features(features_dir, record, Modality::Cqt)?;
                let xp = load_features(features_dir, record, Modality::PianoRoll)?;
                let yc = cqt.forward(&xc)?.head_activations(&TaskKind::Difficulty)?;
                let yp = pr.forward(&xp)?.head_activations(&TaskKind::Difficulty)?;
                ensemble_average(&yc, &yp)
            }
        }
    }
}

/// Conventional location of a piece's feature tensor.
pub fn feature_path(dir: &Path, piece_id: &str, modality: Modality) -> std::path::PathBuf {
    dir.join(format!(
        "{piece_id}.{}.psyt",
        modality.name().to_ascii_lowercase()
    ))
}

/// Loads the tensor a model of the given modality consumes. The MM stack is
/// assembled from the unimodal files when no precomputed MM tensor exists.
pub fn load_features(dir: &Path, record: &PieceRecord, modality: Modality) -> Result<FeatureTensor> {
    let path = feature_path(dir, &record.piece_id, modality);
    if path.exists() {
        return read_psyt(&path);
    }
    if modality == Modality::Multimodal {
        let cqt = read_psyt(feature_path(dir, &record.piece_id, Modality::Cqt))?;
        let pr = read_psyt(feature_path(dir, &record.piece_id, Modality::PianoRoll))?;
        return stack_multimodal(&cqt, &pr);
    }
    Err(Error::Domain(format!(
        "missing feature file {}",
        path.display()
    )))
}

/// Runs a model (or ensemble) over a test set and aggregates metrics,
/// optionally sliced by era, gender, or composer.
pub fn evaluate(
    model: &EvalModel,
    records: &[PieceRecord],
    features_dir: &Path,
    grouping: Option<GroupKey>,
) -> Result<EvalReport> {
    let mut rows = Vec::with_capacity(records.len());
    for record in records {
        let activations = model.activations(features_dir, record)?;
        let pred = decode_ordinal(&activations, 0.5)?;
        rows.push(PredictionRow {
            piece_id: record.piece_id.clone(),
            true_level: record.difficulty.get(),
            pred_level: pred.get(),
            era: record.era.name().to_string(),
            gender: record.gender.name().to_string(),
            composer: record.composer.clone(),
        });
    }
    EvalReport::from_rows(model.modality_tag(), &rows, grouping)
}

//! Dataset analysis and curation utilities.

mod curation;
mod toy;

pub use curation::{
    collect_answer_files, emit_prompt_files, filter_by_verdict, parse_validation_answer,
    render_validation_prompt, write_verdict_log, RelationVerdict, TitlePair, PROMPT_TEMPLATE,
};
pub use toy::{generate_toy_corpus, ToyCorpus};

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{average_imbalance_ratio, kendall_tau_c};
use crate::manifest::PieceRecord;

/// Tau-c between two ranking boards over their shared pieces, plus the
/// shared-piece count.
pub fn cross_ranking_correlation(
    manifest: &[PieceRecord],
    board_a: &str,
    board_b: &str,
) -> Result<(f64, usize)> {
    let shared: Vec<(i64, i64)> = manifest
        .iter()
        .filter_map(|r| {
            let a = r.aux_ranks.get(board_a)?;
            let b = r.aux_ranks.get(board_b)?;
            Some((*a as i64, *b as i64))
        })
        .collect();
    if shared.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "boards {board_a:?} and {board_b:?} share only {} pieces",
            shared.len()
        )));
    }
    let a: Vec<i64> = shared.iter().map(|s| s.0).collect();
    let b: Vec<i64> = shared.iter().map(|s| s.1).collect();
    let tau = kendall_tau_c(&a, &b)?;
    Ok((tau, shared.len()))
}

/// Exact counts of a manifest along its metadata axes.
#[derive(Debug, Clone, Serialize)]
pub struct DistributionReport {
    pub total: usize,
    /// Count per difficulty level, level -> count.
    pub by_level: BTreeMap<u32, usize>,
    pub by_era: BTreeMap<String, usize>,
    pub by_gender: BTreeMap<String, usize>,
    /// Composers above the share threshold; the long tail lands in "Others".
    pub by_composer: BTreeMap<String, usize>,
    pub air: f64,
}

impl DistributionReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("Pieces: {}   AIR: {:.3}\n", self.total, self.air));
        out.push_str("Level:\n");
        for (k, v) in &self.by_level {
            out.push_str(&format!("  {k:<24} {v:>6}\n"));
        }
        for (title, map) in [
            ("Era", &self.by_era),
            ("Gender", &self.by_gender),
            ("Composer", &self.by_composer),
        ] {
            out.push_str(&format!("{title}:\n"));
            for (k, v) in map {
                out.push_str(&format!("  {k:<24} {v:>6}\n"));
            }
        }
        out
    }
}

/// Counts pieces by level, era, gender, and composer. Composers whose share
/// of the manifest falls below `others_threshold` (a fraction, default 0.03)
/// are summarized under an "Others" bucket.
pub fn distribution_report(
    manifest: &[PieceRecord],
    others_threshold: f64,
) -> Result<DistributionReport> {
    if manifest.is_empty() {
        return Err(Error::Domain("empty manifest".into()));
    }
    let mut by_level: BTreeMap<u32, usize> = BTreeMap::new();
    let mut by_era: BTreeMap<String, usize> = BTreeMap::new();
    let mut by_gender: BTreeMap<String, usize> = BTreeMap::new();
    let mut composer_counts: BTreeMap<String, usize> = BTreeMap::new();

    for r in manifest {
        *by_level.entry(r.difficulty.get()).or_default() += 1;
        *by_era.entry(r.era.name().to_string()).or_default() += 1;
        *by_gender.entry(r.gender.name().to_string()).or_default() += 1;
        *composer_counts.entry(r.composer.clone()).or_default() += 1;
    }

    let cutoff = others_threshold * manifest.len() as f64;
    let mut by_composer: BTreeMap<String, usize> = BTreeMap::new();
    let mut others = 0usize;
    for (composer, count) in composer_counts {
        if (count as f64) < cutoff {
            others += count;
        } else {
            by_composer.insert(composer, count);
        }
    }
    if others > 0 {
        by_composer.insert("Others".to_string(), others);
    }

    let counts: Vec<usize> = by_level.values().copied().collect();
    let air = average_imbalance_ratio(&counts)?;

    Ok(DistributionReport {
        total: manifest.len(),
        by_level,
        by_era,
        by_gender,
        by_composer,
        air,
    })
}

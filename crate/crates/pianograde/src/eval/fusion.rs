//! Decision fusion over multiple performances of the same piece.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{accuracy, kendall_tau_c, level_mse};
use crate::ordinal::DifficultyLevel;

/// Decoded difficulty estimates for several performances of one piece.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerformanceSet {
    pub piece_id: String,
    pub ground_truth: DifficultyLevel,
    pub estimates: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FuseStatistic {
    Random,
    Mean,
    Median,
    Mode,
    Closest,
}

impl FuseStatistic {
    pub const ALL: [FuseStatistic; 5] = [
        FuseStatistic::Random,
        FuseStatistic::Mean,
        FuseStatistic::Median,
        FuseStatistic::Mode,
        FuseStatistic::Closest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FuseStatistic::Random => "random",
            FuseStatistic::Mean => "mean",
            FuseStatistic::Median => "median",
            FuseStatistic::Mode => "mode",
            FuseStatistic::Closest => "closest",
        }
    }
}

impl std::str::FromStr for FuseStatistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(FuseStatistic::Random),
            "mean" => Ok(FuseStatistic::Mean),
            "median" => Ok(FuseStatistic::Median),
            "mode" => Ok(FuseStatistic::Mode),
            "closest" => Ok(FuseStatistic::Closest),
            other => Err(Error::Domain(format!("unknown statistic {other:?}"))),
        }
    }
}

/// Collapses a set of per-performance estimates into one level.
///
/// Conventions: mean rounds half-up and clamps to `[1, num_classes]`;
/// median takes the lower middle for even sizes; mode and closest break
/// ties toward the smaller level; random draws uniformly with the seed.
pub fn fuse_performances(
    perf: &PerformanceSet,
    statistic: FuseStatistic,
    num_classes: usize,
    seed: u64,
) -> Result<DifficultyLevel> {
    if perf.estimates.is_empty() {
        return Err(Error::Domain(format!(
            "piece {:?} has no estimates",
            perf.piece_id
        )));
    }
    let level = match statistic {
        FuseStatistic::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            perf.estimates[rng.gen_range(0..perf.estimates.len())]
        }
        FuseStatistic::Mean => {
            let mean: f64 =
                perf.estimates.iter().map(|&e| e as f64).sum::<f64>() / perf.estimates.len() as f64;
            let rounded = (mean + 0.5).floor() as i64;
            rounded.clamp(1, num_classes as i64) as u32
        }
        FuseStatistic::Median => {
            let mut sorted = perf.estimates.clone();
            sorted.sort_unstable();
            sorted[(sorted.len() - 1) / 2]
        }
        FuseStatistic::Mode => {
            let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
            for &e in &perf.estimates {
                *counts.entry(e).or_default() += 1;
            }
            // BTreeMap iterates in ascending level order, so max_by_key on
            // the count keeps the smaller level on ties.
            counts
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(&level, _)| level)
                .unwrap()
        }
        FuseStatistic::Closest => {
            let gt = perf.ground_truth.get() as i64;
            *perf
                .estimates
                .iter()
                .min_by_key(|&&e| ((e as i64 - gt).abs(), e))
                .unwrap()
        }
    };
    DifficultyLevel::new(level, num_classes)
}

#[derive(Debug, Clone, Serialize)]
pub struct FusionCell {
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub mse_mean: f64,
    pub mse_std: f64,
    /// None when tau-c was undefined on every repetition (constant ranks).
    pub tau_c_mean: Option<f64>,
    pub tau_c_std: Option<f64>,
}

/// Aggregated fusion results: per statistic, mean and standard deviation of
/// Acc, MSE, and tau-c over the repetitions.
#[derive(Debug, Clone, Serialize)]
pub struct FusionTable {
    pub repetitions: usize,
    pub performances_per_piece: usize,
    pub pieces_evaluated: usize,
    pub pieces_skipped: usize,
    pub cells: BTreeMap<FuseStatistic, FusionCell>,
}

impl FusionTable {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "Fusion over {} repetitions, P = {} ({} pieces, {} skipped)\n",
            self.repetitions, self.performances_per_piece, self.pieces_evaluated, self.pieces_skipped
        ));
        out.push_str(&format!(
            "{:<10} {:>16} {:>16} {:>16}\n",
            "statistic", "Acc", "MSE", "tau_c"
        ));
        for (stat, cell) in &self.cells {
            let tau = match (cell.tau_c_mean, cell.tau_c_std) {
                (Some(m), Some(s)) => format!("{m:>7.3} ({s:.3})"),
                _ => format!("{:>7} (n/a)", "n/a"),
            };
            out.push_str(&format!(
                "{:<10} {:>7.3} ({:.3}) {:>7.3} ({:.3}) {}\n",
                stat.name(),
                cell.accuracy_mean,
                cell.accuracy_std,
                cell.mse_mean,
                cell.mse_std,
                tau
            ));
        }
        out
    }
}

/// Repeats the P-subset fusion experiment and aggregates per-statistic
/// metrics. Pieces with fewer than `subset_size` estimates are skipped and
/// counted. Deterministic given `seed`.
pub fn fusion_experiment(
    benchmark: &[PerformanceSet],
    subset_size: usize,
    repetitions: usize,
    num_classes: usize,
    seed: u64,
) -> Result<FusionTable> {
    let usable: Vec<&PerformanceSet> = benchmark
        .iter()
        .filter(|p| p.estimates.len() >= subset_size)
        .collect();
    let skipped = benchmark.len() - usable.len();
    if usable.is_empty() {
        return Err(Error::Domain(
            "no piece has enough performances for the requested subset size".into(),
        ));
    }

    let mut per_stat: BTreeMap<FuseStatistic, Vec<(f64, f64, Option<f64>)>> = BTreeMap::new();
    for rep in 0..repetitions {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (rep as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let trues: Vec<u32> = usable.iter().map(|p| p.ground_truth.get()).collect();
        let mut preds: BTreeMap<FuseStatistic, Vec<u32>> = BTreeMap::new();
        for perf in &usable {
            let mut idx: Vec<usize> = (0..perf.estimates.len()).collect();
            idx.shuffle(&mut rng);
            let subset = PerformanceSet {
                piece_id: perf.piece_id.clone(),
                ground_truth: perf.ground_truth,
                estimates: idx[..subset_size].iter().map(|&i| perf.estimates[i]).collect(),
            };
            let draw_seed = rng.gen::<u64>();
            for stat in FuseStatistic::ALL {
                let level = fuse_performances(&subset, stat, num_classes, draw_seed)?;
                preds.entry(stat).or_default().push(level.get());
            }
        }
        for (stat, p) in preds {
            let acc = accuracy(&p, &trues)?;
            let mse = level_mse(&p, &trues)?;
            let pi: Vec<i64> = p.iter().map(|&x| x as i64).collect();
            let ti: Vec<i64> = trues.iter().map(|&x| x as i64).collect();
            let tau = kendall_tau_c(&pi, &ti).ok();
            per_stat.entry(stat).or_default().push((acc, mse, tau));
        }
    }

    let cells = per_stat
        .into_iter()
        .map(|(stat, vals)| {
            let (acc, accs) = mean_std(vals.iter().map(|v| v.0));
            let (mse, mses) = mean_std(vals.iter().map(|v| v.1));
            let defined: Vec<f64> = vals.iter().filter_map(|v| v.2).collect();
            let (tau, taus) = if defined.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(defined.into_iter());
                (Some(m), Some(s))
            };
            (
                stat,
                FusionCell {
                    accuracy_mean: acc,
                    accuracy_std: accs,
                    mse_mean: mse,
                    mse_std: mses,
                    tau_c_mean: tau,
                    tau_c_std: taus,
                },
            )
        })
        .collect();

    Ok(FusionTable {
        repetitions,
        performances_per_piece: subset_size,
        pieces_evaluated: usable.len(),
        pieces_skipped: skipped,
        cells,
    })
}

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let values: Vec<f64> = values.collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(gt: u32, estimates: &[u32]) -> PerformanceSet {
        PerformanceSet {
            piece_id: "p".into(),
            ground_truth: DifficultyLevel::new(gt, 11).unwrap(),
            estimates: estimates.to_vec(),
        }
    }

    #[test]
    fn listed_example() {
        let p = set(5, &[3, 4, 4, 5, 9]);
        assert_eq!(fuse_performances(&p, FuseStatistic::Mean, 11, 0).unwrap().get(), 5);
        assert_eq!(fuse_performances(&p, FuseStatistic::Median, 11, 0).unwrap().get(), 4);
        assert_eq!(fuse_performances(&p, FuseStatistic::Mode, 11, 0).unwrap().get(), 4);
    }

    #[test]
    fn constant_estimates_fix_every_statistic() {
        let p = set(4, &[7, 7, 7]);
        for stat in FuseStatistic::ALL {
            assert_eq!(fuse_performances(&p, stat, 11, 3).unwrap().get(), 7);
        }
    }

    #[test]
    fn closest_picks_min_distance() {
        let p = set(6, &[3, 5, 9]);
        assert_eq!(
            fuse_performances(&p, FuseStatistic::Closest, 11, 0).unwrap().get(),
            5
        );
        // Tie at distance 1 -> smaller level.
        let p = set(6, &[5, 7]);
        assert_eq!(
            fuse_performances(&p, FuseStatistic::Closest, 11, 0).unwrap().get(),
            5
        );
    }

    #[test]
    fn mode_tie_breaks_toward_smaller() {
        let p = set(1, &[2, 2, 8, 8]);
        assert_eq!(fuse_performances(&p, FuseStatistic::Mode, 11, 0).unwrap().get(), 2);
    }

    #[test]
    fn mean_rounds_half_up_and_clamps() {
        let p = set(1, &[1, 2]); // mean 1.5 -> 2
        assert_eq!(fuse_performances(&p, FuseStatistic::Mean, 11, 0).unwrap().get(), 2);
        let p = set(1, &[11, 11, 11]);
        assert_eq!(fuse_performances(&p, FuseStatistic::Mean, 11, 0).unwrap().get(), 11);
    }

    #[test]
    fn median_takes_lower_middle() {
        let p = set(1, &[1, 2, 3, 4]);
        assert_eq!(fuse_performances(&p, FuseStatistic::Median, 11, 0).unwrap().get(), 2);
    }

    #[test]
    fn empty_estimates_error() {
        let p = set(1, &[]);
        assert!(fuse_performances(&p, FuseStatistic::Mean, 11, 0).is_err());
    }

    #[test]
    fn experiment_is_reproducible() {
        let bench: Vec<PerformanceSet> = (0..8)
            .map(|i| set(1 + i % 11, &[1 + i % 11, 2 + i % 9, 1 + (i * 3) % 11, 5, 6, 7]))
            .collect();
        let a = fusion_experiment(&bench, 5, 2, 11, 42).unwrap();
        let b = fusion_experiment(&bench, 5, 2, 11, 42).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn short_sets_are_skipped_with_count() {
        let bench = vec![set(3, &[3, 3, 3, 3, 3]), set(4, &[4, 4])];
        let table = fusion_experiment(&bench, 5, 1, 11, 7).unwrap();
        assert_eq!(table.pieces_evaluated, 1);
        assert_eq!(table.pieces_skipped, 1);
    }
}

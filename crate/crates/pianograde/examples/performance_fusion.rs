//! Decision fusion over several recordings of the same piece, plus the
//! repeated subset experiment comparing fusion statistics.
//!
//! Run with: `cargo run --example performance_fusion`

use pianograde::eval::{fuse_performances, fusion_experiment, FuseStatistic, PerformanceSet};
use pianograde::ordinal::{DifficultyLevel, PSYLLABUS_LEVELS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pianograde::Result<()> {
    let set = PerformanceSet {
        piece_id: "ballade-1".into(),
        ground_truth: DifficultyLevel::new(9, PSYLLABUS_LEVELS)?,
        estimates: vec![8, 9, 9, 11, 6, 9, 10],
    };
    println!(
        "estimates {:?} (ground truth {}):",
        set.estimates,
        set.ground_truth.get()
    );
    for stat in FuseStatistic::ALL {
        let fused = fuse_performances(&set, stat, PSYLLABUS_LEVELS, 42)?;
        println!("  {:<7} -> level {}", stat.name(), fused.get());
    }

    // A synthetic benchmark: each piece has 6-10 noisy estimates.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let benchmark: Vec<PerformanceSet> = (0..80)
        .map(|i| {
            let gt = rng.gen_range(1..=11u32);
            let estimates = (0..rng.gen_range(6..=10))
                .map(|_| (gt as i64 + rng.gen_range(-2..=2)).clamp(1, 11) as u32)
                .collect();
            PerformanceSet {
                piece_id: format!("piece{i}"),
                ground_truth: DifficultyLevel::new(gt, PSYLLABUS_LEVELS).unwrap(),
                estimates,
            }
        })
        .collect();

    let table = fusion_experiment(&benchmark, 5, 30, PSYLLABUS_LEVELS, 7)?;
    println!("\n5-performance subsets, 30 repetitions:");
    println!("{}", table.render_text());
    Ok(())
}

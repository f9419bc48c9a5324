//! Stratified 5-fold cross-validation splits.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::manifest::PieceRecord;

pub const NUM_FOLDS: usize = 5;

/// Disjoint train/validation/test piece-id sets of one fold.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FoldSplit {
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Deals pieces into 5 shards, stratified by difficulty so each shard sees a
/// comparable level distribution. Fold i tests on shard i, validates on shard
/// i+2, and trains on the remaining three (a 60/20/20 split up to rounding).
/// The validation offset of 2 keeps the oversized shards (the first n mod 5)
/// from pairing up in small manifests, so every partition stays within one
/// piece of its target size.
pub fn make_folds(records: &[PieceRecord], seed: u64) -> Result<Vec<FoldSplit>> {
    if records.len() < NUM_FOLDS {
        return Err(Error::Domain(format!(
            "cross-validation needs at least {NUM_FOLDS} pieces, got {}",
            records.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_level: BTreeMap<u32, Vec<&str>> = BTreeMap::new();
    for r in records {
        by_level
            .entry(r.difficulty.get())
            .or_default()
            .push(&r.piece_id);
    }
    // Deal round-robin with the counter carried across levels, so shard sizes
    // stay within one piece of each other globally, not just per level.
    let mut shards: Vec<Vec<String>> = vec![Vec::new(); NUM_FOLDS];
    let mut cursor = 0usize;
    for ids in by_level.values_mut() {
        ids.sort_unstable(); // input-order independence before shuffling
        ids.shuffle(&mut rng);
        for id in ids.iter() {
            shards[cursor % NUM_FOLDS].push(id.to_string());
            cursor += 1;
        }
    }
    let folds = (0..NUM_FOLDS)
        .map(|i| {
            let val = (i + 2) % NUM_FOLDS;
            let mut train_ids = Vec::new();
            for (s, shard) in shards.iter().enumerate() {
                if s != i && s != val {
                    train_ids.extend(shard.iter().cloned());
                }
            }
            FoldSplit {
                train_ids,
                val_ids: shards[val].clone(),
                test_ids: shards[i].clone(),
            }
        })
        .collect();
    Ok(folds)
}

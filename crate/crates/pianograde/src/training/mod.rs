//! The optimization loop: mini-batches of complete pieces, validation-driven
//! early stopping, and best-checkpoint tracking.

mod folds;
mod loss;
mod optim;

pub use folds::{make_folds, FoldSplit, NUM_FOLDS};
pub use loss::{multitask_loss, ordinal_mse_loss, ordinal_mse_loss_t, TaskLabels};
pub use optim::Adam;

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{accuracy, level_mse, load_features};
use crate::features::FeatureTensor;
use crate::manifest::PieceRecord;
use crate::model::{DifficultyModel, TaskKind};
use crate::ordinal::decode_ordinal;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Global L2 norm ceiling for gradients.
    pub grad_clip: f64,
    pub weight_decay: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    /// Per-task loss weights by task name (`difficulty`, `era`, `composer`,
    /// `aux_rank:<board>`); unnamed tasks default to 1.0.
    pub task_weights: BTreeMap<String, f64>,
    pub seed: u64,
    /// Which cross-validation fold this run trains, in [0, 4].
    pub fold: usize,
    /// When true, patience only resets when accuracy *and* MSE both improve;
    /// the default resets on either.
    pub strict_both_improve: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            learning_rate: 1e-3,
            grad_clip: 1e-4,
            weight_decay: 1e-4,
            patience: 50,
            max_epochs: 1000,
            task_weights: BTreeMap::new(),
            seed: 0,
            fold: 0,
            strict_both_improve: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience < 1 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.max_epochs < 1 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if self.task_weights.values().any(|&w| !(w >= 0.0)) {
            return Err(Error::Config("task weights must be non-negative".into()));
        }
        if self.fold >= NUM_FOLDS {
            return Err(Error::Config(format!(
                "fold {} outside [0, {}]",
                self.fold,
                NUM_FOLDS - 1
            )));
        }
        Ok(())
    }

    /// Task weights keyed by parsed task, for the loss.
    pub fn parsed_weights(&self) -> Result<BTreeMap<TaskKind, f64>> {
        self.task_weights
            .iter()
            .map(|(name, &w)| Ok((parse_task_name(name)?, w)))
            .collect()
    }
}

/// Parses a task name as used in configuration files.
pub fn parse_task_name(name: &str) -> Result<TaskKind> {
    match name {
        "difficulty" => Ok(TaskKind::Difficulty),
        "era" => Ok(TaskKind::Era),
        "composer" => Ok(TaskKind::Composer),
        other => match other.strip_prefix("aux_rank:") {
            Some(board) if !board.is_empty() => Ok(TaskKind::AuxRank(board.to_string())),
            _ => Err(Error::Config(format!("unknown task name {name:?}"))),
        },
    }
}

/// One training sample: precomputed features plus per-task labels.
#[derive(Debug, Clone)]
pub struct TrainItem {
    pub piece_id: String,
    pub features: FeatureTensor,
    pub targets: TaskLabels,
}

/// Builds training samples for the given piece ids from a manifest and a
/// directory of precomputed feature tensors. `composers` maps composer names
/// to categorical indices; pass an empty map when no composer head is used.
pub fn items_from_records(
    records: &[PieceRecord],
    ids: &[String],
    features_dir: &Path,
    modality: crate::features::Modality,
    composers: &BTreeMap<String, u32>,
) -> Result<Vec<TrainItem>> {
    let by_id: BTreeMap<&str, &PieceRecord> =
        records.iter().map(|r| (r.piece_id.as_str(), r)).collect();
    let mut items = Vec::with_capacity(ids.len());
    for id in ids {
        let record = by_id
            .get(id.as_str())
            .ok_or_else(|| Error::Domain(format!("piece {id} is not in the manifest")))?;
        let features = load_features(features_dir, record, modality)?;
        let mut targets = TaskLabels::new();
        targets.insert(TaskKind::Difficulty, record.difficulty.get());
        targets.insert(TaskKind::Era, record.era.level().get());
        if let Some(&idx) = composers.get(&record.composer) {
            targets.insert(TaskKind::Composer, idx);
        }
        for (board, &rank) in &record.aux_ranks {
            targets.insert(TaskKind::AuxRank(board.clone()), rank);
        }
        items.push(TrainItem {
            piece_id: id.clone(),
            features,
            targets,
        });
    }
    Ok(items)
}

/// Patience bookkeeping over the two monitored validation metrics.
pub struct EarlyStopper {
    patience: usize,
    strict_both: bool,
    best_acc: f64,
    best_mse: f64,
    since_improvement: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize, strict_both: bool) -> Self {
        EarlyStopper {
            patience,
            strict_both,
            best_acc: f64::NEG_INFINITY,
            best_mse: f64::INFINITY,
            since_improvement: 0,
        }
    }

    /// Records one epoch's validation metrics; returns true when training
    /// should stop.
    pub fn observe(&mut self, val_acc: f64, val_mse: f64) -> bool {
        let acc_up = val_acc > self.best_acc;
        let mse_down = val_mse < self.best_mse;
        self.best_acc = self.best_acc.max(val_acc);
        self.best_mse = self.best_mse.min(val_mse);
        let improved = if self.strict_both {
            acc_up && mse_down
        } else {
            acc_up || mse_down
        };
        if improved {
            self.since_improvement = 0;
        } else {
            self.since_improvement += 1;
        }
        self.since_improvement >= self.patience
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters the model holds on return (best validation MSE).
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub best_val_acc: f64,
    pub stopped_early: bool,
}

/// Decoded difficulty levels in eval mode, batched.
pub fn predict_levels(
    model: &DifficultyModel,
    items: &[TrainItem],
    batch_size: usize,
) -> Result<Vec<u32>> {
    let head = model.head_index(&TaskKind::Difficulty)?;
    let mut levels = Vec::with_capacity(items.len());
    for chunk in items.chunks(batch_size) {
        let xs: Vec<&FeatureTensor> = chunk.iter().map(|i| &i.features).collect();
        let out = model.forward_batch(&xs, None)?;
        let act = out.heads[head].1.to_vec2::<f32>()?;
        for row in act {
            levels.push(decode_ordinal(&row, 0.5)?.get());
        }
    }
    Ok(levels)
}

fn difficulty_targets(items: &[TrainItem]) -> Vec<u32> {
    items
        .iter()
        .map(|i| *i.targets.get(&TaskKind::Difficulty).unwrap_or(&1))
        .collect()
}

/// Trains the model in place. Parameters end at the epoch with the best
/// validation MSE; the per-epoch log is returned for inspection or CSV dump.
pub fn train(
    model: &DifficultyModel,
    train_items: &[TrainItem],
    val_items: &[TrainItem],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if train_items.is_empty() {
        return Err(Error::Domain("empty train split".into()));
    }
    if val_items.is_empty() {
        return Err(Error::Domain("empty validation split".into()));
    }
    let weights = cfg.parsed_weights()?;
    let vars = model.trainable_vars();
    let mut opt = Adam::new(&vars, cfg.learning_rate, cfg.weight_decay)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stopper = EarlyStopper::new(cfg.patience, cfg.strict_both_improve);

    let val_truth = difficulty_targets(val_items);
    let difficulty_head = model.head_index(&TaskKind::Difficulty)?;

    let mut epochs = Vec::new();
    let mut best_epoch = 0usize;
    let mut best_val_mse = f64::INFINITY;
    let mut best_val_acc = 0.0;
    let mut best_params: Option<Vec<candle_core::Tensor>> = None;
    let mut stopped_early = false;

    let mut order: Vec<usize> = (0..train_items.len()).collect();
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0f64;
        let mut batches = 0usize;
        // Training accuracy is decoded from the same forward passes that
        // produce the loss (dropout active), avoiding a second sweep.
        let mut train_pred = Vec::with_capacity(train_items.len());
        let mut train_true = Vec::with_capacity(train_items.len());
        for batch_idx in order.chunks(cfg.batch_size) {
            let xs: Vec<&FeatureTensor> =
                batch_idx.iter().map(|&i| &train_items[i].features).collect();
            let targets: Vec<TaskLabels> =
                batch_idx.iter().map(|&i| train_items[i].targets.clone()).collect();
            let out = model.forward_batch(&xs, Some(&mut rng))?;
            let loss = multitask_loss(&out, &targets, &weights)?;
            let loss_val = loss.to_scalar::<f32>()? as f64;
            if !loss_val.is_finite() {
                return Err(Error::Domain(format!(
                    "non-finite loss {loss_val} at epoch {epoch}, batch {batches} \
                     (pieces {:?})",
                    batch_idx
                        .iter()
                        .map(|&i| train_items[i].piece_id.as_str())
                        .collect::<Vec<_>>()
                )));
            }
            let act = out.heads[difficulty_head].1.to_vec2::<f32>()?;
            for (row, &i) in batch_idx.iter().enumerate() {
                train_pred.push(decode_ordinal(&act[row], 0.5)?.get());
                train_true.push(train_items[i].targets[&TaskKind::Difficulty]);
            }
            let grads = loss.backward()?;
            opt.step(&vars, &grads, cfg.grad_clip)?;
            loss_sum += loss_val;
            batches += 1;
        }

        let val_pred = predict_levels(model, val_items, cfg.batch_size)?;
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / batches as f64,
            train_acc: accuracy(&train_pred, &train_true)?,
            val_acc: accuracy(&val_pred, &val_truth)?,
            val_mse: level_mse(&val_pred, &val_truth)?,
        };
        if stats.val_mse < best_val_mse {
            best_val_mse = stats.val_mse;
            best_val_acc = stats.val_acc;
            best_epoch = epoch;
            best_params = Some(
                model
                    .named_params()
                    .iter()
                    .map(|p| p.var.as_tensor().copy())
                    .collect::<candle_core::Result<_>>()?,
            );
        }
        let stop = stopper.observe(stats.val_acc, stats.val_mse);
        epochs.push(stats);
        if stop {
            stopped_early = true;
            break;
        }
    }

    if let Some(params) = best_params {
        for (entry, tensor) in model.named_params().iter().zip(&params) {
            entry.var.set(tensor)?;
        }
    }
    Ok(TrainReport {
        epochs,
        best_epoch,
        best_val_mse,
        best_val_acc,
        stopped_early,
    })
}

/// Writes the per-epoch log as CSV.
pub fn write_epoch_log(path: impl AsRef<Path>, report: &TrainReport) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| {
        Error::io(path, std::io::Error::new(std::io::ErrorKind::Other, e.to_string()))
    })?;
    for stats in &report.epochs {
        w.serialize(stats)
            .map_err(|e| Error::Format(format!("epoch log write failed: {e}")))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

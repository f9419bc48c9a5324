//! Generates a small synthetic corpus, trains a piano-roll model on one
//! cross-validation fold for a few epochs, and scores the held-out shard.
//!
//! Run with: `cargo run --example toy_training`

use std::collections::BTreeMap;

use pianograde::dataset::generate_toy_corpus;
use pianograde::features::Modality;
use pianograde::model::{DifficultyModel, HeadKind, HeadSpec, ModelConfig, TaskKind};
use pianograde::training::{items_from_records, make_folds, predict_levels, train, TrainConfig};

fn main() -> pianograde::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let corpus = generate_toy_corpus(30, 3, 7, dir.path())?;
    println!(
        "generated {} pieces over 3 difficulty levels in {}",
        corpus.records.len(),
        dir.path().display()
    );

    let folds = make_folds(&corpus.records, 7)?;
    let fold = &folds[0];
    println!(
        "fold 0: {} train / {} val / {} test",
        fold.train_ids.len(),
        fold.val_ids.len(),
        fold.test_ids.len()
    );

    let composers = BTreeMap::new();
    let load = |ids: &[String]| {
        items_from_records(
            &corpus.records,
            ids,
            &corpus.features_dir,
            Modality::PianoRoll,
            &composers,
        )
    };
    let train_items = load(&fold.train_ids)?;
    let val_items = load(&fold.val_ids)?;
    let test_items = load(&fold.test_ids)?;

    let mut config = ModelConfig::difficulty(Modality::PianoRoll);
    config.heads = vec![HeadSpec {
        task: TaskKind::Difficulty,
        kind: HeadKind::Ordinal,
        num_classes: 3,
    }];
    let model = DifficultyModel::new(config, 0)?;

    let cfg = TrainConfig {
        max_epochs: 25,
        ..TrainConfig::default()
    };
    let report = train(&model, &train_items, &val_items, &cfg)?;
    for stats in report.epochs.iter().step_by(5) {
        println!(
            "epoch {:>3}: loss {:.4}  train acc {:.2}  val acc {:.2}  val mse {:.3}",
            stats.epoch, stats.train_loss, stats.train_acc, stats.val_acc, stats.val_mse
        );
    }
    println!(
        "best epoch {} (val mse {:.3}); model restored to those weights",
        report.best_epoch, report.best_val_mse
    );

    let preds = predict_levels(&model, &test_items, cfg.batch_size)?;
    let hits = preds
        .iter()
        .zip(&test_items)
        .filter(|(p, item)| **p == item.targets[&TaskKind::Difficulty])
        .count();
    println!("test shard: {hits}/{} exact level matches", preds.len());
    Ok(())
}

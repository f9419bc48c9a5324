//! End-to-end acceptance suite. Each test covers one release criterion and
//! prints a single `criterion NN (...): pass` line (visible with
//! `cargo test --test acceptance -- --nocapture`); a failed criterion prints
//! a `FAIL` line with the reason and fails the test.

use std::collections::BTreeMap;

use candle_core::{Device, Var};
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pianograde::dataset::{
    filter_by_verdict, generate_toy_corpus, parse_validation_answer, render_validation_prompt,
    RelationVerdict, TitlePair,
};
use pianograde::eval::{
    average_imbalance_ratio, evaluate, fuse_performances, fusion_experiment, kendall_tau_c,
    EvalModel, FuseStatistic, PerformanceSet,
};
use pianograde::features::{
    compute_cqt, subsample_to_5fps, CqtParams, FeatureTensor, Modality, TARGET_FPS,
};
use pianograde::manifest::{Era, Gender, PieceRecord};
use pianograde::model::{
    ensemble_average, load_checkpoint, save_checkpoint, DifficultyModel, HeadKind, HeadSpec,
    ModelConfig, TaskKind,
};
use pianograde::ordinal::{decode_ordinal, encode_ordinal, DifficultyLevel};
use pianograde::training::{
    items_from_records, make_folds, ordinal_mse_loss_t, predict_levels, train, TrainConfig,
    NUM_FOLDS,
};

/// Runs a criterion body and prints its verdict line.
fn check(name: &str, body: impl FnOnce() -> Result<(), String>) {
    match body() {
        Ok(()) => println!("criterion {name}: pass"),
        Err(msg) => {
            println!("criterion {name}: FAIL - {msg}");
            panic!("criterion {name} failed: {msg}");
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// A minimal manifest record for split and curation tests.
fn synthetic_record(i: usize, level: u32, num_classes: usize) -> PieceRecord {
    PieceRecord {
        piece_id: format!("piece{i:05}"),
        difficulty: DifficultyLevel::new(level, num_classes).unwrap(),
        composer: format!("Composer {}", i % 7),
        era: Era::ALL[i % Era::ALL.len()],
        gender: Gender::Unknown,
        aux_ranks: BTreeMap::new(),
        audio_path: None,
        cqt_path: None,
        midi_path: None,
    }
}

#[test]
fn criterion_01_ordinal_round_trip() {
    check("01 (ordinal round trip)", || {
        for num_classes in [2usize, 5, 7, 11] {
            for level in 1..=num_classes as u32 {
                let l = DifficultyLevel::new(level, num_classes).map_err(err)?;
                let encoded = encode_ordinal(l, num_classes).map_err(err)?;
                let decoded = decode_ordinal(&encoded.as_f32(), 0.5).map_err(err)?;
                ensure!(
                    decoded.get() == level,
                    "C={num_classes}: decode(encode({level})) = {}",
                    decoded.get()
                );
            }
        }
        Ok(())
    });
}

/// Independent tau-c: O(n^2) pair counting with m = min(#distinct a, #distinct b).
fn tau_c_brute_force(a: &[i64], b: &[i64]) -> f64 {
    let n = a.len();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let da = a[i] - a[j];
            let db = b[i] - b[j];
            if da * db > 0 {
                concordant += 1;
            } else if da * db < 0 {
                discordant += 1;
            }
        }
    }
    // Every unordered pair was visited twice.
    let (c, d) = (concordant / 2, discordant / 2);
    let distinct = |v: &[i64]| {
        let mut s = v.to_vec();
        s.sort_unstable();
        s.dedup();
        s.len()
    };
    let m = distinct(a).min(distinct(b)) as f64;
    2.0 * m * (c - d) as f64 / ((n * n) as f64 * (m - 1.0))
}

#[test]
fn criterion_02_kendall_tau_c_oracle() {
    check("02 (Kendall tau-c oracle)", || {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut tested = 0usize;
        while tested < 100 {
            let n = rng.gen_range(2..=200);
            let a: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=11)).collect();
            let b: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=11)).collect();
            let distinct = |v: &[i64]| {
                let mut s = v.to_vec();
                s.sort_unstable();
                s.dedup();
                s.len()
            };
            if distinct(&a) < 2 || distinct(&b) < 2 {
                continue; // constant ranking: correlation undefined by contract
            }
            let got = kendall_tau_c(&a, &b).map_err(err)?;
            let want = tau_c_brute_force(&a, &b);
            ensure!(
                (got - want).abs() < 1e-9,
                "ranking {tested} (n={n}): {got} vs brute force {want}"
            );
            tested += 1;
        }

        let asc: Vec<i64> = (1..=50).collect();
        let desc: Vec<i64> = (1..=50).rev().collect();
        let perfect = kendall_tau_c(&asc, &asc).map_err(err)?;
        let reversed = kendall_tau_c(&asc, &desc).map_err(err)?;
        ensure!(perfect == 1.0, "tie-free perfect concordance gave {perfect}");
        ensure!(reversed == -1.0, "tie-free perfect discordance gave {reversed}");
        Ok(())
    });
}

/// Ordinal MSE recomputed in f64 for the finite-difference oracle; keeping
/// the perturbation arithmetic in f64 avoids drowning the h=1e-5 signal in
/// f32 rounding noise.
fn mse_f64(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64
}

#[test]
fn criterion_03_loss_gradient_check() {
    check("03 (loss gradient vs finite differences)", || {
        let dev = Device::Cpu;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let num_classes = 11;
        for case in 0..50 {
            let pred: Vec<f32> = (0..num_classes).map(|_| rng.gen_range(0.0..1.0)).collect();
            let level = rng.gen_range(1..=num_classes as u32);
            let target = encode_ordinal(
                DifficultyLevel::new(level, num_classes).map_err(err)?,
                num_classes,
            )
            .map_err(err)?
            .as_f32();

            let var = Var::from_vec(pred.clone(), num_classes, &dev).map_err(err)?;
            let target_t =
                candle_core::Tensor::from_vec(target.clone(), num_classes, &dev).map_err(err)?;
            let loss = ordinal_mse_loss_t(var.as_tensor(), &target_t).map_err(err)?;
            let grads = loss.backward().map_err(err)?;
            let analytic: Vec<f32> = grads
                .get(var.as_tensor())
                .ok_or_else(|| "no gradient recorded for the prediction".to_string())?
                .to_vec1::<f32>()
                .map_err(err)?;

            let p64: Vec<f64> = pred.iter().map(|&v| v as f64).collect();
            let t64: Vec<f64> = target.iter().map(|&v| v as f64).collect();
            let h = 1e-5;
            let fd: Vec<f64> = (0..num_classes)
                .map(|i| {
                    let mut plus = p64.clone();
                    let mut minus = p64.clone();
                    plus[i] += h;
                    minus[i] -= h;
                    (mse_f64(&plus, &t64) - mse_f64(&minus, &t64)) / (2.0 * h)
                })
                .collect();

            let diff_sq: f64 = analytic
                .iter()
                .zip(&fd)
                .map(|(&a, &f)| (a as f64 - f).powi(2))
                .sum();
            let fd_sq: f64 = fd.iter().map(|f| f * f).sum();
            let rel = (diff_sq / fd_sq).sqrt();
            ensure!(
                rel < 1e-4,
                "case {case} (level {level}): relative gradient error {rel:.3e}"
            );
        }
        Ok(())
    });
}

#[test]
fn criterion_04_shape_contract() {
    check("04 (forward shape contract)", || {
        for (channels, modality) in [
            (1usize, Modality::Cqt),
            (2, Modality::PianoRoll),
            (3, Modality::Multimodal),
        ] {
            let mut config = ModelConfig::difficulty(modality);
            config.heads.push(HeadSpec::era());
            let model = DifficultyModel::new(config, 0).map_err(err)?;
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            for t in [20usize, 50, 333] {
                let data = Array3::from_shape_fn((88, t, channels), |_| rng.gen_range(0.0..1.0));
                let x = FeatureTensor::new(data, TARGET_FPS, modality).map_err(err)?;
                let out = model.forward(&x).map_err(err)?;

                for (task, want_len) in [(TaskKind::Difficulty, 11usize), (TaskKind::Era, 5)] {
                    let act = out.head_activations(&task).map_err(err)?;
                    ensure!(
                        act.len() == want_len,
                        "c={channels} t={t}: {:?} head has {} values, want {want_len}",
                        task,
                        act.len()
                    );
                    ensure!(
                        act.iter().all(|&a| (0.0..=1.0).contains(&a)),
                        "c={channels} t={t}: {:?} activations leave [0, 1]: {act:?}",
                        task
                    );
                }

                ensure!(
                    out.attention_weights.len() == 4,
                    "c={channels} t={t}: {} attention heads, want 4",
                    out.attention_weights.len()
                );
                for (head, weights) in out.attention_weights.iter().enumerate() {
                    ensure!(
                        weights.len() == t / 8,
                        "c={channels} t={t}: attention head {head} covers {} frames, want {}",
                        weights.len(),
                        t / 8
                    );
                    let sum: f32 = weights.iter().sum();
                    ensure!(
                        (sum - 1.0).abs() < 1e-6,
                        "c={channels} t={t}: attention head {head} weights sum to {sum}"
                    );
                }
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_05_toy_set_learnability() {
    check("05 (toy-set learnability)", || {
        let dir = tempfile::tempdir().map_err(err)?;
        let corpus = generate_toy_corpus(60, 3, 11, dir.path()).map_err(err)?;
        let folds = make_folds(&corpus.records, 11).map_err(err)?;
        let fold = &folds[0];

        let no_composers = BTreeMap::new();
        let train_items = items_from_records(
            &corpus.records,
            &fold.train_ids,
            &corpus.features_dir,
            Modality::PianoRoll,
            &no_composers,
        )
        .map_err(err)?;
        let val_items = items_from_records(
            &corpus.records,
            &fold.val_ids,
            &corpus.features_dir,
            Modality::PianoRoll,
            &no_composers,
        )
        .map_err(err)?;

        let mut config = ModelConfig::difficulty(Modality::PianoRoll);
        config.heads = vec![HeadSpec {
            task: TaskKind::Difficulty,
            kind: HeadKind::Ordinal,
            num_classes: 3,
        }];
        let model = DifficultyModel::new(config, 5).map_err(err)?;

        let cfg = TrainConfig {
            max_epochs: 200,
            ..TrainConfig::default()
        };
        let report = train(&model, &train_items, &val_items, &cfg).map_err(err)?;

        let best_train_acc = report
            .epochs
            .iter()
            .map(|e| e.train_acc)
            .fold(0.0f64, f64::max);
        ensure!(
            best_train_acc >= 0.9,
            "training accuracy peaked at {best_train_acc:.3} within {} epochs",
            report.epochs.len()
        );

        let val_preds = predict_levels(&model, &val_items, cfg.batch_size).map_err(err)?;
        let pred_i: Vec<i64> = val_preds.iter().map(|&p| p as i64).collect();
        let true_i: Vec<i64> = val_items
            .iter()
            .map(|i| i.targets[&TaskKind::Difficulty] as i64)
            .collect();
        let tau = kendall_tau_c(&pred_i, &true_i).map_err(err)?;
        ensure!(
            tau >= 0.8,
            "validation tau-c {tau:.3} after {} epochs (best epoch {})",
            report.epochs.len(),
            report.best_epoch
        );
        Ok(())
    });
}

#[test]
fn criterion_06_ensemble_identity() {
    check("06 (ensemble identity)", || {
        let dir = tempfile::tempdir().map_err(err)?;
        let corpus = generate_toy_corpus(15, 3, 6, dir.path()).map_err(err)?;
        let folds = make_folds(&corpus.records, 6).map_err(err)?;
        let test_records: Vec<PieceRecord> = corpus
            .records
            .iter()
            .filter(|r| folds[0].test_ids.contains(&r.piece_id))
            .cloned()
            .collect();

        let mut config = ModelConfig::difficulty(Modality::PianoRoll);
        config.heads = vec![HeadSpec {
            task: TaskKind::Difficulty,
            kind: HeadKind::Ordinal,
            num_classes: 3,
        }];
        let model = DifficultyModel::new(config, 9).map_err(err)?;

        let ckpt_a = dir.path().join("a.ckpt");
        let ckpt_b = dir.path().join("b.ckpt");
        save_checkpoint(&ckpt_a, &model).map_err(err)?;
        save_checkpoint(&ckpt_b, &model).map_err(err)?;
        let loaded_a = EvalModel::Single(load_checkpoint(&ckpt_a).map_err(err)?);
        let loaded_b = EvalModel::Single(load_checkpoint(&ckpt_b).map_err(err)?);

        for record in &test_records {
            let ya = loaded_a
                .activations(&corpus.features_dir, record)
                .map_err(err)?;
            let yb = loaded_b
                .activations(&corpus.features_dir, record)
                .map_err(err)?;
            let fused = ensemble_average(&ya, &yb).map_err(err)?;
            for (i, (f, a)) in fused.iter().zip(&ya).enumerate() {
                ensure!(
                    f.to_bits() == a.to_bits(),
                    "piece {}: fused activation {i} is {f:?}, single model gave {a:?}",
                    record.piece_id
                );
            }
            let decoded_fused = decode_ordinal(&fused, 0.5).map_err(err)?;
            let decoded_single = decode_ordinal(&ya, 0.5).map_err(err)?;
            ensure!(
                decoded_fused.get() == decoded_single.get(),
                "piece {}: fused level {} vs single level {}",
                record.piece_id,
                decoded_fused.get(),
                decoded_single.get()
            );
        }

        let report_a = evaluate(&loaded_a, &test_records, &corpus.features_dir, None).map_err(err)?;
        let report_b = evaluate(&loaded_b, &test_records, &corpus.features_dir, None).map_err(err)?;
        ensure!(
            report_a.accuracy.to_bits() == report_b.accuracy.to_bits()
                && report_a.mse.to_bits() == report_b.mse.to_bits(),
            "checkpoint copies disagree: acc {} vs {}, mse {} vs {}",
            report_a.accuracy,
            report_b.accuracy,
            report_a.mse,
            report_b.mse
        );
        Ok(())
    });
}

#[test]
fn criterion_07_fusion_dominance_and_reproducibility() {
    check("07 (fusion dominance, reproducible experiment)", || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let num_classes = 11;
        let mut sets = Vec::with_capacity(500);
        for i in 0..500 {
            let gt = rng.gen_range(1..=11u32);
            let count = rng.gen_range(1..=8usize);
            let estimates: Vec<u32> = (0..count)
                .map(|_| (gt as i64 + rng.gen_range(-3..=3i64)).clamp(1, 11) as u32)
                .collect();
            sets.push(PerformanceSet {
                piece_id: format!("set{i}"),
                ground_truth: DifficultyLevel::new(gt, num_classes).unwrap(),
                estimates,
            });
        }
        for set in &sets {
            let gt = set.ground_truth.get() as i64;
            let dist = |stat: FuseStatistic| -> Result<i64, String> {
                let level = fuse_performances(set, stat, num_classes, 0).map_err(err)?;
                Ok((level.get() as i64 - gt).abs())
            };
            let closest = dist(FuseStatistic::Closest)?;
            let median = dist(FuseStatistic::Median)?;
            let mode = dist(FuseStatistic::Mode)?;
            ensure!(
                closest <= median && closest <= mode,
                "{}: |closest-gt|={closest} vs median {median}, mode {mode}",
                set.piece_id
            );
        }

        let benchmark: Vec<PerformanceSet> = (0..40)
            .map(|i| {
                let gt = rng.gen_range(1..=11u32);
                PerformanceSet {
                    piece_id: format!("bench{i}"),
                    ground_truth: DifficultyLevel::new(gt, num_classes).unwrap(),
                    estimates: (0..rng.gen_range(5..=9usize))
                        .map(|_| (gt as i64 + rng.gen_range(-2..=2i64)).clamp(1, 11) as u32)
                        .collect(),
                }
            })
            .collect();
        let run = || -> Result<String, String> {
            let table = fusion_experiment(&benchmark, 5, 30, num_classes, 99).map_err(err)?;
            serde_json::to_string(&table).map_err(err)
        };
        let first = run()?;
        let second = run()?;
        ensure!(
            first == second,
            "fusion experiment differs between two runs with the same seed"
        );
        Ok(())
    });
}

#[test]
fn criterion_08_average_imbalance_ratio() {
    check("08 (average imbalance ratio)", || {
        let balanced = average_imbalance_ratio(&[7, 7, 7, 7]).map_err(err)?;
        ensure!(balanced == 1.0, "balanced distribution gave {balanced}");
        let skewed = average_imbalance_ratio(&[10, 5, 5]).map_err(err)?;
        ensure!(
            (skewed - 2.0 / 3.0).abs() <= 1e-12,
            "[10, 5, 5] gave {skewed}, want 2/3"
        );
        Ok(())
    });
}

#[test]
fn criterion_09_fold_properties() {
    check("09 (cross-validation fold properties)", || {
        for n in [5usize, 7, 100, 1001] {
            let records: Vec<PieceRecord> = (0..n)
                .map(|i| synthetic_record(i, 1 + (i % 11) as u32, 11))
                .collect();
            let folds = make_folds(&records, 42).map_err(err)?;
            let again = make_folds(&records, 42).map_err(err)?;
            ensure!(folds.len() == NUM_FOLDS, "n={n}: {} folds", folds.len());

            let mut all_test_ids: Vec<&str> = Vec::new();
            for (i, fold) in folds.iter().enumerate() {
                ensure!(
                    fold.train_ids == again[i].train_ids
                        && fold.val_ids == again[i].val_ids
                        && fold.test_ids == again[i].test_ids,
                    "n={n} fold {i}: not deterministic for a fixed seed"
                );
                let mut union: Vec<&str> = fold
                    .train_ids
                    .iter()
                    .chain(&fold.val_ids)
                    .chain(&fold.test_ids)
                    .map(String::as_str)
                    .collect();
                let total = union.len();
                union.sort_unstable();
                union.dedup();
                ensure!(
                    union.len() == n && total == n,
                    "n={n} fold {i}: splits are not a disjoint cover ({total} ids, {} unique)",
                    union.len()
                );
                for (part, ids, target) in [
                    ("train", &fold.train_ids, 0.6 * n as f64),
                    ("val", &fold.val_ids, 0.2 * n as f64),
                    ("test", &fold.test_ids, 0.2 * n as f64),
                ] {
                    ensure!(
                        (ids.len() as f64 - target).abs() <= 1.0,
                        "n={n} fold {i}: {part} has {} pieces, target {target:.1}",
                        ids.len()
                    );
                }
                all_test_ids.extend(fold.test_ids.iter().map(String::as_str));
            }
            let total = all_test_ids.len();
            all_test_ids.sort_unstable();
            all_test_ids.dedup();
            ensure!(
                total == n && all_test_ids.len() == n,
                "n={n}: test shards do not partition the manifest"
            );
        }
        Ok(())
    });
}

#[test]
fn criterion_10_curation_round_trip() {
    check("10 (curation round trip)", || {
        let pair = TitlePair::new(
            "Chopin: Ballade No. 1 in G minor, Op. 23",
            "Ballade No. 1 in G minor (Chopin) - Complete",
        )
        .map_err(err)?;
        let golden = include_str!("fixtures/golden_prompt.txt");
        ensure!(
            render_validation_prompt(&pair) == golden,
            "rendered prompt does not match the golden file byte-for-byte"
        );

        for verdict in [
            RelationVerdict::SamePiece,
            RelationVerdict::APartialOfB,
            RelationVerdict::BPartialOfA,
            RelationVerdict::Distinct,
        ] {
            let parsed = parse_validation_answer(verdict.canonical_answer()).map_err(err)?;
            ensure!(
                parsed == verdict,
                "canonical answer {:?} parsed as {:?}",
                verdict.canonical_answer(),
                parsed
            );
        }

        // Replay of the documented scale: 8426 candidates, 525 rejected.
        let records: Vec<PieceRecord> = (0..8426)
            .map(|i| synthetic_record(i, 1 + (i % 11) as u32, 11))
            .collect();
        let rejections = [
            RelationVerdict::APartialOfB,
            RelationVerdict::BPartialOfA,
            RelationVerdict::Distinct,
        ];
        let verdicts: BTreeMap<String, RelationVerdict> = records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let verdict = if i < 525 {
                    rejections[i % rejections.len()]
                } else {
                    RelationVerdict::SamePiece
                };
                (r.piece_id.clone(), verdict)
            })
            .collect();
        let (kept, discarded) = filter_by_verdict(&records, &verdicts).map_err(err)?;
        ensure!(
            kept.len() == 7901 && discarded.len() == 525,
            "kept {} / discarded {}, want 7901 / 525",
            kept.len(),
            discarded.len()
        );
        ensure!(
            kept.iter()
                .all(|r| verdicts[&r.piece_id] == RelationVerdict::SamePiece),
            "a kept piece does not carry a same-piece verdict"
        );
        Ok(())
    });
}

#[test]
fn criterion_11_cqt_sanity() {
    check("11 (CQT sanity)", || {
        let params = CqtParams::default();
        let sr = params.sample_rate as usize;

        // A4 concert pitch lands on bin 12 * log2(440 / 27.5) = 48.
        let sine: Vec<f32> = (0..sr)
            .map(|n| (2.0 * std::f32::consts::PI * 440.0 * n as f32 / sr as f32).sin() * 0.5)
            .collect();
        let cqt = compute_cqt(&sine, &params).map_err(err)?;
        let frames = cqt.frames();
        for t in frames / 4..3 * frames / 4 {
            let column = cqt.data.slice(ndarray::s![.., t, 0]);
            let peak = column
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(bin, _)| bin)
                .unwrap();
            ensure!(peak == 48, "frame {t}: 440 Hz peaks at bin {peak}, want 48");
        }

        let silence = vec![0.0f32; sr];
        let quiet = compute_cqt(&silence, &params).map_err(err)?;
        ensure!(
            quiet.data.iter().all(|&v| v == 0.0),
            "silence does not map to the zero floor"
        );

        // ceil(frame-count / native-rate * 5) with frames = floor(len/hop) + 1.
        for (seconds, want) in [(1usize, 6usize), (2, 11), (10, 51)] {
            let audio = vec![0.0f32; sr * seconds];
            let native = compute_cqt(&audio, &params).map_err(err)?;
            let native_frames = seconds * sr / params.hop + 1;
            ensure!(
                native.frames() == native_frames,
                "{seconds} s: {} native frames, want {native_frames}",
                native.frames()
            );
            let down = subsample_to_5fps(&native).map_err(err)?;
            ensure!(
                down.frames() == want,
                "{seconds} s: {} frames at 5 fps, want {want}",
                down.frames()
            );
        }
        Ok(())
    });
}

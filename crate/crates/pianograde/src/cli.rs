//! Command-line workflows. `run` returns the process exit status: 0 on
//! success, 1 on a domain error, 2 on a usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataset::{
    collect_answer_files, cross_ranking_correlation, distribution_report, emit_prompt_files,
    filter_by_verdict, generate_toy_corpus, write_verdict_log, TitlePair,
};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate, fuse_performances, fusion_experiment, EvalModel, FuseStatistic, GroupKey,
    PerformanceSet,
};
use crate::features::{
    compute_cqt, load_midi_notes, rasterize_piano_roll, stack_multimodal, subsample_to_5fps,
    write_psyt, CqtParams, FeatureTensor, Modality, TARGET_FPS,
};
use crate::manifest::{load_manifest, save_manifest, PieceRecord};
use crate::model::{
    load_checkpoint, save_checkpoint, DifficultyModel, HeadSpec, ModelConfig, TaskKind,
};
use crate::ordinal::{decode_ordinal, DifficultyLevel};
use crate::training::{
    items_from_records, make_folds, parse_task_name, train, write_epoch_log, TrainConfig,
};

#[derive(Parser)]
#[command(name = "pianograde", version, about = "Piano performance difficulty estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute CQT / piano-roll feature tensors for one piece
    FeaturesExtract(FeaturesExtractArgs),
    /// Emit metadata-validation prompts or collect answered verdicts
    DatasetValidate(DatasetValidateArgs),
    /// Generate a synthetic, learnable-by-construction corpus
    DatasetSynth(DatasetSynthArgs),
    /// Summarize a manifest's level/era/gender/composer distributions
    DatasetReport(DatasetReportArgs),
    /// Train one cross-validation fold
    Train(TrainArgs),
    /// Evaluate a checkpoint (or a CQT+PR ensemble) on a test split
    Evaluate(EvaluateArgs),
    /// Predict the difficulty of a single piece
    Predict(PredictArgs),
    /// Fuse difficulty estimates from multiple performances
    FusePerformances(FuseArgs),
    /// Rank correlation between two grade boards in a manifest
    RankCorrelate(RankCorrelateArgs),
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::FeaturesExtract(a) => features_extract(a),
        Command::DatasetValidate(a) => dataset_validate(a),
        Command::DatasetSynth(a) => dataset_synth(a),
        Command::DatasetReport(a) => dataset_report(a),
        Command::Train(a) => run_train(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Predict(a) => run_predict(a),
        Command::FusePerformances(a) => run_fuse(a),
        Command::RankCorrelate(a) => rank_correlate(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Feature cache root: `PIANOGRADE_CACHE` when set, else `./features`.
fn default_features_dir() -> PathBuf {
    std::env::var_os("PIANOGRADE_CACHE")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("features"))
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

/// Reads a WAV file as mono f32, averaging channels.
fn read_wav_mono(path: &Path) -> Result<(Vec<f32>, u32)> {
    let mut reader = hound::WavReader::open(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let samples: Vec<f32> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?,
        hound::SampleFormat::Int => {
            let scale = ((1u64 << (spec.bits_per_sample - 1)) as f32).recip();
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f32 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        }
    };
    let mono: Vec<f32> = samples
        .chunks(channels)
        .map(|frame| frame.iter().sum::<f32>() / channels as f32)
        .collect();
    Ok((mono, spec.sample_rate))
}

fn cqt_from_wav(path: &Path) -> Result<FeatureTensor> {
    let (audio, sample_rate) = read_wav_mono(path)?;
    let params = CqtParams {
        sample_rate,
        ..CqtParams::default()
    };
    subsample_to_5fps(&compute_cqt(&audio, &params)?)
}

fn roll_from_midi(path: &Path) -> Result<FeatureTensor> {
    let notes = load_midi_notes(path)?;
    let duration = notes
        .notes
        .iter()
        .map(|n| n.offset_s)
        .fold(0.0f64, f64::max);
    rasterize_piano_roll(&notes, TARGET_FPS, duration)
}

#[derive(Args)]
struct FeaturesExtractArgs {
    /// WAV recording (enables the CQT tensor)
    #[arg(long)]
    audio: Option<PathBuf>,
    /// Standard MIDI File (enables the piano-roll tensor)
    #[arg(long)]
    midi: Option<PathBuf>,
    /// Piece id used in output file names; defaults to the input file stem
    #[arg(long)]
    piece_id: Option<String>,
    #[arg(long, default_value_os_t = default_features_dir())]
    out_dir: PathBuf,
    #[arg(long)]
    json: bool,
}

fn features_extract(args: FeaturesExtractArgs) -> Result<()> {
    let source = args.audio.as_ref().or(args.midi.as_ref()).ok_or_else(|| {
        Error::Config("provide --audio, --midi, or both".into())
    })?;
    let piece_id = match &args.piece_id {
        Some(id) => id.clone(),
        None => source
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| Error::Config("cannot derive a piece id; pass --piece-id".into()))?,
    };
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;

    let mut written: Vec<(String, usize)> = Vec::new();
    let cqt = args.audio.as_deref().map(cqt_from_wav).transpose()?;
    let roll = args.midi.as_deref().map(roll_from_midi).transpose()?;
    if let Some(t) = &cqt {
        let path = args.out_dir.join(format!("{piece_id}.cqt.psyt"));
        write_psyt(&path, t)?;
        written.push((path.display().to_string(), t.data.dim().1));
    }
    if let Some(t) = &roll {
        let path = args.out_dir.join(format!("{piece_id}.pr.psyt"));
        write_psyt(&path, t)?;
        written.push((path.display().to_string(), t.data.dim().1));
    }
    if let (Some(c), Some(p)) = (&cqt, &roll) {
        let mm = stack_multimodal(c, p)?;
        let path = args.out_dir.join(format!("{piece_id}.mm.psyt"));
        write_psyt(&path, &mm)?;
        written.push((path.display().to_string(), mm.data.dim().1));
    }
    if args.json {
        print_json(&serde_json::json!({
            "piece_id": piece_id,
            "files": written.iter().map(|(p, t)| {
                serde_json::json!({"path": p, "frames": t})
            }).collect::<Vec<_>>(),
        }));
    } else {
        for (path, frames) in &written {
            println!("{path}: {frames} frames at {TARGET_FPS} fps");
        }
    }
    Ok(())
}

#[derive(Args)]
struct DatasetValidateArgs {
    #[command(subcommand)]
    phase: ValidatePhase,
}

#[derive(Subcommand)]
enum ValidatePhase {
    /// Render one relation-validation prompt file per title pair
    EmitPrompts {
        /// CSV with columns piece_id, title_a, title_b
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Parse `<piece_id>.answer` files and filter the manifest
    Collect {
        /// CSV with columns piece_id, title_a, title_b
        #[arg(long)]
        pairs: PathBuf,
        /// Directory holding the `<piece_id>.answer` files
        #[arg(long)]
        answers_dir: PathBuf,
        /// Manifest to split into kept/discarded by verdict
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

fn read_pairs(path: &Path) -> Result<BTreeMap<String, TitlePair>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut pairs = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if row.len() != 3 {
            return Err(Error::Format(format!(
                "{}: expected 3 columns (piece_id, title_a, title_b), got {}",
                path.display(),
                row.len()
            )));
        }
        pairs.insert(row[0].to_string(), TitlePair::new(&row[1], &row[2])?);
    }
    if pairs.is_empty() {
        return Err(Error::Domain(format!("{}: no pairs", path.display())));
    }
    Ok(pairs)
}

fn dataset_validate(args: DatasetValidateArgs) -> Result<()> {
    match args.phase {
        ValidatePhase::EmitPrompts { pairs, out_dir, json } => {
            let pairs = read_pairs(&pairs)?;
            let n = emit_prompt_files(&pairs, &out_dir)?;
            if json {
                print_json(&serde_json::json!({"prompts_written": n}));
            } else {
                println!("wrote {n} prompt files to {}", out_dir.display());
            }
        }
        ValidatePhase::Collect { pairs, answers_dir, manifest, out_dir, json } => {
            let pairs = read_pairs(&pairs)?;
            let ids: Vec<String> = pairs.keys().cloned().collect();
            let verdicts = collect_answer_files(&ids, &answers_dir)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            let log_path = out_dir.join("verdicts.csv");
            write_verdict_log(&log_path, &verdicts)?;
            let mut summary = serde_json::json!({
                "answers": verdicts.len(),
                "verdict_log": log_path.display().to_string(),
            });
            if let Some(manifest_path) = manifest {
                let load = load_manifest(&manifest_path)?;
                let plain: BTreeMap<String, _> =
                    verdicts.iter().map(|(k, (v, _))| (k.clone(), *v)).collect();
                let (kept, discarded) = filter_by_verdict(&load.records, &plain)?;
                let kept_path = out_dir.join("kept.jsonl");
                let discarded_path = out_dir.join("discarded.jsonl");
                save_manifest(&kept_path, &kept)?;
                save_manifest(&discarded_path, &discarded)?;
                summary["kept"] = kept.len().into();
                summary["discarded"] = discarded.len().into();
            }
            if json {
                print_json(&summary);
            } else {
                println!("collected {} verdicts -> {}", verdicts.len(), log_path.display());
                if let Some(k) = summary.get("kept") {
                    println!("kept {k}, discarded {}", summary["discarded"]);
                }
            }
        }
    }
    Ok(())
}

#[derive(Args)]
struct DatasetSynthArgs {
    #[arg(long)]
    pieces: usize,
    #[arg(long)]
    levels: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "toy-corpus")]
    out_dir: PathBuf,
    #[arg(long)]
    json: bool,
}

fn dataset_synth(args: DatasetSynthArgs) -> Result<()> {
    let corpus = generate_toy_corpus(args.pieces, args.levels, args.seed, &args.out_dir)?;
    if args.json {
        print_json(&serde_json::json!({
            "manifest": corpus.manifest_path.display().to_string(),
            "features_dir": corpus.features_dir.display().to_string(),
            "midi_dir": corpus.midi_dir.display().to_string(),
            "pieces": corpus.records.len(),
        }));
    } else {
        println!(
            "generated {} pieces -> {}",
            corpus.records.len(),
            corpus.manifest_path.display()
        );
    }
    Ok(())
}

#[derive(Args)]
struct DatasetReportArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Composers below this share of the corpus are bucketed as "Others"
    #[arg(long, default_value_t = 0.03)]
    others_threshold: f64,
    #[arg(long)]
    json: bool,
}

fn dataset_report(args: DatasetReportArgs) -> Result<()> {
    let load = load_manifest(&args.manifest)?;
    let report = distribution_report(&load.records, args.others_threshold)?;
    if args.json {
        print_json(&serde_json::to_value(&report)?);
    } else {
        print!("{}", report.render_text());
        if !load.rejected.is_empty() {
            println!("rejected records: {}", load.rejected.len());
        }
    }
    Ok(())
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_os_t = default_features_dir())]
    features_dir: PathBuf,
    #[arg(long, default_value = "PR")]
    modality: Modality,
    /// Training configuration JSON; explicit flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    fold: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    grad_clip: Option<f64>,
    /// Extra tasks besides difficulty: era, composer, aux_rank:<board>
    #[arg(long, value_delimiter = ',')]
    tasks: Vec<String>,
    /// Classes of the difficulty head (11 for the standard syllabus)
    #[arg(long, default_value_t = crate::ordinal::PSYLLABUS_LEVELS)]
    difficulty_classes: usize,
    #[arg(long, default_value = "run")]
    out_dir: PathBuf,
    #[arg(long)]
    json: bool,
}

fn run_train(args: TrainArgs) -> Result<()> {
    let mut cfg: TrainConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text)?
        }
        None => TrainConfig::default(),
    };
    if let Some(v) = args.fold {
        cfg.fold = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.max_epochs {
        cfg.max_epochs = v;
    }
    if let Some(v) = args.patience {
        cfg.patience = v;
    }
    if let Some(v) = args.weight_decay {
        cfg.weight_decay = v;
    }
    if let Some(v) = args.grad_clip {
        cfg.grad_clip = v;
    }
    cfg.validate()?;

    let load = load_manifest(&args.manifest)?;
    let records = load.records;
    let folds = make_folds(&records, cfg.seed)?;
    let split = &folds[cfg.fold];

    // Size extra heads from the data they will be trained on.
    let mut model_cfg = ModelConfig::difficulty(args.modality);
    model_cfg.heads = vec![HeadSpec {
        num_classes: args.difficulty_classes,
        ..HeadSpec::difficulty()
    }];
    let mut composers = BTreeMap::new();
    for name in &args.tasks {
        match parse_task_name(name)? {
            TaskKind::Era => model_cfg.heads.push(HeadSpec::era()),
            TaskKind::Composer => {
                let mut names: Vec<&str> =
                    records.iter().map(|r| r.composer.as_str()).collect();
                names.sort_unstable();
                names.dedup();
                composers = names
                    .iter()
                    .enumerate()
                    .map(|(i, n)| (n.to_string(), i as u32))
                    .collect();
                model_cfg.heads.push(HeadSpec::composer(composers.len()));
            }
            TaskKind::AuxRank(board) => {
                let max = records
                    .iter()
                    .filter_map(|r| r.aux_ranks.get(&board))
                    .max()
                    .copied()
                    .ok_or_else(|| {
                        Error::Domain(format!("no piece carries a rank for board {board:?}"))
                    })?;
                model_cfg.heads.push(HeadSpec::aux_rank(&board, max as usize));
            }
            TaskKind::Difficulty => {}
        }
    }

    let train_items =
        items_from_records(&records, &split.train_ids, &args.features_dir, args.modality, &composers)?;
    let val_items =
        items_from_records(&records, &split.val_ids, &args.features_dir, args.modality, &composers)?;

    let model = DifficultyModel::new(model_cfg, cfg.seed)?;
    let report = train(&model, &train_items, &val_items, &cfg)?;

    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let ckpt = args.out_dir.join("model.ckpt");
    save_checkpoint(&ckpt, &model)?;
    let log = args.out_dir.join("train_log.csv");
    write_epoch_log(&log, &report)?;

    if args.json {
        print_json(&serde_json::json!({
            "checkpoint": ckpt.display().to_string(),
            "epoch_log": log.display().to_string(),
            "epochs_run": report.epochs.len(),
            "best_epoch": report.best_epoch,
            "best_val_mse": report.best_val_mse,
            "best_val_acc": report.best_val_acc,
            "stopped_early": report.stopped_early,
        }));
    } else {
        println!(
            "trained {} epochs (best epoch {}, val MSE {:.4}, val Acc {:.4}) -> {}",
            report.epochs.len(),
            report.best_epoch,
            report.best_val_mse,
            report.best_val_acc,
            ckpt.display()
        );
    }
    Ok(())
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_os_t = default_features_dir())]
    features_dir: PathBuf,
    /// Single-model evaluation
    #[arg(long, conflicts_with = "ensemble")]
    checkpoint: Option<PathBuf>,
    /// Late-fusion of a CQT and a PR checkpoint
    #[arg(long, requires = "cqt_ckpt", requires = "pr_ckpt")]
    ensemble: bool,
    #[arg(long)]
    cqt_ckpt: Option<PathBuf>,
    #[arg(long)]
    pr_ckpt: Option<PathBuf>,
    /// Restrict scoring to one fold's test shard
    #[arg(long)]
    fold: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Slice metrics by era, gender, or composer
    #[arg(long)]
    group_by: Option<GroupKey>,
    #[arg(long)]
    json: bool,
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let model = if args.ensemble {
        EvalModel::Ensemble {
            cqt: Box::new(load_checkpoint(args.cqt_ckpt.as_ref().unwrap())?),
            pr: Box::new(load_checkpoint(args.pr_ckpt.as_ref().unwrap())?),
        }
    } else {
        let path = args
            .checkpoint
            .as_ref()
            .ok_or_else(|| Error::Config("pass --checkpoint or --ensemble".into()))?;
        EvalModel::Single(load_checkpoint(path)?)
    };
    let load = load_manifest(&args.manifest)?;
    let records: Vec<PieceRecord> = match args.fold {
        Some(fold) => {
            let folds = make_folds(&load.records, args.seed)?;
            let split = folds.get(fold).ok_or_else(|| {
                Error::Config(format!("fold {fold} outside [0, {}]", folds.len() - 1))
            })?;
            load.records
                .iter()
                .filter(|r| split.test_ids.contains(&r.piece_id))
                .cloned()
                .collect()
        }
        None => load.records,
    };
    let report = evaluate(&model, &records, &args.features_dir, args.group_by)?;
    if args.json {
        print_json(&serde_json::to_value(&report)?);
    } else {
        print!("{}", report.render_text());
    }
    Ok(())
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// WAV recording (CQT input; MM additionally needs --midi)
    #[arg(long)]
    audio: Option<PathBuf>,
    /// Standard MIDI File (piano-roll input)
    #[arg(long)]
    midi: Option<PathBuf>,
    /// Precomputed PSYT feature tensor, bypassing extraction
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    piece_id: Option<String>,
    #[arg(long)]
    json: bool,
}

fn run_predict(args: PredictArgs) -> Result<()> {
    let model = load_checkpoint(&args.checkpoint)?;
    let modality = model.config().modality;
    let features = match (&args.features, &args.audio, &args.midi) {
        (Some(path), _, _) => crate::features::read_psyt(path)?,
        (None, audio, midi) => match modality {
            Modality::Cqt => cqt_from_wav(audio.as_deref().ok_or_else(|| {
                Error::Config("this checkpoint consumes audio; pass --audio".into())
            })?)?,
            Modality::PianoRoll => roll_from_midi(midi.as_deref().ok_or_else(|| {
                Error::Config("this checkpoint consumes MIDI; pass --midi".into())
            })?)?,
            Modality::Multimodal => {
                let (Some(a), Some(m)) = (audio.as_deref(), midi.as_deref()) else {
                    return Err(Error::Config(
                        "this checkpoint is multimodal; pass --audio and --midi".into(),
                    ));
                };
                stack_multimodal(&cqt_from_wav(a)?, &roll_from_midi(m)?)?
            }
        },
    };
    let piece_id = args.piece_id.clone().unwrap_or_else(|| {
        args.features
            .as_deref()
            .or(args.audio.as_deref())
            .or(args.midi.as_deref())
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "piece".to_string())
    });
    let out = model.forward(&features)?;
    let activations = out.head_activations(&TaskKind::Difficulty)?;
    let level = decode_ordinal(&activations, 0.5)?;
    if args.json {
        print_json(&serde_json::json!({
            "piece_id": piece_id,
            "level": level.get(),
            "activations": activations,
        }));
    } else {
        let acts: Vec<String> = activations.iter().map(|a| format!("{a:.3}")).collect();
        println!("{piece_id}\tlevel {}\t[{}]", level.get(), acts.join(", "));
    }
    Ok(())
}

#[derive(Args)]
struct FuseArgs {
    /// Comma-separated decoded levels of one piece's performances
    #[arg(long, value_delimiter = ',', conflicts_with = "sets")]
    estimates: Vec<u32>,
    /// Ground-truth level (only used for reporting)
    #[arg(long)]
    truth: Option<u32>,
    #[arg(long, default_value = "mean")]
    statistic: FuseStatistic,
    #[arg(long, default_value_t = crate::ordinal::PSYLLABUS_LEVELS)]
    classes: usize,
    /// Benchmark CSV (piece_id, truth, estimates separated by ';') to run the
    /// full fusion experiment over all statistics
    #[arg(long)]
    sets: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    subset_size: usize,
    #[arg(long, default_value_t = 30)]
    repetitions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

fn read_performance_sets(path: &Path, classes: usize) -> Result<Vec<PerformanceSet>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut sets = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if row.len() != 3 {
            return Err(Error::Format(format!(
                "{}: expected piece_id, truth, estimates",
                path.display()
            )));
        }
        let truth: u32 = row[1]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad truth value {:?}", &row[1])))?;
        let estimates: Vec<u32> = row[2]
            .split(';')
            .map(|s| s.trim().parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Format(format!("bad estimates {:?}", &row[2])))?;
        sets.push(PerformanceSet {
            piece_id: row[0].to_string(),
            ground_truth: DifficultyLevel::new(truth, classes)?,
            estimates,
        });
    }
    Ok(sets)
}

fn run_fuse(args: FuseArgs) -> Result<()> {
    if let Some(path) = &args.sets {
        let sets = read_performance_sets(path, args.classes)?;
        let table = fusion_experiment(
            &sets,
            args.subset_size,
            args.repetitions,
            args.classes,
            args.seed,
        )?;
        if args.json {
            print_json(&serde_json::to_value(&table)?);
        } else {
            print!("{}", table.render_text());
        }
        return Ok(());
    }
    if args.estimates.is_empty() {
        return Err(Error::Config("pass --estimates or --sets".into()));
    }
    let set = PerformanceSet {
        piece_id: "cli".into(),
        ground_truth: DifficultyLevel::new(args.truth.unwrap_or(1), args.classes)?,
        estimates: args.estimates.clone(),
    };
    let fused = fuse_performances(&set, args.statistic, args.classes, args.seed)?;
    if args.json {
        print_json(&serde_json::json!({
            "statistic": args.statistic.name(),
            "fused_level": fused.get(),
        }));
    } else {
        println!("{}: level {}", args.statistic.name(), fused.get());
    }
    Ok(())
}

#[derive(Args)]
struct RankCorrelateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    board_a: String,
    #[arg(long)]
    board_b: String,
    #[arg(long)]
    json: bool,
}

fn rank_correlate(args: RankCorrelateArgs) -> Result<()> {
    let load = load_manifest(&args.manifest)?;
    let (tau, shared) = cross_ranking_correlation(&load.records, &args.board_a, &args.board_b)?;
    if args.json {
        print_json(&serde_json::json!({
            "board_a": args.board_a,
            "board_b": args.board_b,
            "shared_pieces": shared,
            "tau_c": tau,
        }));
    } else {
        println!(
            "{} vs {}: tau_c = {tau:.4} over {shared} shared pieces",
            args.board_a, args.board_b
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_vec(args: &[&str]) -> i32 {
        run(std::iter::once("pianograde").chain(args.iter().copied()))
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run_vec(&["--help"]), 0);
        assert_eq!(run_vec(&["predict", "--help"]), 0);
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(run_vec(&["dataset-synth", "--bogus"]), 2);
    }

    #[test]
    fn missing_input_is_domain_error() {
        assert_eq!(
            run_vec(&["dataset-report", "--manifest", "/nonexistent/manifest.jsonl"]),
            1
        );
    }

    #[test]
    fn synth_then_report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("corpus");
        let code = run_vec(&[
            "dataset-synth",
            "--pieces",
            "6",
            "--levels",
            "3",
            "--seed",
            "5",
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let manifest = out.join("manifest.jsonl");
        assert!(manifest.exists());
        assert_eq!(
            run_vec(&["dataset-report", "--manifest", manifest.to_str().unwrap()]),
            0
        );
    }

    #[test]
    fn fuse_single_set() {
        assert_eq!(
            run_vec(&["fuse-performances", "--estimates", "3,4,4,5,9", "--statistic", "median"]),
            0
        );
    }
}

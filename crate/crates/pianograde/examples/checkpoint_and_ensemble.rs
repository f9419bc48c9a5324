//! Model inference: run a forward pass, save and reload a checkpoint, and
//! late-fuse two models by averaging their difficulty activations.
//!
//! Run with: `cargo run --example checkpoint_and_ensemble`

use ndarray::Array3;
use pianograde::features::{FeatureTensor, Modality, TARGET_FPS};
use pianograde::model::{
    ensemble_average, load_checkpoint, save_checkpoint, DifficultyModel, ModelConfig, TaskKind,
};
use pianograde::ordinal::decode_ordinal;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pianograde::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");

    // 30 s of random piano-roll features at 5 fps: 88 x 150 x 2.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let data = Array3::from_shape_fn((88, 150, 2), |_| if rng.gen_bool(0.1) { 1.0 } else { 0.0 });
    let x = FeatureTensor::new(data, TARGET_FPS, Modality::PianoRoll)?;

    let model = DifficultyModel::new(ModelConfig::difficulty(Modality::PianoRoll), 1)?;
    let out = model.forward(&x)?;
    let activations = out.head_activations(&TaskKind::Difficulty)?;
    println!("difficulty activations: {activations:.3?}");
    println!(
        "decoded level: {} (untrained weights, so treat it as noise)",
        decode_ordinal(&activations, 0.5)?.get()
    );
    println!(
        "attention: {} heads over {} frames",
        out.attention_weights.len(),
        out.attention_weights[0].len()
    );

    let path = dir.path().join("model.ckpt");
    save_checkpoint(&path, &model)?;
    let reloaded = load_checkpoint(&path)?;
    let again = reloaded
        .forward(&x)?
        .head_activations(&TaskKind::Difficulty)?;
    assert_eq!(activations, again, "checkpoint round trip must be exact");
    println!("checkpoint round trip reproduces the forward pass bit-exactly");

    // Late fusion: average the activations of two differently seeded models.
    let other = DifficultyModel::new(ModelConfig::difficulty(Modality::PianoRoll), 2)?;
    let other_act = other.forward(&x)?.head_activations(&TaskKind::Difficulty)?;
    let fused = ensemble_average(&activations, &other_act)?;
    println!(
        "ensemble of seeds 1 and 2 decodes to level {}",
        decode_ordinal(&fused, 0.5)?.get()
    );
    Ok(())
}

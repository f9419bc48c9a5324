//! Ordinal difficulty labels: leading-ones encoding and threshold decoding.
//!
//! Run with: `cargo run --example ordinal_encoding`

use pianograde::ordinal::{decode_ordinal, encode_ordinal, DifficultyLevel, PSYLLABUS_LEVELS};

fn main() -> pianograde::Result<()> {
    println!("Leading-ones encoding over {PSYLLABUS_LEVELS} levels:");
    for level in [1u32, 4, 7, 11] {
        let l = DifficultyLevel::new(level, PSYLLABUS_LEVELS)?;
        let encoded = encode_ordinal(l, PSYLLABUS_LEVELS)?;
        println!("  level {level:>2} -> {:?}", encoded.lambdas());
    }

    // Decoding counts activations above the threshold from the left, so a
    // noisy sigmoid output still maps to a well-defined level.
    let noisy = [0.97f32, 0.91, 0.88, 0.73, 0.55, 0.31, 0.62, 0.12, 0.05, 0.02, 0.01];
    let level = decode_ordinal(&noisy, 0.5)?;
    println!("\nNoisy activations {noisy:?}");
    println!("decode at threshold 0.5 -> level {}", level.get());

    // Round trip across every level of a smaller 7-grade scale.
    for raw in 1..=7 {
        let l = DifficultyLevel::new(raw, 7)?;
        let back = decode_ordinal(&encode_ordinal(l, 7)?.as_f32(), 0.5)?;
        assert_eq!(back.get(), raw);
    }
    println!("\n7-grade scale round trips exactly for every level.");
    Ok(())
}

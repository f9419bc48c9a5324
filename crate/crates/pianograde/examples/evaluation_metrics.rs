//! Evaluation metrics on hand-made predictions: accuracy, level MSE,
//! Kendall tau-c (ties allowed), and the average imbalance ratio.
//!
//! Run with: `cargo run --example evaluation_metrics`

use pianograde::eval::{
    accuracy, average_imbalance_ratio, kendall_tau_c, level_mse, zero_shot_tau,
};

fn main() -> pianograde::Result<()> {
    let trues = [3u32, 5, 5, 7, 2, 9, 4, 6, 8, 1];
    let preds = [3u32, 4, 5, 8, 2, 9, 5, 6, 7, 1];

    println!("accuracy: {:.3}", accuracy(&preds, &trues)?);
    println!("level MSE: {:.3}", level_mse(&preds, &trues)?);

    let p: Vec<i64> = preds.iter().map(|&x| x as i64).collect();
    let t: Vec<i64> = trues.iter().map(|&x| x as i64).collect();
    println!("Kendall tau-c: {:.3}", kendall_tau_c(&p, &t)?);

    // Rank correlation also works across scales: compare the 11-level
    // predictions against a 4-grade external board without remapping.
    let external = [2i64, 2, 3, 4, 1, 4, 2, 3, 4, 1];
    println!(
        "zero-shot tau-c vs a 4-grade board: {:.3}",
        zero_shot_tau(&preds, &external)?
    );

    // AIR: 1.0 means every class is as populated as the majority one.
    for counts in [vec![12usize, 12, 12], vec![10, 5, 5], vec![30, 3, 0, 3]] {
        println!(
            "AIR of class counts {counts:?}: {:.4}",
            average_imbalance_ratio(&counts)?
        );
    }
    Ok(())
}

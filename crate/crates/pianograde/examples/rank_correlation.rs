//! Cross-board rank correlation and manifest distribution reporting on a
//! synthetic corpus whose pieces carry two external board grades.
//!
//! Run with: `cargo run --example rank_correlation`

use pianograde::dataset::{cross_ranking_correlation, distribution_report, generate_toy_corpus};

fn main() -> pianograde::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let corpus = generate_toy_corpus(24, 3, 3, dir.path())?;

    let (tau, shared) =
        cross_ranking_correlation(&corpus.records, "SynthBoardA", "SynthBoardB")?;
    println!("SynthBoardA vs SynthBoardB: tau-c {tau:.3} over {shared} shared pieces");

    let report = distribution_report(&corpus.records, 0.03)?;
    println!("\n{}", report.render_text());
    Ok(())
}

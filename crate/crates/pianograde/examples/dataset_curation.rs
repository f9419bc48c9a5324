//! Offline dataset curation: render title-pair prompts, parse the answer
//! files, and filter a manifest down to confirmed matches.
//!
//! Run with: `cargo run --example dataset_curation`

use std::collections::BTreeMap;

use pianograde::dataset::{
    collect_answer_files, emit_prompt_files, filter_by_verdict, parse_validation_answer,
    RelationVerdict, TitlePair,
};
use pianograde::manifest::{Era, Gender, PieceRecord};
use pianograde::ordinal::DifficultyLevel;

fn main() -> pianograde::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");

    let mut pairs = BTreeMap::new();
    pairs.insert(
        "p001".to_string(),
        TitlePair::new(
            "Chopin: Ballade No. 1 in G minor, Op. 23",
            "Ballade No. 1 in G minor (Chopin) - Complete",
        )?,
    );
    pairs.insert(
        "p002".to_string(),
        TitlePair::new(
            "Beethoven: Sonata No. 14 'Moonlight'",
            "Moonlight Sonata - 1st movement only",
        )?,
    );

    let prompts_dir = dir.path().join("prompts");
    let count = emit_prompt_files(&pairs, &prompts_dir)?;
    println!("wrote {count} prompt files to {}", prompts_dir.display());

    // Simulate the reviewer/LLM pass by dropping answer files next to them.
    let answers_dir = dir.path().join("answers");
    std::fs::create_dir_all(&answers_dir).expect("answers dir");
    std::fs::write(answers_dir.join("p001.answer"), "The same piece\n").expect("write");
    std::fs::write(answers_dir.join("p002.answer"), "B is a partial of A\n").expect("write");

    let ids: Vec<String> = pairs.keys().cloned().collect();
    let collected = collect_answer_files(&ids, &answers_dir)?;
    for (id, (verdict, raw)) in &collected {
        println!("{id}: {:?} (raw answer {raw:?})", verdict.name());
    }

    // Any phrasing outside the documented forms is rejected loudly.
    match parse_validation_answer("probably the same, hard to tell") {
        Err(e) => println!("free-form answer rejected: {e}"),
        Ok(v) => println!("unexpectedly parsed as {v:?}"),
    }

    let records: Vec<PieceRecord> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| PieceRecord {
            piece_id: id.clone(),
            difficulty: DifficultyLevel::new(9, 11).unwrap(),
            composer: ["Chopin", "Beethoven"][i].to_string(),
            era: Era::ALL[i % Era::ALL.len()],
            gender: Gender::Male,
            aux_ranks: BTreeMap::new(),
            audio_path: None,
            cqt_path: None,
            midi_path: None,
        })
        .collect();
    let verdicts: BTreeMap<String, RelationVerdict> = collected
        .into_iter()
        .map(|(id, (verdict, _))| (id, verdict))
        .collect();
    let (kept, discarded) = filter_by_verdict(&records, &verdicts)?;
    println!(
        "kept {} piece(s), discarded {} (only same-piece verdicts survive)",
        kept.len(),
        discarded.len()
    );
    Ok(())
}

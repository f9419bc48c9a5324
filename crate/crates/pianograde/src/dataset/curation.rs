//! Annotation-consistency validation through offline LLM prompt files.
//!
//! Prompts are rendered to `<piece_id>.prompt` files, answers come back as
//! `<piece_id>.answer` files, and only pieces whose syllabus title and video
//! title are judged to be the same piece are kept.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::PieceRecord;

/// The bundled prompt template with `{A}` / `{B}` placeholders.
pub const PROMPT_TEMPLATE: &str = include_str!("../../assets/validation_prompt.txt");

/// A syllabus entry title paired with the candidate video title.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TitlePair {
    pub title_a: String,
    pub title_b: String,
}

impl TitlePair {
    /// Trims surrounding whitespace; both titles must be non-empty after that.
    pub fn new(title_a: &str, title_b: &str) -> Result<Self> {
        let title_a = title_a.trim().to_string();
        let title_b = title_b.trim().to_string();
        if title_a.is_empty() || title_b.is_empty() {
            return Err(Error::Domain("title pair has an empty side".into()));
        }
        Ok(TitlePair { title_a, title_b })
    }
}

/// Relationship between the two titles of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationVerdict {
    SamePiece,
    APartialOfB,
    BPartialOfA,
    Distinct,
}

impl RelationVerdict {
    pub fn name(self) -> &'static str {
        match self {
            RelationVerdict::SamePiece => "same_piece",
            RelationVerdict::APartialOfB => "a_partial_of_b",
            RelationVerdict::BPartialOfA => "b_partial_of_a",
            RelationVerdict::Distinct => "distinct",
        }
    }

    /// A canonical answer string that parses back to this verdict.
    pub fn canonical_answer(self) -> &'static str {
        match self {
            RelationVerdict::SamePiece => "The same piece",
            RelationVerdict::APartialOfB => "A is a partial of B",
            RelationVerdict::BPartialOfA => "B is a partial of A",
            RelationVerdict::Distinct => "Distinct piece",
        }
    }
}

/// Instantiates the validation prompt for a pair; deterministic, byte-stable.
pub fn render_validation_prompt(pair: &TitlePair) -> String {
    PROMPT_TEMPLATE
        .replace("{A}", pair.title_a.trim())
        .replace("{B}", pair.title_b.trim())
}

/// Parses an LLM answer into a verdict.
///
/// Matching is case-insensitive over the four documented answer forms plus
/// their movement/part phrasings. Anything else is a parse error carrying
/// the raw text; there is deliberately no silent default.
pub fn parse_validation_answer(text: &str) -> Result<RelationVerdict> {
    let raw = text.to_string();
    let normalized = text
        .trim()
        .trim_end_matches('.')
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_ascii_lowercase();
    if normalized.is_empty() {
        return Err(Error::AnswerParse { raw });
    }
    if normalized == "the same piece" || normalized == "same piece" {
        return Ok(RelationVerdict::SamePiece);
    }
    if normalized == "distinct piece" || normalized == "distinct pieces" {
        return Ok(RelationVerdict::Distinct);
    }
    for (subject, verdict) in [
        ("a", RelationVerdict::APartialOfB),
        ("b", RelationVerdict::BPartialOfA),
    ] {
        let object = if subject == "a" { "b" } else { "a" };
        for noun in ["partial", "movement", "single movement", "part"] {
            if normalized == format!("{subject} is a {noun} of {object}") {
                return Ok(verdict);
            }
        }
    }
    Err(Error::AnswerParse { raw })
}

/// Splits records into the kept (`same_piece`) and discarded partitions.
/// Every record must have a verdict; missing ones are an error listing ids.
pub fn filter_by_verdict(
    records: &[PieceRecord],
    verdicts: &BTreeMap<String, RelationVerdict>,
) -> Result<(Vec<PieceRecord>, Vec<PieceRecord>)> {
    let missing: Vec<&str> = records
        .iter()
        .filter(|r| !verdicts.contains_key(&r.piece_id))
        .map(|r| r.piece_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Domain(format!(
            "missing verdicts for pieces: {}",
            missing.join(", ")
        )));
    }
    let mut kept = Vec::new();
    let mut discarded = Vec::new();
    for record in records {
        match verdicts[&record.piece_id] {
            RelationVerdict::SamePiece => kept.push(record.clone()),
            _ => discarded.push(record.clone()),
        }
    }
    Ok((kept, discarded))
}

/// Writes one `<piece_id>.prompt` file per pair.
pub fn emit_prompt_files(
    pairs: &BTreeMap<String, TitlePair>,
    out_dir: &Path,
) -> Result<usize> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for (piece_id, pair) in pairs {
        let path = out_dir.join(format!("{piece_id}.prompt"));
        std::fs::write(&path, render_validation_prompt(pair)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(pairs.len())
}

/// Reads `<piece_id>.answer` files for the given ids and parses each one.
pub fn collect_answer_files(
    piece_ids: &[String],
    answers_dir: &Path,
) -> Result<BTreeMap<String, (RelationVerdict, String)>> {
    let mut verdicts = BTreeMap::new();
    for id in piece_ids {
        let path = answers_dir.join(format!("{id}.answer"));
        let raw = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let verdict = parse_validation_answer(&raw)?;
        verdicts.insert(id.clone(), (verdict, raw.trim().to_string()));
    }
    Ok(verdicts)
}

/// Writes the verdict log as CSV: piece_id, relation, raw_answer.
pub fn write_verdict_log(
    path: &Path,
    verdicts: &BTreeMap<String, (RelationVerdict, String)>,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    writer
        .write_record(["piece_id", "relation", "raw_answer"])
        .map_err(|e| Error::Format(e.to_string()))?;
    for (id, (verdict, raw)) in verdicts {
        writer
            .write_record([id.as_str(), verdict.name(), raw.as_str()])
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

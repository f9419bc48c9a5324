//! Piece metadata and JSON-lines manifest ingestion.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ordinal::DifficultyLevel;

/// Historical era of a piece, ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Era {
    Baroque,
    Classical,
    Romantic,
    #[serde(rename = "20thCentury")]
    TwentiethCentury,
    Modern,
}

pub const ERA_CLASSES: usize = 5;

impl Era {
    pub const ALL: [Era; 5] = [
        Era::Baroque,
        Era::Classical,
        Era::Romantic,
        Era::TwentiethCentury,
        Era::Modern,
    ];

    /// Chronological ordinal position, Baroque = 1 through Modern = 5.
    pub fn level(self) -> EraLevel {
        EraLevel(match self {
            Era::Baroque => 1,
            Era::Classical => 2,
            Era::Romantic => 3,
            Era::TwentiethCentury => 4,
            Era::Modern => 5,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Era::Baroque => "Baroque",
            Era::Classical => "Classical",
            Era::Romantic => "Romantic",
            Era::TwentiethCentury => "20thCentury",
            Era::Modern => "Modern",
        }
    }
}

/// Chronological era position in `[1, 5]`, used as an ordinal target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EraLevel(u32);

impl EraLevel {
    pub fn get(self) -> u32 {
        self.0
    }

    pub fn as_difficulty(self) -> DifficultyLevel {
        DifficultyLevel::new(self.0, ERA_CLASSES).expect("era level is within [1, 5]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

impl Gender {
    pub fn name(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Unknown => "unknown",
        }
    }
}

/// One piece of the collection: label, metadata, and feature-file locations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PieceRecord {
    pub piece_id: String,
    pub difficulty: DifficultyLevel,
    pub composer: String,
    pub era: Era,
    #[serde(default = "default_gender")]
    pub gender: Gender,
    /// Grades on external ranking boards; a missing board means the piece is
    /// not listed there.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub aux_ranks: BTreeMap<String, u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cqt_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub midi_path: Option<PathBuf>,
}

fn default_gender() -> Gender {
    Gender::Unknown
}

/// A manifest line that parsed as JSON but failed validation.
#[derive(Debug, Clone, Serialize)]
pub struct RejectedLine {
    pub line: usize,
    pub reason: String,
}

/// Result of loading a manifest: validated records plus the lines rejected
/// for recoverable reasons (currently: unknown era labels).
#[derive(Debug)]
pub struct ManifestLoad {
    pub records: Vec<PieceRecord>,
    pub rejected: Vec<RejectedLine>,
}

/// Loads a JSON-lines manifest. Malformed JSON and duplicate ids are hard
/// errors carrying line numbers; records with unrecognized era labels are
/// returned on the rejection list instead of being silently dropped.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<ManifestLoad> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);

    let mut records = Vec::new();
    let mut rejected = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        // Parse loosely first so an unknown era can be told apart from
        // malformed JSON.
        let raw: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Manifest {
            line: line_no,
            msg: format!("malformed JSON: {e}"),
        })?;
        let record: PieceRecord = match serde_json::from_value(raw.clone()) {
            Ok(r) => r,
            Err(e) => {
                let era_is_unknown = raw
                    .get("era")
                    .and_then(|v| v.as_str())
                    .is_some_and(|s| !Era::ALL.iter().any(|e| e.name() == s));
                if era_is_unknown {
                    rejected.push(RejectedLine {
                        line: line_no,
                        reason: format!("unknown era {:?}", raw["era"]),
                    });
                    continue;
                }
                return Err(Error::Manifest {
                    line: line_no,
                    msg: e.to_string(),
                });
            }
        };
        if let Some(&grade) = record.aux_ranks.values().find(|&&g| g == 0) {
            return Err(Error::Manifest {
                line: line_no,
                msg: format!("aux rank grade {grade} must be >= 1"),
            });
        }
        if let Some(&first) = seen.get(&record.piece_id) {
            return Err(Error::Manifest {
                line: line_no,
                msg: format!(
                    "duplicate piece_id {:?} (first seen at line {first})",
                    record.piece_id
                ),
            });
        }
        seen.insert(record.piece_id.clone(), line_no);
        records.push(record);
    }

    Ok(ManifestLoad { records, rejected })
}

/// Writes records as a JSON-lines manifest, one object per line.
pub fn save_manifest(path: impl AsRef<Path>, records: &[PieceRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for rec in records {
        serde_json::to_writer(&mut file, rec)?;
        file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

//! Ordinal difficulty labels and their leading-ones multilabel encoding.
//!
//! A difficulty level `l` out of `C` classes is represented as a binary
//! vector with exactly `l` leading ones. Decoding counts the leading run of
//! ones after thresholding, so the ordering of the labels is preserved by
//! construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of difficulty classes in the PSyllabus scale.
pub const PSYLLABUS_LEVELS: usize = 11;

/// An ordinal difficulty grade in `[1, C]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DifficultyLevel(u32);

impl DifficultyLevel {
    /// Builds a level, checking `1 <= value <= num_classes`.
    pub fn new(value: u32, num_classes: usize) -> Result<Self> {
        if value == 0 || value as usize > num_classes {
            return Err(Error::Domain(format!(
                "difficulty level {value} outside [1, {num_classes}]"
            )));
        }
        Ok(DifficultyLevel(value))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl std::fmt::Display for DifficultyLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Leading-ones multilabel encoding of a difficulty level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrdinalVector {
    lambdas: Vec<u8>,
}

impl OrdinalVector {
    pub fn lambdas(&self) -> &[u8] {
        &self.lambdas
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// The encoded targets as `f32` values in {0, 1}, for loss computation.
    pub fn as_f32(&self) -> Vec<f32> {
        self.lambdas.iter().map(|&l| l as f32).collect()
    }
}

/// Encodes `level` as a vector of `num_classes` entries with exactly
/// `level` leading ones.
pub fn encode_ordinal(level: DifficultyLevel, num_classes: usize) -> Result<OrdinalVector> {
    if level.get() as usize > num_classes {
        return Err(Error::Domain(format!(
            "level {} exceeds {num_classes} classes",
            level.get()
        )));
    }
    let lambdas = (0..num_classes)
        .map(|j| u8::from(j < level.get() as usize))
        .collect();
    Ok(OrdinalVector { lambdas })
}

/// Decodes an activation vector by thresholding each element (`>= threshold`
/// counts as 1) and returning the length of the leading run of ones.
///
/// An all-zero binarization decodes to level 1: the label space starts at 1,
/// so the empty run is floored to the lowest grade.
pub fn decode_ordinal(activations: &[f32], threshold: f32) -> Result<DifficultyLevel> {
    if activations.is_empty() {
        return Err(Error::Domain("cannot decode an empty vector".into()));
    }
    if !(0.0..1.0).contains(&threshold) || threshold <= 0.0 {
        return Err(Error::Domain(format!(
            "threshold {threshold} outside (0, 1)"
        )));
    }
    let leading = activations
        .iter()
        .take_while(|&&a| a >= threshold)
        .count() as u32;
    DifficultyLevel::new(leading.max(1), activations.len())
}

/// True iff encode/decode are mutually inverse for every level in `[1, num_classes]`.
pub fn round_trip_check(num_classes: usize) -> Result<bool> {
    if num_classes == 0 {
        return Err(Error::Domain("num_classes must be >= 1".into()));
    }
    for l in 1..=num_classes as u32 {
        let level = DifficultyLevel::new(l, num_classes)?;
        let encoded = encode_ordinal(level, num_classes)?;
        let decoded = decode_ordinal(&encoded.as_f32(), 0.5)?;
        if decoded != level {
            return Ok(false);
        }
    }
    Ok(true)
}

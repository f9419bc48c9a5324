//! Feature tensors: CQT, piano roll, and their multimodal stack.
//!
//! All model inputs are `bins x time x channels` arrays with 88 bins and a
//! frame rate of 5 fps after subsampling.

mod cqt;
mod pianoroll;
pub(crate) mod psyt;

pub use cqt::{compute_cqt, CqtParams};
pub use pianoroll::{load_midi_notes, rasterize_piano_roll, MidiNote, MidiNoteList};
pub use psyt::{read_psyt, read_psyt_tensor, write_psyt, write_psyt_tensor};

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of frequency bins / piano keys.
pub const NUM_BINS: usize = 88;
/// Model frame rate after subsampling, in frames per second.
pub const TARGET_FPS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "CQT")]
    Cqt,
    #[serde(rename = "PR")]
    PianoRoll,
    #[serde(rename = "MM")]
    Multimodal,
}

impl Modality {
    pub fn channels(self) -> usize {
        match self {
            Modality::Cqt => 1,
            Modality::PianoRoll => 2,
            Modality::Multimodal => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Cqt => "CQT",
            Modality::PianoRoll => "PR",
            Modality::Multimodal => "MM",
        }
    }
}

impl std::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CQT" => Ok(Modality::Cqt),
            "PR" => Ok(Modality::PianoRoll),
            "MM" => Ok(Modality::Multimodal),
            other => Err(Error::Domain(format!("unknown modality {other:?}"))),
        }
    }
}

/// A `bins x time x channels` feature array with its frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub data: Array3<f32>,
    pub frame_rate: f64,
    pub modality: Modality,
}

impl FeatureTensor {
    pub fn new(data: Array3<f32>, frame_rate: f64, modality: Modality) -> Result<Self> {
        let (bins, time, channels) = data.dim();
        if bins != NUM_BINS {
            return Err(Error::Shape(format!("expected {NUM_BINS} bins, got {bins}")));
        }
        if channels != modality.channels() {
            return Err(Error::Shape(format!(
                "{} features need {} channels, got {channels}",
                modality.name(),
                modality.channels()
            )));
        }
        if time == 0 {
            return Err(Error::Shape("feature tensor has no frames".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("feature tensor contains non-finite values".into()));
        }
        Ok(FeatureTensor {
            data,
            frame_rate,
            modality,
        })
    }

    pub fn bins(&self) -> usize {
        self.data.dim().0
    }

    pub fn frames(&self) -> usize {
        self.data.dim().1
    }

    pub fn channels(&self) -> usize {
        self.data.dim().2
    }

    pub fn duration_s(&self) -> f64 {
        self.frames() as f64 / self.frame_rate
    }
}

/// Reduces a tensor to 5 fps by strided nearest-frame selection.
///
/// Output frame `k` takes the source frame nearest to time `k / 5` s; the
/// output length is `ceil(duration * 5)` with `duration = t / native_rate`.
pub fn subsample_to_5fps(tensor: &FeatureTensor) -> Result<FeatureTensor> {
    let native_rate = tensor.frame_rate;
    if native_rate < TARGET_FPS {
        return Err(Error::Domain(format!(
            "native frame rate {native_rate} is below the 5 fps target"
        )));
    }
    let t_in = tensor.frames();
    let duration = t_in as f64 / native_rate;
    let t_out = (duration * TARGET_FPS).ceil() as usize;
    let stride = native_rate / TARGET_FPS;

    let (bins, _, channels) = tensor.data.dim();
    let mut out = Array3::zeros((bins, t_out, channels));
    for k in 0..t_out {
        let src = ((k as f64 * stride).round() as usize).min(t_in - 1);
        out.slice_mut(ndarray::s![.., k, ..])
            .assign(&tensor.data.slice(ndarray::s![.., src, ..]));
    }
    FeatureTensor::new(out, TARGET_FPS, tensor.modality)
}

/// Stacks a CQT tensor and a piano-roll tensor channel-wise into the
/// multimodal representation, channel order `[CQT, PR-frames, PR-onsets]`.
///
/// Time lengths may differ by at most one frame; the result is truncated to
/// the shorter of the two.
pub fn stack_multimodal(cqt: &FeatureTensor, pr: &FeatureTensor) -> Result<FeatureTensor> {
    if cqt.modality != Modality::Cqt || pr.modality != Modality::PianoRoll {
        return Err(Error::Domain(format!(
            "stack_multimodal takes (CQT, PR), got ({}, {})",
            cqt.modality.name(),
            pr.modality.name()
        )));
    }
    if cqt.bins() != pr.bins() {
        return Err(Error::Shape(format!(
            "bin mismatch: {} vs {}",
            cqt.bins(),
            pr.bins()
        )));
    }
    let (tc, tp) = (cqt.frames(), pr.frames());
    if tc.abs_diff(tp) > 1 {
        return Err(Error::Alignment(format!(
            "time lengths differ by more than one frame: {tc} vs {tp}"
        )));
    }
    let t = tc.min(tp);
    let mut out = Array3::zeros((cqt.bins(), t, 3));
    out.slice_mut(ndarray::s![.., .., 0..1])
        .assign(&cqt.data.slice(ndarray::s![.., ..t, ..]));
    out.slice_mut(ndarray::s![.., .., 1..3])
        .assign(&pr.data.slice(ndarray::s![.., ..t, ..]));
    FeatureTensor::new(out, TARGET_FPS, Modality::Multimodal)
}

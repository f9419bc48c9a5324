//! Piano-roll rasterization from transcribed MIDI.
//!
//! Two binary channels: frame-wise pitch activations and explicit onsets.
//! Frames are half-open intervals `[k / fps, (k + 1) / fps)`.

use std::path::Path;

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::features::{FeatureTensor, Modality, NUM_BINS};

/// Lowest and highest MIDI pitch on an 88-key piano (A0..C8).
pub const PITCH_MIN: u8 = 21;
pub const PITCH_MAX: u8 = 108;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MidiNote {
    pub pitch: u8,
    pub onset_s: f64,
    pub offset_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MidiNoteList {
    pub notes: Vec<MidiNote>,
}

impl MidiNoteList {
    pub fn new(notes: Vec<MidiNote>) -> Result<Self> {
        for n in &notes {
            if !(PITCH_MIN..=PITCH_MAX).contains(&n.pitch) {
                return Err(Error::Domain(format!(
                    "pitch {} outside the 88-key range [{PITCH_MIN}, {PITCH_MAX}]",
                    n.pitch
                )));
            }
            if !(n.offset_s > n.onset_s) || n.onset_s < 0.0 {
                return Err(Error::Domain(format!(
                    "note at pitch {} has invalid span [{}, {})",
                    n.pitch, n.onset_s, n.offset_s
                )));
            }
        }
        Ok(MidiNoteList { notes })
    }

    pub fn max_offset(&self) -> f64 {
        self.notes.iter().fold(0.0, |m, n| m.max(n.offset_s))
    }
}

/// Rasterizes notes into an `88 x t x 2` binary tensor at `frame_rate` fps.
///
/// Channel 0 marks every frame during which a note sounds, channel 1 marks
/// the frame containing each onset. `t = max(1, ceil(duration * frame_rate))`.
pub fn rasterize_piano_roll(
    notes: &MidiNoteList,
    frame_rate: f64,
    duration_s: f64,
) -> Result<FeatureTensor> {
    if frame_rate <= 0.0 {
        return Err(Error::Domain(format!("frame rate {frame_rate} must be > 0")));
    }
    if duration_s + 1e-9 < notes.max_offset() {
        return Err(Error::Domain(format!(
            "duration {duration_s} s is shorter than the last offset {} s",
            notes.max_offset()
        )));
    }
    let t = ((duration_s * frame_rate).ceil() as usize).max(1);
    let mut data = Array3::<f32>::zeros((NUM_BINS, t, 2));

    for note in &notes.notes {
        let row = (note.pitch - PITCH_MIN) as usize;
        // Frames [k/fps, (k+1)/fps) overlapping [onset, offset).
        let first = (note.onset_s * frame_rate).floor() as usize;
        // ceil() lands exactly on the boundary frame when the offset does,
        // which is excluded by the half-open interval convention.
        let last = (note.offset_s * frame_rate).ceil() as usize;
        for k in first..last.min(t) {
            data[(row, k, 0)] = 1.0;
        }
        let onset_frame = (note.onset_s * frame_rate).floor() as usize;
        if onset_frame < t {
            data[(row, onset_frame, 1)] = 1.0;
        }
    }

    FeatureTensor::new(data, frame_rate, Modality::PianoRoll)
}

/// Reads note on/off events from a Standard MIDI File into absolute seconds.
pub fn load_midi_notes(path: impl AsRef<Path>) -> Result<MidiNoteList> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let smf = midly::Smf::parse(&bytes).map_err(|e| Error::Midi(e.to_string()))?;

    let ticks_per_beat = match smf.header.timing {
        midly::Timing::Metrical(t) => t.as_int() as f64,
        midly::Timing::Timecode(fps, sub) => {
            // Timecode timing maps ticks directly to seconds.
            let tps = fps.as_f32() as f64 * sub as f64;
            return collect_notes(&smf, move |ticks, _| ticks / tps);
        }
    };
    // Default 120 bpm unless a set-tempo event says otherwise; tempo changes
    // are tracked per tick below.
    collect_notes_metrical(&smf, ticks_per_beat)
}

fn collect_notes(
    smf: &midly::Smf,
    tick_to_s: impl Fn(f64, f64) -> f64,
) -> Result<MidiNoteList> {
    let mut notes = Vec::new();
    for track in &smf.tracks {
        let mut ticks = 0f64;
        let mut active: [Option<f64>; 128] = [None; 128];
        for ev in track {
            ticks += ev.delta.as_int() as f64;
            let time = tick_to_s(ticks, 0.0);
            note_event(&mut notes, &mut active, ev, time)?;
        }
    }
    MidiNoteList::new(notes)
}

fn collect_notes_metrical(smf: &midly::Smf, ticks_per_beat: f64) -> Result<MidiNoteList> {
    let mut notes = Vec::new();
    for track in &smf.tracks {
        let mut seconds = 0f64;
        let mut us_per_beat = 500_000f64;
        let mut active: [Option<f64>; 128] = [None; 128];
        for ev in track {
            let delta = ev.delta.as_int() as f64;
            seconds += delta * us_per_beat / (ticks_per_beat * 1e6);
            if let midly::TrackEventKind::Meta(midly::MetaMessage::Tempo(t)) = ev.kind {
                us_per_beat = t.as_int() as f64;
            }
            note_event(&mut notes, &mut active, ev, seconds)?;
        }
    }
    MidiNoteList::new(notes)
}

fn note_event(
    notes: &mut Vec<MidiNote>,
    active: &mut [Option<f64>; 128],
    ev: &midly::TrackEvent,
    time_s: f64,
) -> Result<()> {
    if let midly::TrackEventKind::Midi { message, .. } = ev.kind {
        match message {
            midly::MidiMessage::NoteOn { key, vel } if vel.as_int() > 0 => {
                active[key.as_int() as usize] = Some(time_s);
            }
            midly::MidiMessage::NoteOn { key, .. } | midly::MidiMessage::NoteOff { key, .. } => {
                if let Some(onset) = active[key.as_int() as usize].take() {
                    if time_s > onset {
                        notes.push(MidiNote {
                            pitch: key.as_int(),
                            onset_s: onset,
                            offset_s: time_s,
                        });
                    }
                }
            }
            _ => {}
        }
    }
    Ok(())
}

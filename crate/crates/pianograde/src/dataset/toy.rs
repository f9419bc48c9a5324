//! Synthetic desk-scale corpus whose difficulty is learnable by construction:
//! note density and pitch range grow monotonically with the level.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{
    compute_cqt, rasterize_piano_roll, subsample_to_5fps, write_psyt, CqtParams, MidiNote,
    MidiNoteList, TARGET_FPS,
};
use crate::manifest::{save_manifest, Era, Gender, PieceRecord};
use crate::ordinal::DifficultyLevel;

const PIECE_SECONDS: f64 = 4.0;

#[derive(Debug)]
pub struct ToyCorpus {
    pub manifest_path: PathBuf,
    pub features_dir: PathBuf,
    pub midi_dir: PathBuf,
    pub records: Vec<PieceRecord>,
}

/// Onsets per second for a difficulty level; strictly increasing in level.
fn onset_rate(level: u32) -> f64 {
    1.0 + 2.0 * level as f64
}

/// Pitch span around middle C; widens with level, clamped to the keyboard.
fn pitch_range(level: u32) -> (u8, u8) {
    let half = (4 * level).min(39) as i16;
    let lo = (60 - half).max(21) as u8;
    let hi = (60 + half).min(108) as u8;
    (lo, hi)
}

fn synth_notes(level: u32, rng: &mut ChaCha8Rng) -> Result<MidiNoteList> {
    let rate = onset_rate(level);
    let count = (PIECE_SECONDS * rate).floor() as usize;
    let (lo, hi) = pitch_range(level);
    let note_len = (0.9 / rate).min(0.4);
    let notes = (0..count)
        .map(|i| {
            let onset = i as f64 / rate;
            MidiNote {
                pitch: rng.gen_range(lo..=hi),
                onset_s: onset,
                offset_s: (onset + note_len).min(PIECE_SECONDS),
            }
        })
        .collect();
    MidiNoteList::new(notes)
}

fn synth_audio(notes: &MidiNoteList, sample_rate: u32) -> Vec<f32> {
    let len = (PIECE_SECONDS * sample_rate as f64) as usize;
    let mut audio = vec![0.0f32; len];
    for note in &notes.notes {
        let freq = 440.0 * 2f64.powf((note.pitch as f64 - 69.0) / 12.0);
        let start = (note.onset_s * sample_rate as f64) as usize;
        let stop = ((note.offset_s * sample_rate as f64) as usize).min(len);
        let span = (stop - start) as f64;
        for i in start..stop {
            let t = (i - start) as f64;
            // Short linear attack/release so note edges do not click.
            let env = (t / (0.01 * sample_rate as f64)).min(1.0).min((span - t) / (0.05 * sample_rate as f64)).max(0.0);
            audio[i] += (0.15 * env * (2.0 * std::f64::consts::PI * freq * i as f64 / sample_rate as f64).sin()) as f32;
        }
    }
    for s in &mut audio {
        *s = s.clamp(-1.0, 1.0);
    }
    audio
}

fn write_midi(path: &Path, notes: &MidiNoteList) -> Result<()> {
    use midly::{
        num::{u15, u24, u28, u4, u7},
        Format, Header, MetaMessage, MidiMessage, Smf, Timing, TrackEvent, TrackEventKind,
    };
    const TICKS_PER_BEAT: f64 = 480.0;
    const US_PER_BEAT: u32 = 500_000;
    let to_ticks = |s: f64| (s * TICKS_PER_BEAT * 1e6 / US_PER_BEAT as f64).round() as u64;

    // (tick, off-before-on, pitch, is_on)
    let mut events: Vec<(u64, bool, u8, bool)> = Vec::new();
    for n in &notes.notes {
        events.push((to_ticks(n.onset_s), false, n.pitch, true));
        events.push((to_ticks(n.offset_s), true, n.pitch, false));
    }
    events.sort_by_key(|&(t, off_first, p, _)| (t, !off_first, p));

    let mut track = vec![TrackEvent {
        delta: u28::new(0),
        kind: TrackEventKind::Meta(MetaMessage::Tempo(u24::new(US_PER_BEAT))),
    }];
    let mut cursor = 0u64;
    for (tick, _, pitch, is_on) in events {
        let message = if is_on {
            MidiMessage::NoteOn {
                key: u7::new(pitch),
                vel: u7::new(80),
            }
        } else {
            MidiMessage::NoteOff {
                key: u7::new(pitch),
                vel: u7::new(0),
            }
        };
        track.push(TrackEvent {
            delta: u28::new((tick - cursor) as u32),
            kind: TrackEventKind::Midi {
                channel: u4::new(0),
                message,
            },
        });
        cursor = tick;
    }
    track.push(TrackEvent {
        delta: u28::new(0),
        kind: TrackEventKind::Meta(MetaMessage::EndOfTrack),
    });

    let smf = Smf {
        header: Header::new(Format::SingleTrack, Timing::Metrical(u15::new(TICKS_PER_BEAT as u16))),
        tracks: vec![track],
    };
    smf.save(path).map_err(|e| Error::Midi(e.to_string()))
}

/// Generates a balanced synthetic corpus under `out_dir`: a JSON-lines
/// manifest, one Standard MIDI File per piece, and PR + CQT feature tensors
/// at 5 fps. Deterministic per seed; pieces are built in parallel with
/// per-piece derived seeds.
pub fn generate_toy_corpus(
    num_pieces: usize,
    num_levels: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<ToyCorpus> {
    if num_levels == 0 || num_pieces < num_levels {
        return Err(Error::Domain(format!(
            "need at least one piece per level, got {num_pieces} pieces for {num_levels} levels"
        )));
    }
    let features_dir = out_dir.join("features");
    let midi_dir = out_dir.join("midi");
    std::fs::create_dir_all(&features_dir).map_err(|e| Error::io(&features_dir, e))?;
    std::fs::create_dir_all(&midi_dir).map_err(|e| Error::io(&midi_dir, e))?;

    let cqt_params = CqtParams::default();
    let records: Vec<PieceRecord> = (0..num_pieces)
        .into_par_iter()
        .map(|i| -> Result<PieceRecord> {
            let level = 1 + (i % num_levels) as u32;
            let piece_id = format!("toy{i:04}");
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9));

            let notes = synth_notes(level, &mut rng)?;
            let midi_path = midi_dir.join(format!("{piece_id}.mid"));
            write_midi(&midi_path, &notes)?;

            let roll = rasterize_piano_roll(&notes, TARGET_FPS, PIECE_SECONDS)?;
            let pr_path = features_dir.join(format!("{piece_id}.pr.psyt"));
            write_psyt(&pr_path, &roll)?;

            let audio = synth_audio(&notes, cqt_params.sample_rate);
            let cqt = subsample_to_5fps(&compute_cqt(&audio, &cqt_params)?)?;
            let cqt_path = features_dir.join(format!("{piece_id}.cqt.psyt"));
            write_psyt(&cqt_path, &cqt)?;

            // Manifest paths are relative to the corpus root, so the tree is
            // relocatable and bit-identical across runs.
            let rel_cqt = PathBuf::from(format!("features/{piece_id}.cqt.psyt"));
            let rel_midi = PathBuf::from(format!("midi/{piece_id}.mid"));

            let mut record = PieceRecord {
                piece_id,
                difficulty: DifficultyLevel::new(level, num_levels)?,
                composer: format!("Synthesist {}", i % 5),
                era: Era::ALL[i % Era::ALL.len()],
                gender: match i % 3 {
                    0 => Gender::Male,
                    1 => Gender::Female,
                    _ => Gender::Unknown,
                },
                aux_ranks: Default::default(),
                audio_path: None,
                cqt_path: Some(rel_cqt),
                midi_path: Some(rel_midi),
            };
            // Two synthetic boards over part of the corpus, for the
            // rank-correlation workflows.
            if i % 3 != 2 {
                record.aux_ranks.insert("SynthBoardA".into(), level);
                record.aux_ranks.insert("SynthBoardB".into(), level + (i % 2) as u32);
            }
            Ok(record)
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest_path = out_dir.join("manifest.jsonl");
    save_manifest(&manifest_path, &records)?;

    Ok(ToyCorpus {
        manifest_path,
        features_dir,
        midi_dir,
        records,
    })
}

/// Onsets per second of a rasterized roll.
#[cfg(test)]
pub(crate) fn onsets_per_second(roll: &crate::features::FeatureTensor) -> f64 {
    let onsets: f32 = roll.data.slice(ndarray::s![.., .., 1]).sum();
    onsets as f64 / roll.duration_s()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{load_midi_notes, read_psyt};
    use crate::manifest::load_manifest;

    #[test]
    fn corpus_is_deterministic() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        generate_toy_corpus(6, 3, 7, dir_a.path()).unwrap();
        generate_toy_corpus(6, 3, 7, dir_b.path()).unwrap();
        for sub in ["manifest.jsonl", "features/toy0000.pr.psyt", "features/toy0005.cqt.psyt", "midi/toy0003.mid"] {
            let a = std::fs::read(dir_a.path().join(sub)).unwrap();
            let b = std::fs::read(dir_b.path().join(sub)).unwrap();
            assert_eq!(a, b, "{sub} differs between runs");
        }
    }

    #[test]
    fn higher_levels_have_more_onsets() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = generate_toy_corpus(6, 3, 11, dir.path()).unwrap();
        let rate_of = |level: u32| -> f64 {
            let rec = corpus
                .records
                .iter()
                .find(|r| r.difficulty.get() == level)
                .unwrap();
            let roll = read_psyt(
                corpus
                    .features_dir
                    .join(format!("{}.pr.psyt", rec.piece_id)),
            )
            .unwrap();
            onsets_per_second(&roll)
        };
        assert!(rate_of(3) > rate_of(1));
        assert!(rate_of(2) > rate_of(1));
    }

    #[test]
    fn manifest_is_balanced_and_loadable() {
        let dir = tempfile::tempdir().unwrap();
        generate_toy_corpus(9, 3, 5, dir.path()).unwrap();
        let load = load_manifest(dir.path().join("manifest.jsonl")).unwrap();
        assert_eq!(load.records.len(), 9);
        let counts: Vec<usize> = (1..=3)
            .map(|l| load.records.iter().filter(|r| r.difficulty.get() == l).count())
            .collect();
        assert_eq!(counts, vec![3, 3, 3]);
    }

    #[test]
    fn midi_round_trips_through_smf() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = generate_toy_corpus(3, 3, 2, dir.path()).unwrap();
        let rec = &corpus.records[0];
        let notes = load_midi_notes(dir.path().join(rec.midi_path.as_ref().unwrap())).unwrap();
        assert!(!notes.notes.is_empty());
        // Tick quantization at 960 ticks/s keeps timing within ~1 ms.
        let expected = synth_notes(rec.difficulty.get(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(notes.notes.len(), expected.notes.len());
        for (got, want) in notes.notes.iter().zip(&expected.notes) {
            assert_eq!(got.pitch, want.pitch);
            assert!((got.onset_s - want.onset_s).abs() < 2e-3);
            assert!((got.offset_s - want.offset_s).abs() < 2e-3);
        }
    }
}

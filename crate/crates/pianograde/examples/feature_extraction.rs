//! Feature extraction: CQT from audio, piano roll from notes, and the
//! stacked multimodal tensor, all reduced to 5 fps.
//!
//! Run with: `cargo run --example feature_extraction`

use pianograde::features::{
    compute_cqt, rasterize_piano_roll, stack_multimodal, subsample_to_5fps, CqtParams, MidiNote,
    MidiNoteList,
};

fn main() -> pianograde::Result<()> {
    let params = CqtParams::default();
    let sr = params.sample_rate as usize;

    // Two seconds of A4 + C5, the kind of signal a recording would carry.
    let audio: Vec<f32> = (0..2 * sr)
        .map(|n| {
            let t = n as f32 / sr as f32;
            0.4 * (2.0 * std::f32::consts::PI * 440.0 * t).sin()
                + 0.3 * (2.0 * std::f32::consts::PI * 523.25 * t).sin()
        })
        .collect();

    let cqt = compute_cqt(&audio, &params)?;
    println!(
        "native CQT: {} bins x {} frames at {:.3} fps",
        cqt.bins(),
        cqt.frames(),
        cqt.frame_rate
    );
    let cqt_5fps = subsample_to_5fps(&cqt)?;
    println!(
        "5 fps CQT:  {} bins x {} frames",
        cqt_5fps.bins(),
        cqt_5fps.frames()
    );

    // The same two notes, as transcription output.
    let notes = MidiNoteList::new(vec![
        MidiNote { pitch: 69, onset_s: 0.0, offset_s: 2.0 },
        MidiNote { pitch: 72, onset_s: 0.0, offset_s: 2.0 },
    ])?;
    let roll = rasterize_piano_roll(&notes, 5.0, cqt_5fps.duration_s())?;
    println!(
        "piano roll: {} bins x {} frames x {} channels (frames + onsets)",
        roll.bins(),
        roll.frames(),
        roll.channels()
    );

    let mm = stack_multimodal(&cqt_5fps, &roll)?;
    println!(
        "multimodal: {} bins x {} frames x {} channels",
        mm.bins(),
        mm.frames(),
        mm.channels()
    );

    // The loudest CQT bin should be A4: bin 48 of the 27.5 Hz-anchored scale.
    let mid = cqt_5fps.frames() / 2;
    let column = cqt_5fps.data.slice(ndarray::s![.., mid, 0]);
    let peak = column
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(bin, _)| bin)
        .unwrap();
    println!("strongest bin mid-signal: {peak} (A4 sits at 48)");
    Ok(())
}

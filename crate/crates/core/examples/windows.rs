//! Read a recording and its labels back from disk, cut ML and DL windows,
//! and split the ML windows into train/validation/test.
//!
//! `cargo run --example windows -- [dir]`

use std::path::PathBuf;

use sleeplite::ingest::{
    load_annotated, write_annotations, write_csv, ReadOptions, RecordingFormat,
};
use sleeplite::synth::{demo_night, synth_recording, SynthConfig};
use sleeplite::windowing::{generate_windows, split_dataset, WindowingConfig};

fn main() -> sleeplite::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(std::env::temp_dir, PathBuf::from);
    let synth = synth_recording("night", &demo_night(), &SynthConfig::default())?;
    let (csv, labels) = (dir.join("night.csv"), dir.join("night.labels.txt"));
    write_csv(&synth, &csv)?;
    write_annotations(&synth.annotations, &labels)?;

    let rec = load_annotated(&csv, &labels, RecordingFormat::Csv, &ReadOptions::default())?;
    println!(
        "{}: {} s at {} Hz, {} epochs",
        rec.subject_id,
        rec.samples.len() / rec.sample_rate_hz as usize,
        rec.sample_rate_hz,
        rec.annotations.len()
    );

    for cfg in [WindowingConfig::ml(), WindowingConfig::dl()] {
        let set = generate_windows(&rec, &cfg)?;
        println!(
            "{} {} s / {} s: {} windows, {} dropped",
            cfg.mode,
            cfg.window_s,
            cfg.step_s,
            set.len(),
            set.dropped.len()
        );
    }

    let set = generate_windows(&rec, &WindowingConfig::ml())?;
    let labels: Vec<_> = set.windows.iter().map(|w| w.label).collect();
    let split = split_dataset(&labels, 42)?;
    println!(
        "split train {} / validation {} / test {}",
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    Ok(())
}

//! Write a labelled synthetic night as `<dir>/night.csv` and
//! `<dir>/night.labels.txt` for the CLI.
//!
//! `cargo run --example synth_recording -- <dir> [epochs] [seed]`

use std::path::PathBuf;

use sleeplite::ingest::{write_annotations, write_csv};
use sleeplite::synth::{demo_night, random_hypnogram, synth_recording, SynthConfig};

fn main() -> sleeplite::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| ".".into()));
    let stages = match args.next().map(|s| s.parse::<usize>()) {
        Some(Ok(n)) => random_hypnogram(n, 1),
        _ => demo_night(),
    };
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    std::fs::create_dir_all(&dir)?;
    let rec = synth_recording(
        "night",
        &stages,
        &SynthConfig {
            seed,
            ..Default::default()
        },
    )?;
    write_csv(&rec, &dir.join("night.csv"))?;
    write_annotations(&rec.annotations, &dir.join("night.labels.txt"))?;
    println!(
        "{} epochs, {} samples at {} Hz in {}",
        stages.len(),
        rec.samples.len(),
        rec.sample_rate_hz,
        dir.display()
    );
    Ok(())
}

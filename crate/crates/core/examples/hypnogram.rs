//! Stage a night with the fixture CNN on DL windows, score it against the
//! labels and write the hypnogram as CSV and SVG.
//!
//! `cargo run --example hypnogram -- [dir]`

use std::path::PathBuf;

use sleeplite::eval::{compute_metrics, emit_hypnogram};
use sleeplite::qnn::fixture::build_fixture;
use sleeplite::synth::{demo_night, synth_recording, SynthConfig};
use sleeplite::windowing::{generate_windows, WindowingConfig};
use sleeplite::SleepStage;

fn main() -> sleeplite::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(std::env::temp_dir, PathBuf::from);
    let rec = synth_recording("night", &demo_night(), &SynthConfig::default())?;
    let set = generate_windows(&rec, &WindowingConfig::dl())?;
    let fx = build_fixture(7)?;
    let pred = set
        .windows
        .iter()
        .map(|w| Ok(SleepStage::ALL[sleeplite::ml::argmax(&fx.graph.infer(w.samples(&rec))?)]))
        .collect::<sleeplite::Result<Vec<_>>>()?;
    let truth: Vec<_> = set.windows.iter().map(|w| w.label).collect();

    let m = compute_metrics(&truth, &pred)?;
    println!("accuracy {:.3}, macro F1 {:.3}", m.accuracy, m.macro_f1);
    for (i, row) in m.confusion.counts.iter().enumerate() {
        println!("  {:<5} {row:?}", SleepStage::ALL[i]);
    }

    let h = emit_hypnogram(&set, &pred)?;
    h.write_csv(&dir.join("night.hypnogram.csv"))?;
    h.write_svg(&dir.join("night.hypnogram.svg"))?;
    println!(
        "{} entries every {} s, {} gaps, written to {}",
        h.entries.len(),
        h.step_s,
        h.gaps(),
        dir.display()
    );
    Ok(())
}

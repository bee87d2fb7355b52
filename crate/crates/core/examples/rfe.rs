//! Recursive feature elimination on the features of a synthetic night.
//!
//! `cargo run --example rfe -- [target]`

use sleeplite::config::Config;
use sleeplite::features::rfe::{rfe_select, RfeConfig};
use sleeplite::ml::MedianImputer;
use sleeplite::pipeline::build_feature_table;
use sleeplite::synth::{demo_night, random_hypnogram, synth_recording, SynthConfig};
use sleeplite::windowing::SplitTag;

fn main() -> sleeplite::Result<()> {
    let target = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(20);
    let nights = [
        synth_recording("a", &demo_night(), &SynthConfig::default())?,
        synth_recording(
            "b",
            &random_hypnogram(60, 3),
            &SynthConfig {
                seed: 3,
                ..SynthConfig::default()
            },
        )?,
    ];
    let data = build_feature_table(&nights, &Config::default())?;
    let (x, y) = data.table.subset(SplitTag::Train);
    println!(
        "{} training rows, {} features, target {target}",
        x.len(),
        data.table.names.len()
    );

    // undefined features (NaN) take the training median, as in training
    let x = MedianImputer::fit(&x).transform(&x);
    let sel = rfe_select(&data.table.names, &x, &y, target, 1, &RfeConfig::default())?;
    for r in &sel.trace {
        println!(
            "round {:>2}: oob {:.3}, dropped {}",
            r.round,
            r.score,
            r.dropped.len()
        );
    }
    println!("kept: {}", sel.kept_names.join(", "));
    Ok(())
}

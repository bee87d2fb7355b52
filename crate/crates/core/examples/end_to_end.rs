//! Synthetic 20-minute night through both paths: ML windows → features →
//! GBDT → test metrics, and DL windows → fixture CNN → 10-s hypnogram.

use std::time::Instant;

use sleeplite::config::Config;
use sleeplite::ml::Algo;
use sleeplite::pipeline::{build_feature_table, cnn_labelled, train_and_evaluate, Cnn};
use sleeplite::qnn::fixture::build_fixture;
use sleeplite::synth::{demo_night, synth_recording, SynthConfig};

fn main() -> sleeplite::Result<()> {
    let t0 = Instant::now();
    let cfg = Config::default();
    let stages = demo_night();
    let rec = synth_recording(
        "night",
        &stages,
        &SynthConfig {
            seed: 5,
            ..Default::default()
        },
    )?;

    let data = build_feature_table(std::slice::from_ref(&rec), &cfg)?;
    println!("{} ML windows, {} skipped", data.table.len(), data.skipped);
    let run = train_and_evaluate(&data.table, &cfg.classifier(Algo::Gbdt))?;
    let m = &run.test_metrics;
    println!(
        "GBDT test accuracy {:.3}, macro F1 {:.3}; majority ({}) {:.3}",
        m.accuracy, m.macro_f1, run.majority, run.majority_accuracy
    );
    print!("{}", m.confusion.to_csv());

    let fixture = build_fixture(7)?;
    let (set, pred, hyp) = cnn_labelled(Cnn::Float(&fixture.graph), &rec, &cfg.dl_window)?;
    let agree = set
        .labels()
        .iter()
        .zip(&pred)
        .filter(|(a, b)| a == b)
        .count();
    println!(
        "CNN: {} windows, {} hypnogram rows at {} s, {} gaps, accuracy {:.3}",
        set.len(),
        hyp.entries.len(),
        hyp.step_s,
        hyp.gaps(),
        agree as f64 / set.len() as f64
    );
    println!("elapsed {:.1} s", t0.elapsed().as_secs_f64());
    Ok(())
}

//! HRV and EDR features of one five-minute window, then the whole night in
//! parallel.

use std::time::Instant;

use sleeplite::features::{extract_window_features, extract_windowset, FeatureConfig, Flag};
use sleeplite::synth::{demo_night, synth_recording, SynthConfig};
use sleeplite::windowing::{generate_windows, WindowingConfig};

fn main() -> sleeplite::Result<()> {
    let rec = synth_recording("night", &demo_night(), &SynthConfig::default())?;
    let set = generate_windows(&rec, &WindowingConfig::ml())?;
    let cfg = FeatureConfig::default();

    let w = &set.windows[0];
    let v = extract_window_features("w0", w.samples(&rec), rec.sample_rate_hz, &cfg)?;
    println!("window 0 ({}): {} features", w.label, v.names.len());
    // names are `<scale>.<family>.<feature>`, the full window last
    for short in ["MeanNN", "RMSSD", "LFHF", "SD1", "DFA_alpha1", "SampEn"] {
        let suffix = format!(".{short}");
        if let Some(i) = v.names.iter().rposition(|n| n.ends_with(&suffix)) {
            println!("  {:<28} {:>10.4}", v.names[i], v.values[i]);
        }
    }
    let undefined = v.flags.iter().filter(|f| **f != Flag::Ok).count();
    println!("  {undefined} flagged values");

    let t0 = Instant::now();
    let all = extract_windowset(&rec, &set, &cfg);
    println!(
        "{} windows extracted, {} skipped in {:.2?}",
        all.vectors.len(),
        all.skipped.len(),
        t0.elapsed()
    );
    Ok(())
}

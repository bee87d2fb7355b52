//! Save the float and integer fixture models as SLCW files, load them back
//! and check the bytes and predictions survive.

use sleeplite::qnn::fixture::{build_fixture, fixture_inputs};
use sleeplite::qnn::{calibrate, load_model, quantize_model, save_model, ModelFile};

fn main() -> sleeplite::Result<()> {
    let fx = build_fixture(7)?;
    let calib: Vec<Vec<f64>> = fixture_inputs(32, 1).into_iter().map(|x| x.0).collect();
    let q = quantize_model(&fx.graph, &calibrate(&fx.graph, &calib)?)?;
    let dir = std::env::temp_dir();
    let x = &fixture_inputs(1, 2)[0].0;

    for (name, m) in [
        ("float", ModelFile::Float(fx.graph.clone())),
        ("int8", ModelFile::Quantized(q)),
    ] {
        let path = dir.join(format!("fixture.{name}.slcw"));
        save_model(&m, &path)?;
        let back = load_model(&path)?;
        let same = std::fs::read(&path)? == sleeplite::qnn::format::to_bytes(&back);
        let probs = match &back {
            ModelFile::Float(g) => g.infer(x)?,
            ModelFile::Quantized(q) => q.infer(x)?,
        };
        println!(
            "{name:<5} {:>7} bytes, byte-identical {same}, first window {:.3?}",
            std::fs::metadata(&path)?.len(),
            probs
        );
    }
    Ok(())
}

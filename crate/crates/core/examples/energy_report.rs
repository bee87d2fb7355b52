//! Per-layer energy of the default SleepLiteCNN in fp32 and int8 at 45 nm,
//! and both totals scaled to 180 nm.

use sleeplite::energy::{
    estimate_energy, profile_ops, profile_quantized, scale_to_node, EnergyTable, Precision,
};
use sleeplite::qnn::fixture::{build_fixture, fixture_inputs};
use sleeplite::qnn::{calibrate, quantize_model};

fn main() -> sleeplite::Result<()> {
    let table = EnergyTable::default();
    let fx = build_fixture(7)?;
    let calib: Vec<Vec<f64>> = fixture_inputs(32, 99).into_iter().map(|(x, _)| x).collect();
    let q = quantize_model(&fx.graph, &calibrate(&fx.graph, &calib)?)?;

    let fp = estimate_energy(&profile_ops(&fx.graph, Precision::Float32), &table)?;
    let i8 = estimate_energy(&profile_quantized(&q), &table)?;
    print!("{}", fp.to_csv());
    print!("{}", i8.to_csv());
    println!("fp32/int8 ratio: {:.2}", fp.total_uj / i8.total_uj);
    for r in [&fp, &i8] {
        let s = scale_to_node(r, 180, &table)?;
        println!("{} at 180 nm: {:.4} mJ", r.precision, s.total_uj / 1000.0);
    }
    Ok(())
}

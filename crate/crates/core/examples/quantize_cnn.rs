//! Build the fixture SleepLiteCNN, calibrate and quantise it, then compare
//! the integer path with the float path on fresh synthetic windows.

use sleeplite::ml::argmax;
use sleeplite::qnn::fixture::{build_fixture, fixture_inputs};
use sleeplite::qnn::{calibrate, quantize_model};

fn main() -> sleeplite::Result<()> {
    let fx = build_fixture(7)?;
    println!(
        "params {}, fitted accuracy {:.3}",
        fx.graph.param_count(),
        fx.train_accuracy
    );
    let calib: Vec<Vec<f64>> = fixture_inputs(32, 99).into_iter().map(|(x, _)| x).collect();
    let q = quantize_model(&fx.graph, &calibrate(&fx.graph, &calib)?)?;
    println!(
        "input exponent {}, edge exponents {:?}",
        q.input_exp, q.edge_exps
    );

    let test = fixture_inputs(200, 1234);
    let (mut agree, mut correct, mut worst) = (0, 0, 0.0f64);
    let head = fx.graph.layers.len() - 1;
    for (x, stage) in &test {
        let edges = fx.graph.forward_edges(x)?;
        let zf = &edges[head];
        let zq = q.logits(x)?;
        worst = zf
            .iter()
            .zip(&zq)
            .fold(worst, |m, (a, b)| m.max((a - b).abs()));
        agree += usize::from(argmax(zf) == argmax(&zq));
        correct += usize::from(argmax(&zq) == stage.index());
    }
    let n = test.len() as f64;
    println!(
        "argmax agreement {:.3}, int8 accuracy {:.3}, max logit error {worst:.4}",
        agree as f64 / n,
        correct as f64 / n
    );
    Ok(())
}

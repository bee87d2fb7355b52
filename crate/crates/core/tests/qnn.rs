use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sleeplite::qnn::fixture::{build_fixture, fixture_inputs};
use sleeplite::qnn::format::{from_bytes, to_bytes};
use sleeplite::qnn::sleeplite::PARAM_BAND;
use sleeplite::qnn::{
    build_sleeplitecnn, calibrate, load_model, quantize_model, save_model, Layer, ModelFile, Shape,
    SleepLiteCnnConfig,
};
use sleeplite::{Error, SleepStage};

mod common;
use common::qnn::*;

#[test]
fn integer_path_matches_scalar_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for model in 0..100 {
        let g = random_graph(&mut rng);
        let n = g.input_shape.size();
        let calib: Vec<Vec<f64>> = (0..8).map(|_| random_input(&mut rng, n)).collect();
        let q = quantize_model(&g, &calibrate(&g, &calib).unwrap()).unwrap();
        for _ in 0..10 {
            // wider than the calibration so saturation is exercised too
            let x: Vec<f64> = random_input(&mut rng, n).iter().map(|v| v * 1.5).collect();
            let got = q.forward_int(&q.quantize_input(&x).unwrap());
            match oracle_edges(&q, &x) {
                Some(edges) => {
                    let (v, e) = got.unwrap();
                    assert_eq!(&v, edges.last().unwrap(), "model {model}");
                    assert_eq!(e, *q.edge_exps.last().unwrap());
                }
                None => assert!(
                    matches!(got, Err(Error::AccumulatorOverflow { .. })),
                    "model {model}"
                ),
            }
        }
    }
}

#[test]
fn rounding_error_stays_inside_the_propagated_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..40 {
        let g = random_graph(&mut rng);
        let n = g.input_shape.size();
        let calib: Vec<Vec<f64>> = (0..8).map(|_| random_input(&mut rng, n)).collect();
        let q = quantize_model(&g, &calibrate(&g, &calib).unwrap()).unwrap();
        for x in &calib {
            check_propagation_bound(&q, x);
        }
    }
}

#[test]
fn fixture_agrees_with_float_path() {
    let fx = build_fixture(7).unwrap();
    let g = &fx.graph;
    let calib: Vec<Vec<f64>> = fixture_inputs(32, 99).into_iter().map(|(x, _)| x).collect();
    let q = quantize_model(g, &calibrate(g, &calib).unwrap()).unwrap();
    let inputs = fixture_inputs(1000, 2024);
    let rows: Vec<(usize, usize, f64)> = {
        use rayon::prelude::*;
        inputs
            .par_iter()
            .map(|(x, _)| {
                let pf = g.infer(x).unwrap();
                let pq = q.infer(x).unwrap();
                let zf = g.forward_edges(x).unwrap();
                let zf = &zf[zf.len() - 2];
                let zq = q.logits(x).unwrap();
                let err = zf
                    .iter()
                    .zip(&zq)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                (sleeplite::ml::argmax(&pf), sleeplite::ml::argmax(&pq), err)
            })
            .collect()
    };
    let agree = rows.iter().filter(|r| r.0 == r.1).count() as f64 / rows.len() as f64;
    let worst = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    println!("fixture argmax agreement {agree:.3} over 1000 inputs, max logit error {worst:.3}");
    assert!(agree >= 0.95);
    let correct = inputs
        .iter()
        .zip(&rows)
        .filter(|((_, s), r)| SleepStage::ALL[r.1] == *s)
        .count();
    println!(
        "int8 accuracy on fresh windows {:.3}",
        correct as f64 / 1000.0
    );
    for (x, _) in inputs.iter().take(8) {
        check_propagation_bound(&q, x);
    }
}

#[test]
fn default_cnn_has_the_expected_size() {
    let g = build_sleeplitecnn(&SleepLiteCnnConfig::default()).unwrap();
    assert_eq!(g.param_count(), 47_606);
    assert!((PARAM_BAND.0..=PARAM_BAND.1).contains(&g.param_count()));
    assert_eq!(g.input_shape, Shape::new(3840, 1));
    assert_eq!(g.output_shape(), Shape::new(1, 4));
    let tiny = SleepLiteCnnConfig {
        hidden: 2,
        ..SleepLiteCnnConfig::default()
    };
    assert!(build_sleeplitecnn(&tiny).is_err());
}

#[test]
fn model_files_round_trip_byte_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dir = tempfile::tempdir().unwrap();
    let mut depthwise_seen = false;
    for i in 0..20 {
        let g = random_graph(&mut rng);
        depthwise_seen |= g
            .layers
            .iter()
            .any(|l| matches!(l, Layer::DepthwiseConv1d { .. }));
        let calib: Vec<Vec<f64>> = (0..4)
            .map(|_| random_input(&mut rng, g.input_shape.size()))
            .collect();
        let q = quantize_model(&g, &calibrate(&g, &calib).unwrap()).unwrap();
        for m in [ModelFile::Float(g), ModelFile::Quantized(q)] {
            let bytes = to_bytes(&m);
            let back = from_bytes(&bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(to_bytes(&back), bytes);
            let p = dir.path().join(format!("m{i}.slcw"));
            save_model(&m, &p).unwrap();
            assert_eq!(std::fs::read(&p).unwrap(), bytes);
            assert_eq!(load_model(&p).unwrap(), m);
        }
    }
    assert!(depthwise_seen);
}

#[test]
fn bad_headers_are_rejected() {
    let g = build_sleeplitecnn(&SleepLiteCnnConfig::default()).unwrap();
    let bytes = to_bytes(&ModelFile::Float(g));
    let mut bad = bytes.clone();
    bad[..4].copy_from_slice(b"SLCX");
    assert!(matches!(from_bytes(&bad), Err(Error::BadMagic)));
    let mut v = bytes.clone();
    v[4..6].copy_from_slice(&255u16.to_le_bytes());
    assert!(matches!(
        from_bytes(&v),
        Err(Error::UnsupportedVersion(255))
    ));
    assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
    let mut extra = bytes;
    extra.push(0);
    assert!(from_bytes(&extra).is_err());
}

#[test]
fn wrong_input_length_is_an_error() {
    let g = build_sleeplitecnn(&SleepLiteCnnConfig::default()).unwrap();
    assert!(matches!(g.infer(&[0.0; 100]), Err(Error::ShapeMismatch(_))));
    let calib = vec![vec![0.1; 3840]];
    let q = quantize_model(&g, &calibrate(&g, &calib).unwrap()).unwrap();
    assert!(matches!(
        q.infer(&[0.0; 3839]),
        Err(Error::ShapeMismatch(_))
    ));
    assert!(matches!(calibrate(&g, &[]), Err(Error::EmptyCalibration)));
}

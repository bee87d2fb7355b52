//! A deterministic "trained" SleepLiteCNN for tests and demos.
//!
//! Convolutional weights keep their seeded He initialisation. The input
//! batch norm takes its statistics from synthetic ECG, the first hidden units
//! average each conv channel over time (global average pooling written as a
//! dense layer), and the output layer is fitted by logistic regression on
//! the penultimate activations of labelled synthetic windows, computed both
//! in float and with 8-bit weights so the head tolerates weight rounding.
//! Averaging keeps the beat-rate signal, so no training framework is needed.

use rayon::prelude::*;

use super::quant::{calibrate, quantize_model};
use super::sleeplite::{build_sleeplitecnn, SleepLiteCnnConfig};
use super::{Layer, LayerGraph};
use crate::error::Result;
use crate::ingest::SleepStage;
use crate::ml::logistic::LogisticModel;
use crate::ml::preprocess::Standardizer;
use crate::synth::{synth_epoch, SynthConfig};

/// `n` labelled 30-s windows at 128 Hz cycling through the stages.
pub fn fixture_inputs(n: usize, seed: u64) -> Vec<(Vec<f64>, SleepStage)> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let stage = SleepStage::ALL[i % 4];
            let cfg = SynthConfig {
                seed: seed.wrapping_mul(1_000_003).wrapping_add(i as u64),
                ..SynthConfig::default()
            };
            (synth_epoch(stage, &cfg), stage)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub graph: LayerGraph,
    /// Float-path accuracy on the windows the output layer was fitted on.
    pub train_accuracy: f64,
}

pub fn build_fixture(seed: u64) -> Result<Fixture> {
    let cfg = SleepLiteCnnConfig {
        init_seed: seed,
        ..SleepLiteCnnConfig::default()
    };
    let mut g = build_sleeplitecnn(&cfg)?;
    let data = fixture_inputs(160, seed ^ 0x5EED);

    let all: Vec<f64> = data.iter().flat_map(|(x, _)| x.iter().copied()).collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / all.len() as f64;
    if let Layer::BatchNorm {
        mean: m, var: v, ..
    } = &mut g.layers[0]
    {
        m[0] = mean as f32;
        v[0] = var as f32;
    }

    let channels = cfg.filters[2];
    if let Some(Layer::Dense {
        in_dim,
        out_dim,
        weights,
        ..
    }) = g
        .layers
        .iter_mut()
        .find(|l| matches!(l, Layer::Dense { .. }))
    {
        // a power-of-two divisor keeps these weights exact after quantisation
        let div = (*in_dim / channels).next_power_of_two() as f32;
        for u in 0..channels.min(*out_dim) {
            let row = &mut weights[u * *in_dim..(u + 1) * *in_dim];
            for (j, w) in row.iter_mut().enumerate() {
                *w = if j % channels == u { 1.0 / div } else { 0.0 };
            }
        }
    }

    // input of the output dense layer; the same index in the folded graph
    // since batch norm and dropout each remove one layer before it
    let head = g.layers.len() - 2;
    let fake_quant = {
        let calib: Vec<Vec<f64>> = data.iter().step_by(5).map(|(x, _)| x.clone()).collect();
        quantize_model(&g, &calibrate(&g, &calib)?)?.dequantized_graph()
    };
    let q_head = fake_quant.layers.len() - 2;
    let mut feats: Vec<Vec<f64>> = data
        .par_iter()
        .map(|(x, _)| g.forward_edges(x).map(|mut e| e.swap_remove(head)))
        .collect::<Result<_>>()?;
    let q_feats: Vec<Vec<f64>> = data
        .par_iter()
        .map(|(x, _)| {
            fake_quant
                .forward_edges(x)
                .map(|mut e| e.swap_remove(q_head))
        })
        .collect::<Result<_>>()?;
    feats.extend(q_feats);
    let y: Vec<usize> = data.iter().chain(&data).map(|(_, s)| s.index()).collect();
    // one common scale: the l2 penalty then limits noise gain uniformly
    let mut scaler = Standardizer::fit(&feats);
    let common = scaler.scales.iter().sum::<f64>() / scaler.scales.len() as f64;
    scaler.scales.iter_mut().for_each(|s| *s = common);
    let lr = LogisticModel::fit(&scaler.transform(&feats), &y, 0.5, 400, 1e-2);
    // fold the standardisation into the dense layer
    if let Layer::Dense {
        in_dim,
        weights,
        bias,
        ..
    } = &mut g.layers[head]
    {
        for (c, row) in lr.weights.iter().enumerate() {
            let mut b = lr.bias[c];
            for j in 0..*in_dim {
                let w = row[j] / scaler.scales[j];
                b -= w * scaler.means[j];
                weights[c * *in_dim + j] = w as f32;
            }
            bias[c] = b as f32;
        }
    }
    let correct = data
        .par_iter()
        .map(|(x, s)| {
            g.infer(x)
                .map(|p| usize::from(crate::ml::argmax(&p) == s.index()))
        })
        .collect::<Result<Vec<_>>>()?;
    let train_accuracy = correct.iter().sum::<usize>() as f64 / data.len() as f64;
    Ok(Fixture {
        graph: g,
        train_accuracy,
    })
}

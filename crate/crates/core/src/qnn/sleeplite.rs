//! SleepLiteCNN: input batch norm, three conv/relu/max-pool blocks with 5, 45
//! and 25 filters, then dense(hidden) → relu → dropout → dense(4) → softmax.
//!
//! Kernel sizes, pool size and hidden width are free parameters; the
//! defaults (7/5/5, pool 4, hidden 28) give 47,606 trainable parameters on
//! a 3840-sample input.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Layer, LayerGraph, Shape};
use crate::error::{Error, Result};

pub const PARAM_BAND: (usize, usize) = (45_000, 49_000);

#[derive(Debug, Clone, PartialEq)]
pub struct SleepLiteCnnConfig {
    pub input_len: usize,
    pub filters: [usize; 3],
    pub kernels: [usize; 3],
    pub pool: usize,
    pub hidden: usize,
    pub dropout: f32,
    pub classes: usize,
    /// Seed for the He-normal weight initialisation.
    pub init_seed: u64,
}

impl Default for SleepLiteCnnConfig {
    fn default() -> Self {
        Self {
            input_len: 3840,
            filters: [5, 45, 25],
            kernels: [7, 5, 5],
            pool: 4,
            hidden: 28,
            dropout: 0.5,
            classes: 4,
            init_seed: 0,
        }
    }
}

fn he(rng: &mut ChaCha8Rng, fan_in: usize, n: usize) -> Vec<f32> {
    let d = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive sd");
    (0..n).map(|_| d.sample(rng) as f32).collect()
}

/// Build the graph with He-initialised weights and identity batch norm.
/// Errors when the parameter count leaves [`PARAM_BAND`].
pub fn build_sleeplitecnn(cfg: &SleepLiteCnnConfig) -> Result<LayerGraph> {
    if cfg.pool == 0
        || cfg.hidden == 0
        || cfg.classes == 0
        || cfg.filters.contains(&0)
        || cfg.kernels.contains(&0)
    {
        return Err(Error::InvalidConfig(
            "SleepLiteCNN sizes must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.init_seed);
    let mut layers = vec![Layer::BatchNorm {
        gamma: vec![1.0],
        beta: vec![0.0],
        mean: vec![0.0],
        var: vec![1.0],
        eps: 1e-3,
    }];
    let mut shape = Shape::new(cfg.input_len, 1);
    for (&f, &k) in cfg.filters.iter().zip(&cfg.kernels) {
        let conv = Layer::Conv1d {
            in_ch: shape.ch,
            out_ch: f,
            kernel: k,
            stride: 1,
            weights: he(&mut rng, k * shape.ch, f * k * shape.ch),
            bias: vec![0.0; f],
        };
        let pool = Layer::MaxPool1d {
            size: cfg.pool,
            stride: cfg.pool,
        };
        shape = conv
            .output_shape(shape)
            .and_then(|s| pool.output_shape(s))
            .map_err(|e| {
                Error::InvalidConfig(format!(
                    "input length {} too short for the conv stack: {e}",
                    cfg.input_len
                ))
            })?;
        layers.extend([conv, Layer::Relu, pool]);
    }
    let flat = shape.size();
    layers.extend([
        Layer::Flatten,
        Layer::Dense {
            in_dim: flat,
            out_dim: cfg.hidden,
            weights: he(&mut rng, flat, flat * cfg.hidden),
            bias: vec![0.0; cfg.hidden],
        },
        Layer::Relu,
        Layer::Dropout { rate: cfg.dropout },
        Layer::Dense {
            in_dim: cfg.hidden,
            out_dim: cfg.classes,
            weights: he(&mut rng, cfg.hidden, cfg.hidden * cfg.classes),
            bias: vec![0.0; cfg.classes],
        },
        Layer::Softmax,
    ]);
    let g = LayerGraph::new(Shape::new(cfg.input_len, 1), cfg.classes, layers)?;
    let n = g.param_count();
    if !(PARAM_BAND.0..=PARAM_BAND.1).contains(&n) {
        return Err(Error::InvalidConfig(format!(
            "SleepLiteCNN config has {n} parameters, outside [{}, {}]",
            PARAM_BAND.0, PARAM_BAND.1
        )));
    }
    Ok(g)
}

/// Conv filter counts in graph order.
pub fn conv_filters(g: &LayerGraph) -> Vec<usize> {
    g.layers
        .iter()
        .filter_map(|l| match l {
            Layer::Conv1d { out_ch, .. } => Some(*out_ch),
            _ => None,
        })
        .collect()
}

//! 1D layer-graph inference.
//!
//! A [`LayerGraph`] is a straight chain of layers over channels-last
//! activations (`[time][channel]`, flattened). Weights are stored as `f32`
//! and the float reference path computes in `f64`. [`quant`] folds batch
//! norms, calibrates activation ranges and runs the integer-only 8-bit path;
//! [`format`] reads and writes the `SLCW` weight container.

pub mod fixture;
pub mod format;
pub mod probe;
pub mod quant;
pub mod sleeplite;

use std::fmt;

use crate::error::{Error, Result};

pub use format::{load_model, save_model, ModelFile};
pub use probe::{check_probes, ProbeCheck, ProbeSet};
pub use quant::{calibrate, infer_quantized, quantize_model, Calibration, QuantizedModel};
pub use sleeplite::{build_sleeplitecnn, SleepLiteCnnConfig};

/// Activation shape: `len` time steps of `ch` channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub len: usize,
    pub ch: usize,
}

impl Shape {
    pub const fn new(len: usize, ch: usize) -> Self {
        Self { len, ch }
    }

    pub fn size(&self) -> usize {
        self.len * self.ch
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.len, self.ch)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    BatchNorm {
        gamma: Vec<f32>,
        beta: Vec<f32>,
        mean: Vec<f32>,
        var: Vec<f32>,
        eps: f32,
    },
    /// Valid padding. Weights are `[out][kernel][in]`.
    Conv1d {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        weights: Vec<f32>,
        bias: Vec<f32>,
    },
    /// One filter per channel, valid padding. Weights are `[ch][kernel]`.
    DepthwiseConv1d {
        ch: usize,
        kernel: usize,
        stride: usize,
        weights: Vec<f32>,
        bias: Vec<f32>,
    },
    MaxPool1d {
        size: usize,
        stride: usize,
    },
    Relu,
    /// Training-time marker; identity at inference.
    Dropout {
        rate: f32,
    },
    Flatten,
    /// Weights are `[out][in]`.
    Dense {
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f32>,
        bias: Vec<f32>,
    },
    Softmax,
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::BatchNorm { .. } => "batchnorm",
            Layer::Conv1d { .. } => "conv1d",
            Layer::DepthwiseConv1d { .. } => "depthwise_conv1d",
            Layer::MaxPool1d { .. } => "maxpool1d",
            Layer::Relu => "relu",
            Layer::Dropout { .. } => "dropout",
            Layer::Flatten => "flatten",
            Layer::Dense { .. } => "dense",
            Layer::Softmax => "softmax",
        }
    }

    /// Trainable parameters (batch-norm running statistics excluded).
    pub fn param_count(&self) -> usize {
        match self {
            Layer::BatchNorm { gamma, beta, .. } => gamma.len() + beta.len(),
            Layer::Conv1d { weights, bias, .. }
            | Layer::DepthwiseConv1d { weights, bias, .. }
            | Layer::Dense { weights, bias, .. } => weights.len() + bias.len(),
            _ => 0,
        }
    }

    pub fn is_weighted(&self) -> bool {
        matches!(
            self,
            Layer::Conv1d { .. } | Layer::DepthwiseConv1d { .. } | Layer::Dense { .. }
        )
    }

    /// Output shape for the given input, checking weight sizes.
    pub fn output_shape(&self, s: Shape) -> Result<Shape> {
        let bad = |msg: String| Err(Error::ShapeMismatch(format!("{}: {msg}", self.kind())));
        let conv_len = |len: usize, k: usize, stride: usize| {
            if k == 0 || stride == 0 || len < k {
                None
            } else {
                Some((len - k) / stride + 1)
            }
        };
        match self {
            Layer::BatchNorm {
                gamma,
                beta,
                mean,
                var,
                ..
            } => {
                let c = s.ch;
                if [gamma.len(), beta.len(), mean.len(), var.len()]
                    .iter()
                    .any(|&n| n != c)
                {
                    return bad(format!("parameters must have {c} channels"));
                }
                Ok(s)
            }
            Layer::Conv1d {
                in_ch,
                out_ch,
                kernel,
                stride,
                weights,
                bias,
            } => {
                if s.ch != *in_ch {
                    return bad(format!("expects {in_ch} input channels, got {}", s.ch));
                }
                if weights.len() != out_ch * kernel * in_ch || bias.len() != *out_ch {
                    return bad("weight tensor sizes disagree with declared shape".into());
                }
                match conv_len(s.len, *kernel, *stride) {
                    Some(l) => Ok(Shape::new(l, *out_ch)),
                    None => bad(format!(
                        "kernel {kernel} stride {stride} does not fit length {}",
                        s.len
                    )),
                }
            }
            Layer::DepthwiseConv1d {
                ch,
                kernel,
                stride,
                weights,
                bias,
            } => {
                if s.ch != *ch {
                    return bad(format!("expects {ch} channels, got {}", s.ch));
                }
                if weights.len() != ch * kernel || bias.len() != *ch {
                    return bad("weight tensor sizes disagree with declared shape".into());
                }
                match conv_len(s.len, *kernel, *stride) {
                    Some(l) => Ok(Shape::new(l, *ch)),
                    None => bad(format!(
                        "kernel {kernel} stride {stride} does not fit length {}",
                        s.len
                    )),
                }
            }
            Layer::MaxPool1d { size, stride } => match conv_len(s.len, *size, *stride) {
                Some(l) => Ok(Shape::new(l, s.ch)),
                None => bad(format!(
                    "pool {size} stride {stride} does not fit length {}",
                    s.len
                )),
            },
            Layer::Relu | Layer::Dropout { .. } => Ok(s),
            Layer::Flatten => Ok(Shape::new(1, s.size())),
            Layer::Dense {
                in_dim,
                out_dim,
                weights,
                bias,
            } => {
                if s.len != 1 || s.ch != *in_dim {
                    return bad(format!("expects a flat input of {in_dim}, got {s}"));
                }
                if weights.len() != in_dim * out_dim || bias.len() != *out_dim {
                    return bad("weight tensor sizes disagree with declared shape".into());
                }
                Ok(Shape::new(1, *out_dim))
            }
            Layer::Softmax => {
                if s.len != 1 {
                    return bad(format!("expects a flat input, got {s}"));
                }
                Ok(s)
            }
        }
    }

    fn tensors(&self) -> Vec<&[f32]> {
        match self {
            Layer::BatchNorm {
                gamma,
                beta,
                mean,
                var,
                ..
            } => vec![gamma, beta, mean, var],
            Layer::Conv1d { weights, bias, .. }
            | Layer::DepthwiseConv1d { weights, bias, .. }
            | Layer::Dense { weights, bias, .. } => vec![weights, bias],
            _ => Vec::new(),
        }
    }
}

/// A shape-checked chain of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGraph {
    pub input_shape: Shape,
    pub class_count: usize,
    pub layers: Vec<Layer>,
    /// `shapes[i]` is the input of layer `i`; the last entry is the output.
    pub shapes: Vec<Shape>,
}

impl LayerGraph {
    pub fn new(input_shape: Shape, class_count: usize, layers: Vec<Layer>) -> Result<Self> {
        let mut shapes = vec![input_shape];
        for (i, l) in layers.iter().enumerate() {
            let s = l
                .output_shape(shapes[i])
                .map_err(|e| Error::ShapeMismatch(format!("layer {i}: {e}")))?;
            shapes.push(s);
        }
        let out = *shapes.last().expect("input shape");
        if out != Shape::new(1, class_count) {
            return Err(Error::ShapeMismatch(format!(
                "graph output {out} is not ({}, {class_count}) classes",
                1
            )));
        }
        for (i, l) in layers.iter().enumerate() {
            if let Layer::Softmax = l {
                if i + 1 != layers.len() {
                    return Err(Error::ShapeMismatch(
                        "softmax must be the last layer".into(),
                    ));
                }
            }
        }
        Ok(Self {
            input_shape,
            class_count,
            layers,
            shapes,
        })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn output_shape(&self) -> Shape {
        *self.shapes.last().expect("non-empty")
    }

    pub fn check_finite(&self) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            if l.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
                return Err(Error::NonFinite(format!(
                    "layer {i} ({}) has non-finite weights",
                    l.kind()
                )));
            }
        }
        Ok(())
    }

    /// Activations of every edge: input first, graph output last.
    pub fn forward_edges(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        if input.len() != self.input_shape.size() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} values, graph expects {}",
                input.len(),
                self.input_shape
            )));
        }
        let mut edges = Vec::with_capacity(self.layers.len() + 1);
        edges.push(input.to_vec());
        for (i, l) in self.layers.iter().enumerate() {
            let y = apply_float(l, &edges[i], self.shapes[i]);
            edges.push(y);
        }
        Ok(edges)
    }

    /// Graph output (class probabilities when the graph ends in softmax).
    pub fn infer(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_edges(input)?.pop().expect("output edge"))
    }
}

pub fn infer_float(graph: &LayerGraph, input: &[f64]) -> Result<Vec<f64>> {
    graph.infer(input)
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn apply_float(layer: &Layer, x: &[f64], s: Shape) -> Vec<f64> {
    match layer {
        Layer::BatchNorm {
            gamma,
            beta,
            mean,
            var,
            eps,
        } => {
            let c = s.ch;
            x.iter()
                .enumerate()
                .map(|(i, v)| {
                    let k = i % c;
                    gamma[k] as f64 * (v - mean[k] as f64) / (var[k] as f64 + *eps as f64).sqrt()
                        + beta[k] as f64
                })
                .collect()
        }
        Layer::Conv1d {
            in_ch,
            out_ch,
            kernel,
            stride,
            weights,
            bias,
        } => {
            let out_len = (s.len - kernel) / stride + 1;
            let w: Vec<f64> = weights.iter().map(|&v| v as f64).collect();
            let mut y = vec![0.0; out_len * out_ch];
            for t in 0..out_len {
                let base = t * stride * in_ch;
                let window = &x[base..base + kernel * in_ch];
                for o in 0..*out_ch {
                    let wo = &w[o * kernel * in_ch..(o + 1) * kernel * in_ch];
                    let acc: f64 = wo.iter().zip(window).map(|(a, b)| a * b).sum();
                    y[t * out_ch + o] = acc + bias[o] as f64;
                }
            }
            y
        }
        Layer::DepthwiseConv1d {
            ch,
            kernel,
            stride,
            weights,
            bias,
        } => {
            let out_len = (s.len - kernel) / stride + 1;
            let mut y = vec![0.0; out_len * ch];
            for t in 0..out_len {
                for c in 0..*ch {
                    let mut acc = bias[c] as f64;
                    for j in 0..*kernel {
                        acc += weights[c * kernel + j] as f64 * x[(t * stride + j) * ch + c];
                    }
                    y[t * ch + c] = acc;
                }
            }
            y
        }
        Layer::MaxPool1d { size, stride } => {
            let out_len = (s.len - size) / stride + 1;
            let mut y = vec![f64::NEG_INFINITY; out_len * s.ch];
            for t in 0..out_len {
                for j in 0..*size {
                    for c in 0..s.ch {
                        let v = x[(t * stride + j) * s.ch + c];
                        if v > y[t * s.ch + c] {
                            y[t * s.ch + c] = v;
                        }
                    }
                }
            }
            y
        }
        Layer::Relu => x.iter().map(|v| v.max(0.0)).collect(),
        Layer::Dropout { .. } | Layer::Flatten => x.to_vec(),
        Layer::Dense {
            in_dim,
            out_dim,
            weights,
            bias,
        } => (0..*out_dim)
            .map(|o| {
                let wo = &weights[o * in_dim..(o + 1) * in_dim];
                bias[o] as f64 + wo.iter().zip(x).map(|(a, b)| *a as f64 * b).sum::<f64>()
            })
            .collect(),
        Layer::Softmax => softmax(x),
    }
}

//! Integer-only 8-bit inference with power-of-two scales.
//!
//! Every tensor `t` is stored as `q = clamp(round_half_even(t / 2^e), -128,
//! 127)` with `e = ceil(log2(max|t| / 127))` clamped to `[-16, 16]`; an
//! all-zero tensor gets `e = -16`. Biases are stored as `i32` at the
//! accumulator scale `2^(e_in + e_w)`. A weighted layer accumulates in a
//! checked `i32` and requantises to its output exponent with a rounding
//! shift. The last weighted layer keeps its accumulator, which is
//! dequantised so that softmax runs in floating point.
//!
//! Batch norms are folded first: backwards into a directly preceding
//! conv/dense, otherwise forwards into a directly following one (exact for
//! valid padding). Activation exponents come from a [`Calibration`] of the
//! original graph; `edge_map` ties folded edges to original ones.

use super::{softmax, Layer, LayerGraph, Shape};
use crate::error::{Error, Result};

pub const MIN_EXP: i32 = -16;
pub const MAX_EXP: i32 = 16;

/// Smallest power-of-two exponent whose int8 range covers `max_abs`.
pub fn scale_exponent(max_abs: f64) -> i32 {
    if !(max_abs > 0.0) {
        return MIN_EXP;
    }
    let e = (max_abs / 127.0).log2().ceil() as i32;
    e.clamp(MIN_EXP, MAX_EXP)
}

pub fn quantize_value(x: f64, exp: i32) -> i8 {
    (x / 2f64.powi(exp)).round_ties_even().clamp(-128.0, 127.0) as i8
}

pub fn dequantize_value(q: i64, exp: i32) -> f64 {
    q as f64 * 2f64.powi(exp)
}

/// `acc * 2^-shift` rounded half to even, for any shift sign.
pub fn rounding_shift(acc: i64, shift: i32) -> i64 {
    if shift <= 0 {
        return acc << (-shift).min(62);
    }
    if shift >= 63 {
        return 0;
    }
    let q = acc >> shift;
    let rem = acc - (q << shift);
    let half = 1i64 << (shift - 1);
    if rem > half || (rem == half && q & 1 == 1) {
        q + 1
    } else {
        q
    }
}

fn saturate_i8(v: i64) -> i8 {
    v.clamp(-128, 127) as i8
}

/// Running max-abs per edge of a float graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub max_abs: Vec<f64>,
    pub samples: usize,
}

impl Calibration {
    pub fn new(graph: &LayerGraph) -> Self {
        Self {
            max_abs: vec![0.0; graph.layers.len() + 1],
            samples: 0,
        }
    }

    pub fn observe(&mut self, graph: &LayerGraph, input: &[f64]) -> Result<()> {
        for (m, e) in self.max_abs.iter_mut().zip(graph.forward_edges(input)?) {
            *m = e.iter().fold(*m, |a, v| a.max(v.abs()));
        }
        self.samples += 1;
        Ok(())
    }

    pub fn exponents(&self) -> Vec<i32> {
        self.max_abs.iter().map(|&m| scale_exponent(m)).collect()
    }
}

pub fn calibrate(graph: &LayerGraph, inputs: &[Vec<f64>]) -> Result<Calibration> {
    if inputs.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    let mut c = Calibration::new(graph);
    for x in inputs {
        c.observe(graph, x)?;
    }
    Ok(c)
}

/// Batch-norm-free float graph and, per folded edge, the original edge it
/// equals.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedGraph {
    pub graph: LayerGraph,
    pub edge_map: Vec<usize>,
}

fn bn_affine(layer: &Layer) -> (Vec<f64>, Vec<f64>) {
    let Layer::BatchNorm {
        gamma,
        beta,
        mean,
        var,
        eps,
    } = layer
    else {
        unreachable!("batch norm expected")
    };
    let a: Vec<f64> = gamma
        .iter()
        .zip(var)
        .map(|(g, v)| *g as f64 / (*v as f64 + *eps as f64).sqrt())
        .collect();
    let b = beta
        .iter()
        .zip(mean)
        .zip(&a)
        .map(|((b, m), a)| *b as f64 - a * *m as f64)
        .collect();
    (a, b)
}

/// `y = a*x + b` per output channel applied after the layer.
fn fold_backward(layer: &mut Layer, a: &[f64], b: &[f64]) {
    match layer {
        Layer::Conv1d {
            in_ch,
            out_ch,
            kernel,
            weights,
            bias,
            ..
        } => {
            let per = *kernel * *in_ch;
            for o in 0..*out_ch {
                weights[o * per..(o + 1) * per]
                    .iter_mut()
                    .for_each(|w| *w = (*w as f64 * a[o]) as f32);
                bias[o] = (a[o] * bias[o] as f64 + b[o]) as f32;
            }
        }
        Layer::DepthwiseConv1d {
            ch,
            kernel,
            weights,
            bias,
            ..
        } => {
            for c in 0..*ch {
                weights[c * *kernel..(c + 1) * *kernel]
                    .iter_mut()
                    .for_each(|w| *w = (*w as f64 * a[c]) as f32);
                bias[c] = (a[c] * bias[c] as f64 + b[c]) as f32;
            }
        }
        Layer::Dense {
            in_dim,
            out_dim,
            weights,
            bias,
        } => {
            for o in 0..*out_dim {
                weights[o * *in_dim..(o + 1) * *in_dim]
                    .iter_mut()
                    .for_each(|w| *w = (*w as f64 * a[o]) as f32);
                bias[o] = (a[o] * bias[o] as f64 + b[o]) as f32;
            }
        }
        _ => unreachable!("weighted layer expected"),
    }
}

/// `x -> a*x + b` per input channel applied before the layer.
fn fold_forward(layer: &mut Layer, a: &[f64], b: &[f64]) {
    match layer {
        Layer::Conv1d {
            in_ch,
            out_ch,
            kernel,
            weights,
            bias,
            ..
        } => {
            for o in 0..*out_ch {
                let mut shift = 0.0;
                for j in 0..*kernel {
                    for i in 0..*in_ch {
                        let w = &mut weights[(o * *kernel + j) * *in_ch + i];
                        shift += *w as f64 * b[i];
                        *w = (*w as f64 * a[i]) as f32;
                    }
                }
                bias[o] = (bias[o] as f64 + shift) as f32;
            }
        }
        Layer::DepthwiseConv1d {
            ch,
            kernel,
            weights,
            bias,
            ..
        } => {
            for c in 0..*ch {
                let mut shift = 0.0;
                for j in 0..*kernel {
                    let w = &mut weights[c * *kernel + j];
                    shift += *w as f64 * b[c];
                    *w = (*w as f64 * a[c]) as f32;
                }
                bias[c] = (bias[c] as f64 + shift) as f32;
            }
        }
        Layer::Dense {
            in_dim,
            out_dim,
            weights,
            bias,
        } => {
            for o in 0..*out_dim {
                let mut shift = 0.0;
                for i in 0..*in_dim {
                    let w = &mut weights[o * *in_dim + i];
                    shift += *w as f64 * b[i];
                    *w = (*w as f64 * a[i]) as f32;
                }
                bias[o] = (bias[o] as f64 + shift) as f32;
            }
        }
        _ => unreachable!("weighted layer expected"),
    }
}

/// Remove batch norms (folded) and dropout (identity).
pub fn fold_batchnorm(graph: &LayerGraph) -> Result<FoldedGraph> {
    let mut layers: Vec<Layer> = Vec::new();
    // original edge index of each folded edge; `last_from` tracks whether the
    // newest folded layer produced the current edge directly
    let mut edge_map = vec![0usize];
    let mut pending: Option<(Vec<f64>, Vec<f64>)> = None;
    let next_weighted = |from: usize| {
        graph.layers[from..]
            .iter()
            .find(|l| !matches!(l, Layer::Dropout { .. }))
            .is_some_and(Layer::is_weighted)
    };
    for (i, l) in graph.layers.iter().enumerate() {
        match l {
            Layer::Dropout { .. } => {}
            Layer::BatchNorm { .. } => {
                let (a, b) = bn_affine(l);
                if pending.is_none() && layers.last().is_some_and(Layer::is_weighted) {
                    fold_backward(layers.last_mut().expect("checked"), &a, &b);
                    *edge_map.last_mut().expect("non-empty") = i + 1;
                } else if pending.is_none() && next_weighted(i + 1) {
                    pending = Some((a, b));
                } else {
                    return Err(Error::InvalidConfig(format!(
                        "batch norm at layer {i} has no adjacent conv/dense to fold into"
                    )));
                }
            }
            _ => {
                let mut l = l.clone();
                if let Some((a, b)) = pending.take() {
                    fold_forward(&mut l, &a, &b);
                }
                layers.push(l);
                edge_map.push(i + 1);
            }
        }
    }
    Ok(FoldedGraph {
        graph: LayerGraph::new(graph.input_shape, graph.class_count, layers)?,
        edge_map,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum QLayer {
    Conv1d {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        weights: Vec<i8>,
        bias: Vec<i32>,
        w_exp: i32,
        /// `None` for the final, dequantised layer.
        out_exp: Option<i32>,
    },
    DepthwiseConv1d {
        ch: usize,
        kernel: usize,
        stride: usize,
        weights: Vec<i8>,
        bias: Vec<i32>,
        w_exp: i32,
        out_exp: Option<i32>,
    },
    Dense {
        in_dim: usize,
        out_dim: usize,
        weights: Vec<i8>,
        bias: Vec<i32>,
        w_exp: i32,
        out_exp: Option<i32>,
    },
    MaxPool1d {
        size: usize,
        stride: usize,
    },
    Relu,
    Flatten,
    Softmax,
}

impl QLayer {
    pub fn kind(&self) -> &'static str {
        match self {
            QLayer::Conv1d { .. } => "conv1d",
            QLayer::DepthwiseConv1d { .. } => "depthwise_conv1d",
            QLayer::Dense { .. } => "dense",
            QLayer::MaxPool1d { .. } => "maxpool1d",
            QLayer::Relu => "relu",
            QLayer::Flatten => "flatten",
            QLayer::Softmax => "softmax",
        }
    }

    pub fn exps(&self) -> Option<(i32, Option<i32>)> {
        match self {
            QLayer::Conv1d { w_exp, out_exp, .. }
            | QLayer::DepthwiseConv1d { w_exp, out_exp, .. }
            | QLayer::Dense { w_exp, out_exp, .. } => Some((*w_exp, *out_exp)),
            _ => None,
        }
    }

    /// Float twin with dequantised weights (biases at accumulator scale).
    pub(crate) fn as_float(&self, in_exp: i32) -> Layer {
        let deq = |w: &[i8], e: i32| {
            w.iter()
                .map(|&q| dequantize_value(q as i64, e) as f32)
                .collect()
        };
        let deq_b = |b: &[i32], e: i32| {
            b.iter()
                .map(|&q| dequantize_value(q as i64, e) as f32)
                .collect()
        };
        match self {
            QLayer::Conv1d {
                in_ch,
                out_ch,
                kernel,
                stride,
                weights,
                bias,
                w_exp,
                ..
            } => Layer::Conv1d {
                in_ch: *in_ch,
                out_ch: *out_ch,
                kernel: *kernel,
                stride: *stride,
                weights: deq(weights, *w_exp),
                bias: deq_b(bias, in_exp + w_exp),
            },
            QLayer::DepthwiseConv1d {
                ch,
                kernel,
                stride,
                weights,
                bias,
                w_exp,
                ..
            } => Layer::DepthwiseConv1d {
                ch: *ch,
                kernel: *kernel,
                stride: *stride,
                weights: deq(weights, *w_exp),
                bias: deq_b(bias, in_exp + w_exp),
            },
            QLayer::Dense {
                in_dim,
                out_dim,
                weights,
                bias,
                w_exp,
                ..
            } => Layer::Dense {
                in_dim: *in_dim,
                out_dim: *out_dim,
                weights: deq(weights, *w_exp),
                bias: deq_b(bias, in_exp + w_exp),
            },
            QLayer::MaxPool1d { size, stride } => Layer::MaxPool1d {
                size: *size,
                stride: *stride,
            },
            QLayer::Relu => Layer::Relu,
            QLayer::Flatten => Layer::Flatten,
            QLayer::Softmax => Layer::Softmax,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedModel {
    pub input_shape: Shape,
    pub class_count: usize,
    pub input_exp: i32,
    pub layers: Vec<QLayer>,
    /// Shape of every edge, as in [`LayerGraph::shapes`].
    pub shapes: Vec<Shape>,
    /// Activation exponent of every edge. For edges after the dequantised
    /// layer this is the accumulator exponent.
    pub edge_exps: Vec<i32>,
}

fn check_exp(e: i32) -> Result<()> {
    if !(MIN_EXP..=MAX_EXP).contains(&e) {
        return Err(Error::InvalidConfig(format!(
            "scale exponent {e} outside [-16, 16]"
        )));
    }
    Ok(())
}

impl QuantizedModel {
    /// Validate shapes, exponents and the dequantised-tail rule.
    pub fn new(
        input_shape: Shape,
        class_count: usize,
        input_exp: i32,
        layers: Vec<QLayer>,
    ) -> Result<Self> {
        check_exp(input_exp)?;
        let float: Vec<Layer> = layers.iter().map(|l| l.as_float(0)).collect();
        let graph = LayerGraph::new(input_shape, class_count, float)?;
        let last_weighted = layers.iter().rposition(|l| l.exps().is_some());
        let mut edge_exps = vec![input_exp];
        for (i, l) in layers.iter().enumerate() {
            let e_in = edge_exps[i];
            let e = match l.exps() {
                Some((w, out)) => {
                    check_exp(w)?;
                    let is_last = Some(i) == last_weighted
                        && layers[i + 1..].iter().all(|l| matches!(l, QLayer::Softmax));
                    match (out, is_last) {
                        (None, true) => e_in + w,
                        (Some(o), false) => {
                            check_exp(o)?;
                            o
                        }
                        (None, false) => {
                            return Err(Error::InvalidConfig(format!(
                                "layer {i}: only the final weighted layer may skip requantisation"
                            )))
                        }
                        (Some(_), true) => {
                            return Err(Error::InvalidConfig(format!(
                                "layer {i}: the final weighted layer is dequantised and has no output exponent"
                            )))
                        }
                    }
                }
                None => e_in,
            };
            edge_exps.push(e);
        }
        if last_weighted.is_none() {
            return Err(Error::InvalidConfig(
                "quantized model has no weighted layer".into(),
            ));
        }
        Ok(Self {
            input_shape,
            class_count,
            input_exp,
            layers,
            shapes: graph.shapes,
            edge_exps,
        })
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                QLayer::Conv1d { weights, bias, .. }
                | QLayer::DepthwiseConv1d { weights, bias, .. }
                | QLayer::Dense { weights, bias, .. } => weights.len() + bias.len(),
                _ => 0,
            })
            .sum()
    }

    /// Float graph with every weight dequantised.
    pub fn dequantized_graph(&self) -> LayerGraph {
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| l.as_float(self.edge_exps[i]))
            .collect();
        LayerGraph::new(self.input_shape, self.class_count, layers)
            .expect("validated at construction")
    }

    pub fn quantize_input(&self, input: &[f64]) -> Result<Vec<i8>> {
        if input.len() != self.input_shape.size() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} values, model expects {}",
                input.len(),
                self.input_shape
            )));
        }
        Ok(input
            .iter()
            .map(|&x| quantize_value(x, self.input_exp))
            .collect())
    }

    /// Integer forward pass. Returns the final accumulator (or int8 values)
    /// as `i64` together with its exponent.
    pub fn forward_int(&self, q: &[i8]) -> Result<(Vec<i64>, i32)> {
        if q.len() != self.input_shape.size() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} values, model expects {}",
                q.len(),
                self.input_shape
            )));
        }
        let mut x: Vec<i8> = q.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let s = self.shapes[i];
            let e_in = self.edge_exps[i];
            let overflow = || Error::AccumulatorOverflow { layer: i };
            let requant = |acc: Vec<i32>,
                           w_exp: i32,
                           out: Option<i32>|
             -> std::result::Result<Vec<i8>, Vec<i64>> {
                match out {
                    Some(o) => Ok(acc
                        .into_iter()
                        .map(|a| saturate_i8(rounding_shift(a as i64, o - (e_in + w_exp))))
                        .collect()),
                    None => Err(acc.into_iter().map(i64::from).collect()),
                }
            };
            let done = match layer {
                QLayer::Conv1d {
                    in_ch,
                    out_ch,
                    kernel,
                    stride,
                    weights,
                    bias,
                    w_exp,
                    out_exp,
                } => {
                    let out_len = (s.len - kernel) / stride + 1;
                    let per = kernel * in_ch;
                    let mut acc = vec![0i32; out_len * out_ch];
                    for t in 0..out_len {
                        let window = &x[t * stride * in_ch..t * stride * in_ch + per];
                        for o in 0..*out_ch {
                            let mut a = bias[o];
                            for (w, v) in weights[o * per..(o + 1) * per].iter().zip(window) {
                                a = a.checked_add(*w as i32 * *v as i32).ok_or_else(overflow)?;
                            }
                            acc[t * out_ch + o] = a;
                        }
                    }
                    requant(acc, *w_exp, *out_exp)
                }
                QLayer::DepthwiseConv1d {
                    ch,
                    kernel,
                    stride,
                    weights,
                    bias,
                    w_exp,
                    out_exp,
                } => {
                    let out_len = (s.len - kernel) / stride + 1;
                    let mut acc = vec![0i32; out_len * ch];
                    for t in 0..out_len {
                        for c in 0..*ch {
                            let mut a = bias[c];
                            for j in 0..*kernel {
                                let p = weights[c * kernel + j] as i32
                                    * x[(t * stride + j) * ch + c] as i32;
                                a = a.checked_add(p).ok_or_else(overflow)?;
                            }
                            acc[t * ch + c] = a;
                        }
                    }
                    requant(acc, *w_exp, *out_exp)
                }
                QLayer::Dense {
                    in_dim,
                    out_dim,
                    weights,
                    bias,
                    w_exp,
                    out_exp,
                } => {
                    let mut acc = vec![0i32; *out_dim];
                    for o in 0..*out_dim {
                        let mut a = bias[o];
                        for (w, v) in weights[o * in_dim..(o + 1) * in_dim].iter().zip(&x) {
                            a = a.checked_add(*w as i32 * *v as i32).ok_or_else(overflow)?;
                        }
                        acc[o] = a;
                    }
                    requant(acc, *w_exp, *out_exp)
                }
                QLayer::MaxPool1d { size, stride } => {
                    let out_len = (s.len - size) / stride + 1;
                    let mut y = vec![i8::MIN; out_len * s.ch];
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
                    Ok(y)
                }
                QLayer::Relu => Ok(x.iter().map(|&v| v.max(0)).collect()),
                QLayer::Flatten => Ok(x),
                // reached only after an int8 tail; the value is passed through
                QLayer::Softmax => Ok(x),
            };
            match done {
                Ok(y) => x = y,
                Err(acc) => return Ok((acc, self.edge_exps[i + 1])),
            }
        }
        let e = *self.edge_exps.last().expect("non-empty");
        Ok((x.into_iter().map(i64::from).collect(), e))
    }

    /// Dequantised output of the final weighted layer.
    pub fn logits(&self, input: &[f64]) -> Result<Vec<f64>> {
        let q = self.quantize_input(input)?;
        let (v, e) = self.forward_int(&q)?;
        Ok(v.into_iter().map(|a| dequantize_value(a, e)).collect())
    }

    pub fn infer(&self, input: &[f64]) -> Result<Vec<f64>> {
        let z = self.logits(input)?;
        Ok(if matches!(self.layers.last(), Some(QLayer::Softmax)) {
            softmax(&z)
        } else {
            z
        })
    }
}

pub fn infer_quantized(model: &QuantizedModel, input: &[f64]) -> Result<Vec<f64>> {
    model.infer(input)
}

fn quantize_tensor(t: &[f32]) -> (Vec<i8>, i32) {
    let m = t.iter().fold(0.0f64, |a, v| a.max((*v as f64).abs()));
    let e = scale_exponent(m);
    (t.iter().map(|&v| quantize_value(v as f64, e)).collect(), e)
}

fn quantize_bias(b: &[f32], exp: i32) -> Vec<i32> {
    b.iter()
        .map(|&v| {
            (v as f64 / 2f64.powi(exp))
                .round_ties_even()
                .clamp(i32::MIN as f64, i32::MAX as f64) as i32
        })
        .collect()
}

/// Fold, then quantise every weighted layer with activation exponents from
/// the calibration of `graph`.
pub fn quantize_model(graph: &LayerGraph, calibration: &Calibration) -> Result<QuantizedModel> {
    graph.check_finite()?;
    if calibration.samples == 0 {
        return Err(Error::EmptyCalibration);
    }
    if calibration.max_abs.len() != graph.layers.len() + 1 {
        return Err(Error::ShapeMismatch(
            "calibration does not belong to this graph".into(),
        ));
    }
    let folded = fold_batchnorm(graph)?;
    let orig_exps = calibration.exponents();
    let g = &folded.graph;
    let last_weighted = g
        .layers
        .iter()
        .rposition(Layer::is_weighted)
        .ok_or_else(|| Error::InvalidConfig("graph has no conv/dense layer to quantise".into()))?;
    let dequant_tail = g.layers[last_weighted + 1..]
        .iter()
        .all(|l| matches!(l, Layer::Softmax));
    let input_exp = orig_exps[folded.edge_map[0]];
    let mut e_in = input_exp;
    let mut out = Vec::with_capacity(g.layers.len());
    for (i, l) in g.layers.iter().enumerate() {
        let out_exp = if i == last_weighted && dequant_tail {
            None
        } else {
            Some(orig_exps[folded.edge_map[i + 1]])
        };
        let q = match l {
            Layer::Conv1d {
                in_ch,
                out_ch,
                kernel,
                stride,
                weights,
                bias,
            } => {
                let (w, we) = quantize_tensor(weights);
                QLayer::Conv1d {
                    in_ch: *in_ch,
                    out_ch: *out_ch,
                    kernel: *kernel,
                    stride: *stride,
                    weights: w,
                    bias: quantize_bias(bias, e_in + we),
                    w_exp: we,
                    out_exp,
                }
            }
            Layer::DepthwiseConv1d {
                ch,
                kernel,
                stride,
                weights,
                bias,
            } => {
                let (w, we) = quantize_tensor(weights);
                QLayer::DepthwiseConv1d {
                    ch: *ch,
                    kernel: *kernel,
                    stride: *stride,
                    weights: w,
                    bias: quantize_bias(bias, e_in + we),
                    w_exp: we,
                    out_exp,
                }
            }
            Layer::Dense {
                in_dim,
                out_dim,
                weights,
                bias,
            } => {
                let (w, we) = quantize_tensor(weights);
                QLayer::Dense {
                    in_dim: *in_dim,
                    out_dim: *out_dim,
                    weights: w,
                    bias: quantize_bias(bias, e_in + we),
                    w_exp: we,
                    out_exp,
                }
            }
            Layer::MaxPool1d { size, stride } => QLayer::MaxPool1d {
                size: *size,
                stride: *stride,
            },
            Layer::Relu => QLayer::Relu,
            Layer::Flatten => QLayer::Flatten,
            Layer::Softmax => QLayer::Softmax,
            Layer::BatchNorm { .. } | Layer::Dropout { .. } => unreachable!("removed by folding"),
        };
        if let Some((we, oe)) = q.exps() {
            e_in = oe.unwrap_or(e_in + we);
        }
        out.push(q);
    }
    QuantizedModel::new(g.input_shape, g.class_count, input_exp, out)
}

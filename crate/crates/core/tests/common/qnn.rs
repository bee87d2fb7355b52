use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sleeplite::qnn::quant::QLayer;
use sleeplite::qnn::{Layer, LayerGraph, QuantizedModel, Shape};

// ---- scalar oracle ----

/// `acc / 2^shift` rounded half to even, through exact f64 arithmetic.
pub fn shift_round(acc: i64, shift: i32) -> i64 {
    ((acc as f64) / 2f64.powi(shift)).round_ties_even() as i64
}

pub fn sat(v: i64) -> i64 {
    v.clamp(-128, 127)
}

/// Sum of products with every partial sum kept inside i32.
pub fn dot(bias: i32, pairs: impl Iterator<Item = (i64, i64)>) -> Option<i64> {
    let mut a = bias as i64;
    for (w, v) in pairs {
        a += w * v;
        if a < i32::MIN as i64 || a > i32::MAX as i64 {
            return None;
        }
    }
    Some(a)
}

/// Every edge of the integer forward pass, one value per element; `None`
/// on accumulator overflow. The last edge is the raw accumulator when the
/// final weighted layer is dequantised.
pub fn oracle_edges(m: &QuantizedModel, input: &[f64]) -> Option<Vec<Vec<i64>>> {
    let e0 = m.input_exp;
    let mut x: Vec<i64> = input
        .iter()
        .map(|v| sat((v / 2f64.powi(e0)).round_ties_even() as i64))
        .collect();
    let mut edges = vec![x.clone()];
    for (i, l) in m.layers.iter().enumerate() {
        let s = m.shapes[i];
        let out_s = m.shapes[i + 1];
        let e_in = m.edge_exps[i];
        let requant = |a: i64, w_exp: i32, out: Option<i32>| match out {
            Some(o) => sat(shift_round(a, o - e_in - w_exp)),
            None => a,
        };
        let mut y = vec![0i64; out_s.size()];
        match l {
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
                for t in 0..out_s.len {
                    for o in 0..*out_ch {
                        let mut pairs = Vec::new();
                        for k in 0..*kernel {
                            for c in 0..*in_ch {
                                pairs.push((
                                    weights[(o * kernel + k) * in_ch + c] as i64,
                                    x[(t * stride + k) * in_ch + c],
                                ));
                            }
                        }
                        y[t * out_ch + o] =
                            requant(dot(bias[o], pairs.into_iter())?, *w_exp, *out_exp);
                    }
                }
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
                for t in 0..out_s.len {
                    for c in 0..*ch {
                        let pairs = (0..*kernel).map(|k| {
                            (weights[c * kernel + k] as i64, x[(t * stride + k) * ch + c])
                        });
                        y[t * ch + c] = requant(dot(bias[c], pairs)?, *w_exp, *out_exp);
                    }
                }
            }
            QLayer::Dense {
                in_dim,
                out_dim,
                weights,
                bias,
                w_exp,
                out_exp,
            } => {
                for o in 0..*out_dim {
                    let pairs = (0..*in_dim).map(|j| (weights[o * in_dim + j] as i64, x[j]));
                    y[o] = requant(dot(bias[o], pairs)?, *w_exp, *out_exp);
                }
            }
            QLayer::MaxPool1d { size, stride } => {
                for t in 0..out_s.len {
                    for c in 0..s.ch {
                        y[t * s.ch + c] = (0..*size)
                            .map(|k| x[(t * stride + k) * s.ch + c])
                            .max()
                            .unwrap();
                    }
                }
            }
            QLayer::Relu => y = x.iter().map(|v| (*v).max(0)).collect(),
            QLayer::Flatten | QLayer::Softmax => y = x.clone(),
        }
        x = y;
        edges.push(x.clone());
    }
    Some(edges)
}

// ---- random graphs ----

pub fn normal(rng: &mut ChaCha8Rng, sd: f64, n: usize) -> Vec<f32> {
    let d = Normal::new(0.0, sd).unwrap();
    (0..n).map(|_| d.sample(rng) as f32).collect()
}

pub fn random_graph(rng: &mut ChaCha8Rng) -> LayerGraph {
    let ch = rng.random_range(1..=3);
    let len = rng.random_range(24..=64);
    let mut layers = Vec::new();
    if rng.random_bool(0.5) {
        layers.push(Layer::BatchNorm {
            gamma: normal(rng, 1.0, ch),
            beta: normal(rng, 0.3, ch),
            mean: normal(rng, 0.3, ch),
            var: (0..ch).map(|_| rng.random_range(0.5..2.0)).collect(),
            eps: 1e-3,
        });
    }
    let (out_ch, kernel, stride) = (
        rng.random_range(2..=6),
        rng.random_range(1..=5),
        rng.random_range(1..=2),
    );
    layers.push(Layer::Conv1d {
        in_ch: ch,
        out_ch,
        kernel,
        stride,
        weights: normal(
            rng,
            (2.0 / (kernel * ch) as f64).sqrt(),
            out_ch * kernel * ch,
        ),
        bias: normal(rng, 0.1, out_ch),
    });
    layers.push(Layer::Relu);
    if rng.random_bool(0.5) {
        let k = rng.random_range(1..=3);
        layers.push(Layer::DepthwiseConv1d {
            ch: out_ch,
            kernel: k,
            stride: 1,
            weights: normal(rng, 0.7, out_ch * k),
            bias: normal(rng, 0.1, out_ch),
        });
        if rng.random_bool(0.5) {
            layers.push(Layer::BatchNorm {
                gamma: normal(rng, 1.0, out_ch),
                beta: normal(rng, 0.2, out_ch),
                mean: normal(rng, 0.2, out_ch),
                var: (0..out_ch).map(|_| rng.random_range(0.5..2.0)).collect(),
                eps: 1e-3,
            });
        }
        layers.push(Layer::Relu);
    }
    layers.push(Layer::MaxPool1d { size: 2, stride: 2 });
    layers.push(Layer::Flatten);
    let flat = {
        let mut s = Shape::new(len, ch);
        for l in &layers {
            s = l.output_shape(s).unwrap();
        }
        s.size()
    };
    let hidden = rng.random_range(3..=10);
    layers.push(Layer::Dense {
        in_dim: flat,
        out_dim: hidden,
        weights: normal(rng, (2.0 / flat as f64).sqrt(), flat * hidden),
        bias: normal(rng, 0.1, hidden),
    });
    layers.push(Layer::Relu);
    if rng.random_bool(0.3) {
        layers.push(Layer::Dropout { rate: 0.5 });
    }
    layers.push(Layer::Dense {
        in_dim: hidden,
        out_dim: 4,
        weights: normal(rng, (1.0 / hidden as f64).sqrt(), hidden * 4),
        bias: normal(rng, 0.1, 4),
    });
    if rng.random_bool(0.8) {
        layers.push(Layer::Softmax);
    }
    LayerGraph::new(Shape::new(len, ch), 4, layers).unwrap()
}

pub fn random_input(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()
}

/// Largest row L1 norm of a weighted layer, in real units.
pub fn row_gain(l: &QLayer) -> f64 {
    let (rows, w, e): (usize, &[i8], i32) = match l {
        QLayer::Conv1d {
            out_ch,
            weights,
            w_exp,
            ..
        } => (*out_ch, weights, *w_exp),
        QLayer::DepthwiseConv1d {
            ch, weights, w_exp, ..
        } => (*ch, weights, *w_exp),
        QLayer::Dense {
            out_dim,
            weights,
            w_exp,
            ..
        } => (*out_dim, weights, *w_exp),
        _ => return 1.0,
    };
    let per = w.len() / rows;
    w.chunks(per)
        .map(|r| r.iter().map(|&v| (v as f64).abs()).sum::<f64>() * 2f64.powi(e))
        .fold(0.0, f64::max)
}

/// Every edge of the integer path stays within the rounding error carried
/// forward from the input: weighted layers scale the incoming error by
/// their row gain and add half an output step, while relu, max-pool and
/// flatten pass it through. Saturated elements add their clipping excess.
pub fn check_propagation_bound(q: &QuantizedModel, x: &[f64]) -> f64 {
    let float = q.dequantized_graph().forward_edges(x).unwrap();
    let ints = oracle_edges(q, x).unwrap();
    let deq = |k: usize| -> Vec<f64> {
        ints[k]
            .iter()
            .map(|&v| v as f64 * 2f64.powi(q.edge_exps[k]))
            .collect()
    };
    let max_err = |k: usize| {
        deq(k)
            .iter()
            .zip(&float[k])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let mut bound = max_err(0);
    for (i, l) in q.layers.iter().enumerate() {
        let k = i + 1;
        if let Some((_, out)) = l.exps() {
            bound *= row_gain(l);
            if let Some(o) = out {
                let step = 2f64.powi(o);
                let clip = float[k]
                    .iter()
                    .map(|v| (v.abs() - 127.5 * step - bound).max(0.0))
                    .fold(0.0, f64::max);
                bound += 0.5 * step + clip;
            }
        }
        if matches!(l, QLayer::Softmax) {
            break;
        }
        let err = max_err(k);
        assert!(
            err <= bound * (1.0 + 1e-6) + 1e-9,
            "edge {k} ({}): {err} > {bound}",
            l.kind()
        );
    }
    bound
}

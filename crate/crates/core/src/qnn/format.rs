//! `SLCW` weight container, shared with the Python trainer.
//!
//! All integers little-endian.
//!
//! ```text
//! header   "SLCW" u16 version u8 precision (0 = f32, 1 = int8)
//!          u32 input_len u32 input_ch u32 class_count u32 layer_count
//!          [int8] i32 input_exp
//! layer    u8 kind, param block, u8 tensor_count, per tensor u8 ndim + u32 dims
//!          [int8, weighted kinds] i8 w_exp, i8 out_exp (-128 = dequantised)
//! tensors  raw data in layer order: f32 values, or i8 weights then i32 bias
//! ```
//!
//! Kind tags: 0 batchnorm, 1 conv1d, 2 depthwise_conv1d, 3 maxpool1d, 4 relu,
//! 5 dropout, 6 flatten, 7 dense, 8 softmax. Param blocks: batchnorm `f32
//! eps`; conv1d `u32 in, out, kernel, stride`; depthwise `u32 ch, kernel,
//! stride`; maxpool `u32 size, stride`; dropout `f32 rate`; dense `u32 in,
//! out`. Batch norm and dropout never appear in int8 files.

use std::path::Path;

use super::quant::{QLayer, QuantizedModel};
use super::{Layer, LayerGraph, Shape};
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SLCW";
pub const VERSION: u16 = 1;
const NO_EXP: i8 = i8::MIN;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelFile {
    Float(LayerGraph),
    Quantized(QuantizedModel),
}

impl From<LayerGraph> for ModelFile {
    fn from(g: LayerGraph) -> Self {
        ModelFile::Float(g)
    }
}

impl From<QuantizedModel> for ModelFile {
    fn from(q: QuantizedModel) -> Self {
        ModelFile::Quantized(q)
    }
}

fn header(w: &mut Writer, precision: u8, shape: Shape, classes: usize, layers: usize) {
    w.bytes(MAGIC);
    w.u16(VERSION);
    w.u8(precision);
    w.len(shape.len);
    w.len(shape.ch);
    w.len(classes);
    w.len(layers);
}

fn dims(w: &mut Writer, ts: &[&[usize]]) {
    w.u8(ts.len() as u8);
    for d in ts {
        w.u8(d.len() as u8);
        d.iter().for_each(|&v| w.len(v));
    }
}

fn conv_desc(w: &mut Writer, in_ch: usize, out_ch: usize, kernel: usize, stride: usize) {
    w.u8(1);
    [in_ch, out_ch, kernel, stride]
        .iter()
        .for_each(|&v| w.len(v));
    dims(w, &[&[out_ch, kernel, in_ch], &[out_ch]]);
}

fn depthwise_desc(w: &mut Writer, ch: usize, kernel: usize, stride: usize) {
    w.u8(2);
    [ch, kernel, stride].iter().for_each(|&v| w.len(v));
    dims(w, &[&[ch, kernel], &[ch]]);
}

fn dense_desc(w: &mut Writer, in_dim: usize, out_dim: usize) {
    w.u8(7);
    w.len(in_dim);
    w.len(out_dim);
    dims(w, &[&[out_dim, in_dim], &[out_dim]]);
}

fn pool_desc(w: &mut Writer, size: usize, stride: usize) {
    w.u8(3);
    w.len(size);
    w.len(stride);
    dims(w, &[]);
}

fn bare_desc(w: &mut Writer, tag: u8) {
    w.u8(tag);
    dims(w, &[]);
}

fn float_layer_desc(w: &mut Writer, l: &Layer) {
    match l {
        Layer::BatchNorm { gamma, eps, .. } => {
            w.u8(0);
            w.f32(*eps);
            let c = [gamma.len()];
            dims(w, &[&c, &c, &c, &c]);
        }
        Layer::Conv1d {
            in_ch,
            out_ch,
            kernel,
            stride,
            ..
        } => conv_desc(w, *in_ch, *out_ch, *kernel, *stride),
        Layer::DepthwiseConv1d {
            ch, kernel, stride, ..
        } => depthwise_desc(w, *ch, *kernel, *stride),
        Layer::MaxPool1d { size, stride } => pool_desc(w, *size, *stride),
        Layer::Relu => bare_desc(w, 4),
        Layer::Dropout { rate } => {
            w.u8(5);
            w.f32(*rate);
            dims(w, &[]);
        }
        Layer::Flatten => bare_desc(w, 6),
        Layer::Dense {
            in_dim, out_dim, ..
        } => dense_desc(w, *in_dim, *out_dim),
        Layer::Softmax => bare_desc(w, 8),
    }
}

fn q_layer_desc(w: &mut Writer, l: &QLayer) {
    match l {
        QLayer::Conv1d {
            in_ch,
            out_ch,
            kernel,
            stride,
            ..
        } => conv_desc(w, *in_ch, *out_ch, *kernel, *stride),
        QLayer::DepthwiseConv1d {
            ch, kernel, stride, ..
        } => depthwise_desc(w, *ch, *kernel, *stride),
        QLayer::MaxPool1d { size, stride } => pool_desc(w, *size, *stride),
        QLayer::Relu => bare_desc(w, 4),
        QLayer::Flatten => bare_desc(w, 6),
        QLayer::Dense {
            in_dim, out_dim, ..
        } => dense_desc(w, *in_dim, *out_dim),
        QLayer::Softmax => bare_desc(w, 8),
    }
    if let Some((we, oe)) = l.exps() {
        w.i8(we as i8);
        w.i8(oe.map_or(NO_EXP, |e| e as i8));
    }
}

pub fn to_bytes(model: &ModelFile) -> Vec<u8> {
    let mut w = Writer::default();
    match model {
        ModelFile::Float(g) => {
            header(&mut w, 0, g.input_shape, g.class_count, g.layers.len());
            g.layers.iter().for_each(|l| float_layer_desc(&mut w, l));
            for t in g.layers.iter().flat_map(Layer::tensors) {
                t.iter().for_each(|v| w.f32(*v));
            }
        }
        ModelFile::Quantized(q) => {
            header(&mut w, 1, q.input_shape, q.class_count, q.layers.len());
            w.i32(q.input_exp);
            q.layers.iter().for_each(|l| q_layer_desc(&mut w, l));
            for l in &q.layers {
                if let QLayer::Conv1d { weights, bias, .. }
                | QLayer::DepthwiseConv1d { weights, bias, .. }
                | QLayer::Dense { weights, bias, .. } = l
                {
                    weights.iter().for_each(|v| w.i8(*v));
                    bias.iter().for_each(|v| w.i32(*v));
                }
            }
        }
    }
    w.buf
}

/// A layer as described in the header, before its tensors are read.
struct Desc {
    kind: u8,
    params: Vec<usize>,
    scalar: f32,
    dims: Vec<Vec<usize>>,
    exps: Option<(i32, Option<i32>)>,
}

impl Desc {
    fn expect_dims(&self, want: &[&[usize]]) -> Result<()> {
        let ok = self.dims.len() == want.len()
            && self.dims.iter().zip(want).all(|(a, b)| a.as_slice() == *b);
        if !ok {
            return Err(Error::ShapeMismatch(format!(
                "tensor dims {:?} disagree with layer parameters (expected {want:?})",
                self.dims
            )));
        }
        Ok(())
    }

    fn param_free(&self) -> Result<Layer> {
        self.expect_dims(&[])?;
        Ok(match self.kind {
            3 => Layer::MaxPool1d {
                size: self.params[0],
                stride: self.params[1],
            },
            4 => Layer::Relu,
            5 => Layer::Dropout { rate: self.scalar },
            6 => Layer::Flatten,
            8 => Layer::Softmax,
            t => unreachable!("kind {t} carries tensors"),
        })
    }
}

fn read_desc(r: &mut Reader, int8: bool) -> Result<Desc> {
    let kind = r.u8()?;
    let n_params = match kind {
        1 => 4,
        2 => 3,
        3 | 7 => 2,
        0 | 4 | 5 | 6 | 8 => 0,
        t => return Err(Error::Parse(format!("unknown layer kind tag {t}"))),
    };
    let scalar = if matches!(kind, 0 | 5) { r.f32()? } else { 0.0 };
    let params = (0..n_params)
        .map(|_| r.u32().map(|v| v as usize))
        .collect::<Result<_>>()?;
    let nt = r.u8()?;
    let mut dims = Vec::with_capacity(nt as usize);
    for _ in 0..nt {
        let nd = r.u8()?;
        dims.push(
            (0..nd)
                .map(|_| r.u32().map(|v| v as usize))
                .collect::<Result<_>>()?,
        );
    }
    let exps = if int8 && matches!(kind, 1 | 2 | 7) {
        let we = r.i8()? as i32;
        let oe = r.i8()?;
        Some((we, (oe != NO_EXP).then_some(oe as i32)))
    } else {
        None
    };
    Ok(Desc {
        kind,
        params,
        scalar,
        dims,
        exps,
    })
}

fn take_f32s(r: &mut Reader, n: usize) -> Result<Vec<f32>> {
    let b = r.take(n.checked_mul(4).ok_or(Error::Truncated)?)?;
    Ok(b.chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
        .collect())
}

fn take_i8s(r: &mut Reader, n: usize) -> Result<Vec<i8>> {
    Ok(r.take(n)?.iter().map(|&b| b as i8).collect())
}

fn take_i32s(r: &mut Reader, n: usize) -> Result<Vec<i32>> {
    let b = r.take(n.checked_mul(4).ok_or(Error::Truncated)?)?;
    Ok(b.chunks_exact(4)
        .map(|c| i32::from_le_bytes(c.try_into().expect("chunk of 4")))
        .collect())
}

fn float_layer(d: &Desc, r: &mut Reader) -> Result<Layer> {
    let p = &d.params;
    Ok(match d.kind {
        0 => {
            let c = d.dims.first().and_then(|v| v.first()).copied().unwrap_or(0);
            d.expect_dims(&[&[c], &[c], &[c], &[c]])?;
            Layer::BatchNorm {
                gamma: take_f32s(r, c)?,
                beta: take_f32s(r, c)?,
                mean: take_f32s(r, c)?,
                var: take_f32s(r, c)?,
                eps: d.scalar,
            }
        }
        1 => {
            let (i, o, k, s) = (p[0], p[1], p[2], p[3]);
            d.expect_dims(&[&[o, k, i], &[o]])?;
            Layer::Conv1d {
                in_ch: i,
                out_ch: o,
                kernel: k,
                stride: s,
                weights: take_f32s(r, o * k * i)?,
                bias: take_f32s(r, o)?,
            }
        }
        2 => {
            let (c, k, s) = (p[0], p[1], p[2]);
            d.expect_dims(&[&[c, k], &[c]])?;
            Layer::DepthwiseConv1d {
                ch: c,
                kernel: k,
                stride: s,
                weights: take_f32s(r, c * k)?,
                bias: take_f32s(r, c)?,
            }
        }
        7 => {
            let (i, o) = (p[0], p[1]);
            d.expect_dims(&[&[o, i], &[o]])?;
            Layer::Dense {
                in_dim: i,
                out_dim: o,
                weights: take_f32s(r, o * i)?,
                bias: take_f32s(r, o)?,
            }
        }
        _ => d.param_free()?,
    })
}

fn q_layer(d: &Desc, r: &mut Reader) -> Result<QLayer> {
    let p = &d.params;
    let (w_exp, out_exp) = d.exps.unwrap_or((0, None));
    Ok(match d.kind {
        0 | 5 => {
            return Err(Error::Parse(
                "batch norm or dropout layer in an int8 file".into(),
            ))
        }
        1 => {
            let (i, o, k, s) = (p[0], p[1], p[2], p[3]);
            d.expect_dims(&[&[o, k, i], &[o]])?;
            QLayer::Conv1d {
                in_ch: i,
                out_ch: o,
                kernel: k,
                stride: s,
                weights: take_i8s(r, o * k * i)?,
                bias: take_i32s(r, o)?,
                w_exp,
                out_exp,
            }
        }
        2 => {
            let (c, k, s) = (p[0], p[1], p[2]);
            d.expect_dims(&[&[c, k], &[c]])?;
            QLayer::DepthwiseConv1d {
                ch: c,
                kernel: k,
                stride: s,
                weights: take_i8s(r, c * k)?,
                bias: take_i32s(r, c)?,
                w_exp,
                out_exp,
            }
        }
        7 => {
            let (i, o) = (p[0], p[1]);
            d.expect_dims(&[&[o, i], &[o]])?;
            QLayer::Dense {
                in_dim: i,
                out_dim: o,
                weights: take_i8s(r, o * i)?,
                bias: take_i32s(r, o)?,
                w_exp,
                out_exp,
            }
        }
        _ => match d.param_free()? {
            Layer::MaxPool1d { size, stride } => QLayer::MaxPool1d { size, stride },
            Layer::Relu => QLayer::Relu,
            Layer::Flatten => QLayer::Flatten,
            _ => QLayer::Softmax,
        },
    })
}

pub fn from_bytes(data: &[u8]) -> Result<ModelFile> {
    let mut r = Reader::new(data);
    if r.take(4)? != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let precision = r.u8()?;
    if precision > 1 {
        return Err(Error::Parse(format!("unknown precision flag {precision}")));
    }
    let int8 = precision == 1;
    let shape = Shape::new(r.u32()? as usize, r.u32()? as usize);
    let classes = r.u32()? as usize;
    let n_layers = r.u32()? as usize;
    // every layer descriptor takes at least two bytes
    if n_layers > data.len() / 2 {
        return Err(Error::Truncated);
    }
    let input_exp = if int8 { Some(r.i32()?) } else { None };
    let descs = (0..n_layers)
        .map(|_| read_desc(&mut r, int8))
        .collect::<Result<Vec<_>>>()?;
    let model = match input_exp {
        Some(e) => {
            let layers = descs
                .iter()
                .map(|d| q_layer(d, &mut r))
                .collect::<Result<Vec<_>>>()?;
            ModelFile::Quantized(QuantizedModel::new(shape, classes, e, layers)?)
        }
        None => {
            let layers = descs
                .iter()
                .map(|d| float_layer(d, &mut r))
                .collect::<Result<Vec<_>>>()?;
            ModelFile::Float(LayerGraph::new(shape, classes, layers)?)
        }
    };
    if !r.is_done() {
        return Err(Error::Parse("trailing bytes after tensors".into()));
    }
    Ok(model)
}

pub fn save_model(model: &ModelFile, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    from_bytes(&std::fs::read(path)?)
}

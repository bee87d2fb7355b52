//! Operation counts and per-inference energy at a technology node.
//!
//! Each layer reads its input edge and writes its output edge once; weights
//! are read once per inference. Memory cost per byte depends on the size of
//! the tensor touched (a stand-in for the buffer it has to live in): between
//! the table's SRAM anchor sizes it is interpolated log-log, past the largest
//! it is the off-chip cost. `mem_model = step` charges each tensor the cost
//! of the next anchor up instead. Conv and dense layers do one multiply and
//! one add per MAC; batch norm one of each per element; parameter-free
//! layers only move data.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::qnn::quant::{QLayer, QuantizedModel};
use crate::qnn::{Layer, LayerGraph};

pub const DEFAULT_TABLE: &str = include_str!("../config/energy_45nm.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Precision {
    Float32,
    Int8,
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::Float32 => "fp32",
            Precision::Int8 => "int8",
        }
    }

    /// Bytes per stored activation or weight.
    pub fn bytes(self) -> usize {
        match self {
            Precision::Float32 => 4,
            Precision::Int8 => 1,
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fp32" | "float32" | "f32" => Ok(Precision::Float32),
            "int8" | "i8" => Ok(Precision::Int8),
            _ => Err(Error::Parse(format!("unknown precision `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerOps {
    pub index: usize,
    pub kind: &'static str,
    pub mults: u64,
    pub adds: u64,
    /// Size of each weight tensor read.
    pub weight_bytes: Vec<usize>,
    pub act_read_bytes: usize,
    pub act_write_bytes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpProfile {
    pub precision: Precision,
    pub layers: Vec<LayerOps>,
}

impl OpProfile {
    pub fn macs(&self) -> u64 {
        self.layers.iter().map(|l| l.mults).sum()
    }

    /// `k` inferences back to back: every count `k` times over, each tensor
    /// at its own size (so its per-byte cost is unchanged).
    pub fn repeated(&self, k: usize) -> Self {
        let mut p = self.clone();
        p.layers = (0..k).flat_map(|_| self.layers.iter().cloned()).collect();
        p
    }
}

fn float_ops(l: &Layer, out_size: usize, in_size: usize) -> (u64, Vec<usize>) {
    let macs = match l {
        Layer::Conv1d { in_ch, kernel, .. } => (kernel * in_ch * out_size) as u64,
        Layer::DepthwiseConv1d { kernel, .. } => (kernel * out_size) as u64,
        Layer::Dense {
            in_dim, out_dim, ..
        } => (in_dim * out_dim) as u64,
        Layer::BatchNorm { .. } => in_size as u64,
        _ => 0,
    };
    let tensors = match l {
        Layer::Conv1d { weights, bias, .. }
        | Layer::DepthwiseConv1d { weights, bias, .. }
        | Layer::Dense { weights, bias, .. } => vec![weights.len(), bias.len()],
        // folded into a scale and shift at inference
        Layer::BatchNorm { gamma, .. } => vec![gamma.len(), gamma.len()],
        _ => Vec::new(),
    };
    (macs, tensors)
}

/// Counts for a float graph executed at `precision` (all tensors stored at
/// that width).
pub fn profile_ops(graph: &LayerGraph, precision: Precision) -> OpProfile {
    let b = precision.bytes();
    let layers = graph
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let (si, so) = (graph.shapes[i].size(), graph.shapes[i + 1].size());
            let (macs, tensors) = float_ops(l, so, si);
            LayerOps {
                index: i,
                kind: l.kind(),
                mults: macs,
                adds: macs,
                weight_bytes: tensors.into_iter().map(|n| n * b).collect(),
                act_read_bytes: si * b,
                act_write_bytes: so * b,
            }
        })
        .collect();
    OpProfile { precision, layers }
}

/// Counts for an integer model: int8 weights and activations, i32 biases,
/// and an i32 final accumulator.
pub fn profile_quantized(model: &QuantizedModel) -> OpProfile {
    let layers = model
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let (si, so) = (model.shapes[i].size(), model.shapes[i + 1].size());
            let wide = |edge: usize| {
                if edge > 0
                    && model.layers[..edge]
                        .iter()
                        .any(|l| matches!(l.exps(), Some((_, None))))
                {
                    4
                } else {
                    1
                }
            };
            let (macs, tensors) = match l {
                QLayer::Conv1d {
                    in_ch,
                    kernel,
                    weights,
                    bias,
                    ..
                } => (
                    (kernel * in_ch * so) as u64,
                    vec![weights.len(), 4 * bias.len()],
                ),
                QLayer::DepthwiseConv1d {
                    kernel,
                    weights,
                    bias,
                    ..
                } => ((kernel * so) as u64, vec![weights.len(), 4 * bias.len()]),
                QLayer::Dense {
                    in_dim,
                    out_dim,
                    weights,
                    bias,
                    ..
                } => (
                    (in_dim * out_dim) as u64,
                    vec![weights.len(), 4 * bias.len()],
                ),
                _ => (0, Vec::new()),
            };
            LayerOps {
                index: i,
                kind: l.kind(),
                mults: macs,
                adds: macs,
                weight_bytes: tensors,
                act_read_bytes: si * wide(i),
                act_write_bytes: so * wide(i + 1),
            }
        })
        .collect();
    OpProfile {
        precision: Precision::Int8,
        layers,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemModel {
    /// Log-log interpolation between anchor sizes.
    LogLog,
    /// Cost of the smallest anchor that holds the tensor.
    Step,
}

/// Per-operation energies (pJ) at one node, plus scaling to other nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTable {
    pub node_nm: u32,
    /// `fp32_mult`, `int8_add`, ...
    pub ops: BTreeMap<String, f64>,
    /// `(max tensor bytes, pJ per byte)`, ascending.
    pub mem_tiers: Vec<(usize, f64)>,
    pub mem_offchip: f64,
    pub mem_model: MemModel,
    pub node_scale: BTreeMap<u32, f64>,
}

impl EnergyTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut node_nm = None;
        let mut ops = BTreeMap::new();
        let mut mem_tiers = Vec::new();
        let mut mem_offchip = None;
        let mut node_scale = BTreeMap::new();
        let mut mem_model = MemModel::LogLog;
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |m: &str| Error::Parse(format!("energy table line {}: {m}", ln + 1));
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad("expected key = value"))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "mem_model" {
                mem_model = match v {
                    "loglog" => MemModel::LogLog,
                    "step" => MemModel::Step,
                    _ => return Err(bad("mem_model must be `loglog` or `step`")),
                };
                continue;
            }
            let num: f64 = v.parse().map_err(|_| bad("value is not a number"))?;
            if !(num > 0.0 && num.is_finite()) {
                return Err(bad("entries must be positive"));
            }
            if k == "node_nm" {
                node_nm = Some(num as u32);
            } else if k == "mem_offchip" {
                mem_offchip = Some(num);
            } else if let Some(size) = k.strip_prefix("mem_tier.") {
                mem_tiers.push((size.parse().map_err(|_| bad("bad tier size"))?, num));
            } else if let Some(n) = k.strip_prefix("node_scale.") {
                node_scale.insert(n.parse().map_err(|_| bad("bad node"))?, num);
            } else {
                ops.insert(k.to_string(), num);
            }
        }
        mem_tiers.sort_by_key(|t| t.0);
        let t = Self {
            node_nm: node_nm.ok_or_else(|| Error::MissingTableEntry("node_nm".into()))?,
            ops,
            mem_tiers,
            mem_offchip: mem_offchip
                .ok_or_else(|| Error::MissingTableEntry("mem_offchip".into()))?,
            mem_model,
            node_scale,
        };
        if let (Some(m8), Some(m32)) = (t.ops.get("int8_mult"), t.ops.get("fp32_mult")) {
            if m8 >= m32 {
                return Err(Error::InvalidConfig(
                    "int8 multiply must cost less than fp32 multiply".into(),
                ));
            }
        }
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn op(&self, key: &str) -> Result<f64> {
        self.ops
            .get(key)
            .copied()
            .ok_or_else(|| Error::MissingTableEntry(key.to_string()))
    }

    pub fn mem_per_byte(&self, tensor_bytes: usize) -> f64 {
        let Some(k) = self
            .mem_tiers
            .iter()
            .position(|(max, _)| tensor_bytes <= *max)
        else {
            return self.mem_offchip;
        };
        if k == 0 || self.mem_model == MemModel::Step {
            return self.mem_tiers[k].1;
        }
        let ((s0, e0), (s1, e1)) = (self.mem_tiers[k - 1], self.mem_tiers[k]);
        let f = (tensor_bytes as f64 / s0 as f64).ln() / (s1 as f64 / s0 as f64).ln();
        (e0.ln() + f * (e1 / e0).ln()).exp()
    }

    fn mem(&self, bytes: usize) -> f64 {
        bytes as f64 * self.mem_per_byte(bytes)
    }

    /// Factor from this table's node to `target_nm`.
    pub fn node_factor(&self, from_nm: u32, target_nm: u32) -> Result<f64> {
        if from_nm == target_nm {
            return Ok(1.0);
        }
        if from_nm == self.node_nm {
            if let Some(f) = self.node_scale.get(&target_nm) {
                return Ok(*f);
            }
        }
        if target_nm == self.node_nm {
            if let Some(f) = self.node_scale.get(&from_nm) {
                return Ok(1.0 / f);
            }
        }
        Err(Error::UnsupportedNode(target_nm))
    }
}

impl Default for EnergyTable {
    fn default() -> Self {
        Self::parse(DEFAULT_TABLE).expect("bundled energy table parses")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerEnergy {
    pub index: usize,
    pub kind: &'static str,
    pub compute_uj: f64,
    pub memory_uj: f64,
}

impl LayerEnergy {
    pub fn total_uj(&self) -> f64 {
        self.compute_uj + self.memory_uj
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub node_nm: u32,
    pub precision: Precision,
    pub layers: Vec<LayerEnergy>,
    pub total_uj: f64,
}

impl EnergyReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("layer,kind,compute_uj,memory_uj,total_uj\n");
        for l in &self.layers {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                l.index,
                l.kind,
                l.compute_uj,
                l.memory_uj,
                l.total_uj()
            );
        }
        let _ = writeln!(
            s,
            "total,{} {}nm,,,{}",
            self.precision, self.node_nm, self.total_uj
        );
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

pub fn estimate_energy(profile: &OpProfile, table: &EnergyTable) -> Result<EnergyReport> {
    let p = profile.precision.as_str();
    let mult = table.op(&format!("{p}_mult"))?;
    let add = table.op(&format!("{p}_add"))?;
    let layers: Vec<LayerEnergy> = profile
        .layers
        .iter()
        .map(|l| {
            let compute = l.mults as f64 * mult + l.adds as f64 * add;
            let memory = l.weight_bytes.iter().map(|&b| table.mem(b)).sum::<f64>()
                + table.mem(l.act_read_bytes)
                + table.mem(l.act_write_bytes);
            LayerEnergy {
                index: l.index,
                kind: l.kind,
                compute_uj: compute * 1e-6,
                memory_uj: memory * 1e-6,
            }
        })
        .collect();
    let total_uj = layers.iter().map(LayerEnergy::total_uj).sum();
    Ok(EnergyReport {
        node_nm: table.node_nm,
        precision: profile.precision,
        layers,
        total_uj,
    })
}

pub fn scale_to_node(
    report: &EnergyReport,
    target_nm: u32,
    table: &EnergyTable,
) -> Result<EnergyReport> {
    let f = table.node_factor(report.node_nm, target_nm)?;
    let mut r = report.clone();
    r.node_nm = target_nm;
    for l in &mut r.layers {
        l.compute_uj *= f;
        l.memory_uj *= f;
    }
    r.total_uj = r.layers.iter().map(LayerEnergy::total_uj).sum();
    Ok(r)
}

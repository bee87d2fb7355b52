//! Probe sets written next to an exported `SLCW` file, and the paired
//! inference check against them.
//!
//! CSV with a header row `fq_argmax,logit_0..logit_{c-1},x_0..x_{n-1}`, one
//! probe per line. `fq_argmax` is the exporter's fake-quantised prediction
//! and may be empty.

use std::fmt::Write as _;
use std::path::Path;

use super::quant::QuantizedModel;
use super::{Layer, LayerGraph};
use crate::error::{Error, Result};
use crate::ml::argmax;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub inputs: Vec<Vec<f64>>,
    /// Exporter float logits, one row per probe.
    pub logits: Vec<Vec<f64>>,
    pub fake_quant_argmax: Vec<Option<usize>>,
}

impl ProbeSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let c = self.logits.first().map_or(0, Vec::len);
        let n = self.inputs.first().map_or(0, Vec::len);
        let mut s = String::from("fq_argmax");
        (0..c).for_each(|i| {
            let _ = write!(s, ",logit_{i}");
        });
        (0..n).for_each(|i| {
            let _ = write!(s, ",x_{i}");
        });
        s.push('\n');
        for ((x, z), a) in self
            .inputs
            .iter()
            .zip(&self.logits)
            .zip(&self.fake_quant_argmax)
        {
            if let Some(a) = a {
                let _ = write!(s, "{a}");
            }
            for v in z.iter().chain(x) {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Parse("empty probe file".into()))?
            .split(',')
            .map(str::trim)
            .collect();
        if head.first() != Some(&"fq_argmax") {
            return Err(Error::Parse(
                "probe header must start with fq_argmax".into(),
            ));
        }
        let c = head.iter().filter(|h| h.starts_with("logit_")).count();
        let n = head.iter().filter(|h| h.starts_with("x_")).count();
        if c == 0 || n == 0 || head.len() != 1 + c + n {
            return Err(Error::Parse(
                "probe header needs logit_ and x_ columns only".into(),
            ));
        }
        let mut set = ProbeSet {
            inputs: Vec::new(),
            logits: Vec::new(),
            fake_quant_argmax: Vec::new(),
        };
        for (ln, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |m: &str| Error::Parse(format!("probe row {}: {m}", ln + 1));
            if cells.len() != head.len() {
                return Err(bad("wrong column count"));
            }
            let fq = match cells[0] {
                "" => None,
                v => {
                    let a: usize = v.parse().map_err(|_| bad("bad fq_argmax"))?;
                    if a >= c {
                        return Err(bad("fq_argmax out of range"));
                    }
                    Some(a)
                }
            };
            let nums = cells[1..]
                .iter()
                .map(|v| v.parse::<f64>().map_err(|_| bad("bad number")))
                .collect::<Result<Vec<_>>>()?;
            set.fake_quant_argmax.push(fq);
            set.logits.push(nums[..c].to_vec());
            set.inputs.push(nums[c..].to_vec());
        }
        Ok(set)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

/// Graph output before a trailing softmax.
pub fn float_logits(graph: &LayerGraph, input: &[f64]) -> Result<Vec<f64>> {
    let mut edges = graph.forward_edges(input)?;
    let k = if matches!(graph.layers.last(), Some(Layer::Softmax)) {
        edges.len() - 2
    } else {
        edges.len() - 1
    };
    Ok(edges.swap_remove(k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeCheck {
    pub probes: usize,
    pub max_logit_error: f64,
    /// Share of probes whose int8 argmax equals the exporter's fake-quant
    /// argmax; `None` without an integer model or fake-quant labels.
    pub argmax_agreement: Option<f64>,
}

pub fn check_probes(
    graph: &LayerGraph,
    quantized: Option<&QuantizedModel>,
    probes: &ProbeSet,
) -> Result<ProbeCheck> {
    if probes.is_empty() {
        return Err(Error::InsufficientData("empty probe set".into()));
    }
    let mut max_err = 0.0f64;
    let (mut agree, mut compared) = (0usize, 0usize);
    for ((x, z), fq) in probes
        .inputs
        .iter()
        .zip(&probes.logits)
        .zip(&probes.fake_quant_argmax)
    {
        let ours = float_logits(graph, x)?;
        if ours.len() != z.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} logits in probe, model gives {}",
                z.len(),
                ours.len()
            )));
        }
        max_err = ours
            .iter()
            .zip(z)
            .fold(max_err, |m, (a, b)| m.max((a - b).abs()));
        if let (Some(q), Some(a)) = (quantized, fq) {
            compared += 1;
            agree += usize::from(argmax(&q.logits(x)?) == *a);
        }
    }
    Ok(ProbeCheck {
        probes: probes.len(),
        max_logit_error: max_err,
        argmax_agreement: (compared > 0).then(|| agree as f64 / compared as f64),
    })
}

//! Classification metrics and hypnograms.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::SleepStage;
use crate::windowing::WindowSet;

/// Counts indexed `[true][predicted]` in `SleepStage::ALL` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 4]; 4],
}

impl ConfusionMatrix {
    pub fn from_pairs(truth: &[SleepStage], pred: &[SleepStage]) -> Self {
        let mut m = ConfusionMatrix::default();
        for (t, p) in truth.iter().zip(pred) {
            m.counts[t.index()][p.index()] += 1;
        }
        m
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..4).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        (0..4).map(|i| self.counts[i][j]).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("true\\pred");
        for st in SleepStage::ALL {
            s.push(',');
            s.push_str(st.as_str());
        }
        s.push('\n');
        for st in SleepStage::ALL {
            s.push_str(st.as_str());
            for c in self.counts[st.index()] {
                let _ = write!(s, ",{c}");
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    /// Mean of the per-class F1 values.
    pub macro_f1: f64,
    pub per_class: [ClassScores; 4],
    pub confusion: ConfusionMatrix,
    /// Classes averaged over: those present in the truth or the predictions.
    pub evaluated: Vec<SleepStage>,
    /// Classes that never occur in the truth.
    pub absent: Vec<SleepStage>,
}

/// Accuracy, macro precision/recall/F1 and the confusion matrix.
///
/// Per-class precision (recall) with no predicted (true) samples is 0.
/// Macro averages run over the classes seen in either sequence; a class that
/// never occurs in the truth but is predicted contributes zero recall and F1.
pub fn compute_metrics(truth: &[SleepStage], pred: &[SleepStage]) -> Result<Metrics> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch(truth.len(), pred.len()));
    }
    if truth.is_empty() {
        return Err(Error::InsufficientData("no samples to evaluate".into()));
    }
    let cm = ConfusionMatrix::from_pairs(truth, pred);
    let mut per_class = [ClassScores::default(); 4];
    let mut evaluated = Vec::new();
    let mut absent = Vec::new();
    for st in SleepStage::ALL {
        let i = st.index();
        let tp = cm.counts[i][i] as f64;
        let support = cm.row_sum(i);
        let predicted = cm.col_sum(i);
        let precision = if predicted > 0 {
            tp / predicted as f64
        } else {
            0.0
        };
        let recall = if support > 0 {
            tp / support as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class[i] = ClassScores {
            precision,
            recall,
            f1,
            support,
        };
        if support == 0 {
            log::warn!("class {st} absent from truth");
            absent.push(st);
        }
        if support > 0 || predicted > 0 {
            evaluated.push(st);
        }
    }
    let avg = |f: fn(&ClassScores) -> f64| {
        evaluated
            .iter()
            .map(|s| f(&per_class[s.index()]))
            .sum::<f64>()
            / evaluated.len() as f64
    };
    Ok(Metrics {
        accuracy: cm.trace() as f64 / cm.total() as f64,
        macro_precision: avg(|c| c.precision),
        macro_recall: avg(|c| c.recall),
        macro_f1: avg(|c| c.f1),
        per_class,
        confusion: cm,
        evaluated,
        absent,
    })
}

/// One stage per step slot; `None` marks a slot without a prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypnogram {
    pub step_s: u32,
    pub entries: Vec<(f64, Option<SleepStage>)>,
}

impl Hypnogram {
    pub fn gaps(&self) -> usize {
        self.entries.iter().filter(|e| e.1.is_none()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("time_s,stage\n");
        for (t, st) in &self.entries {
            let _ = writeln!(s, "{t},{}", st.map_or("GAP", |v| v.as_str()));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Step plot with Wake on top and Deep at the bottom. Gaps break the line.
    pub fn to_svg(&self) -> String {
        let (w, h, m) = (800.0, 220.0, 40.0);
        let n = self.entries.len().max(1) as f64;
        let dx = (w - 2.0 * m) / n;
        let level = |st: SleepStage| m + st.index() as f64 * (h - 2.0 * m) / 3.0;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        for st in SleepStage::ALL {
            let y = level(st);
            let _ = writeln!(
                s,
                r#"<text x="4" y="{}" font-size="11" font-family="sans-serif">{}</text>"#,
                y + 4.0,
                st.as_str()
            );
            let _ = writeln!(
                s,
                r##"<line x1="{m}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/>"##,
                w - m
            );
        }
        let mut path = String::new();
        let mut pen_down = false;
        for (i, (_, st)) in self.entries.iter().enumerate() {
            let x0 = m + i as f64 * dx;
            match st {
                Some(st) => {
                    let y = level(*st);
                    if pen_down {
                        let _ = write!(path, " L{x0:.2},{y:.2}");
                    } else {
                        let _ = write!(path, " M{x0:.2},{y:.2}");
                    }
                    let _ = write!(path, " L{:.2},{y:.2}", x0 + dx);
                    pen_down = true;
                }
                None => pen_down = false,
            }
        }
        let _ = writeln!(
            s,
            r##"<path d="{}" fill="none" stroke="#1f4e9c" stroke-width="1.5"/>"##,
            path.trim()
        );
        let _ = writeln!(
            s,
            r#"<text x="{m}" y="{}" font-size="11" font-family="sans-serif">0 s</text>"#,
            h - 10.0
        );
        let end = self
            .entries
            .last()
            .map_or(0.0, |e| e.0 + self.step_s as f64);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" font-family="sans-serif" text-anchor="end">{end} s</text>"#,
            w - m,
            h - 10.0
        );
        s.push_str("</svg>\n");
        s
    }

    pub fn write_svg(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_svg())?;
        Ok(())
    }
}

/// Lay predictions out on the window set's step grid, from time zero to the
/// last enumerated window (kept or dropped). Slots without a kept window
/// become gaps.
pub fn emit_hypnogram(set: &WindowSet, predictions: &[SleepStage]) -> Result<Hypnogram> {
    if predictions.len() != set.windows.len() {
        return Err(Error::LengthMismatch(set.windows.len(), predictions.len()));
    }
    let step = set.config.step_samples(set.sample_rate_hz);
    let last = set
        .windows
        .iter()
        .map(|w| w.start_sample)
        .chain(set.dropped.iter().map(|d| d.start_sample))
        .max();
    let slots = last.map_or(0, |l| l / step + 1);
    let mut entries: Vec<(f64, Option<SleepStage>)> = (0..slots)
        .map(|i| ((i * step) as f64 / set.sample_rate_hz as f64, None))
        .collect();
    for (w, p) in set.windows.iter().zip(predictions) {
        entries[w.start_sample / step].1 = Some(*p);
    }
    Ok(Hypnogram {
        step_s: set.config.step_s,
        entries,
    })
}

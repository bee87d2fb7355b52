//! Handcrafted features from the ECG of one analysis window.
//!
//! Four families are computed on two segments of each 5-min window: the
//! first 30 s (`step30`) and the full window (`win300`). Feature names follow
//! `<scale>.<family>.<name>` and the global order is scale, then family
//! (`edr`, `time`, `freq`, `nonlinear`), then the family's own order. Each
//! scale carries 15 + 19 + 7 + 47 = 88 features.

pub mod edr;
pub mod freq;
pub mod nonlinear;
pub mod rfe;
pub mod stats;
pub mod time;

use std::fmt;
use std::path::Path;

use rayon::prelude::*;

use crate::cardio::{derive_edr_series, derive_rr_series, detect_rpeaks};
use crate::error::{Error, Result};
use crate::ingest::{EcgRecording, SleepStage};
use crate::windowing::{SplitTag, WindowSet};

pub use freq::FreqConfig;
pub use nonlinear::NonlinearConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flag {
    Ok,
    /// Not defined for this input (too short, zero denominator). Value is NaN.
    Undefined,
    /// Computed, but on a segment shorter than the method wants.
    Unreliable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    pub name: &'static str,
    pub value: f64,
    pub flag: Flag,
}

impl Feature {
    /// Non-finite values are stored as NaN with the `Undefined` flag.
    pub fn new(name: &'static str, value: f64) -> Self {
        if value.is_finite() {
            Self {
                name,
                value,
                flag: Flag::Ok,
            }
        } else {
            Self::undefined(name)
        }
    }

    pub fn undefined(name: &'static str) -> Self {
        Self {
            name,
            value: f64::NAN,
            flag: Flag::Undefined,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scale {
    Step30,
    Win300,
}

impl Scale {
    pub const ALL: [Scale; 2] = [Scale::Step30, Scale::Win300];

    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Step30 => "step30",
            Scale::Win300 => "win300",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Edr,
    Time,
    Freq,
    Nonlinear,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Edr, Family::Time, Family::Freq, Family::Nonlinear];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Edr => "edr",
            Family::Time => "time",
            Family::Freq => "freq",
            Family::Nonlinear => "nonlinear",
        }
    }

    pub fn names(self) -> &'static [&'static str] {
        match self {
            Family::Edr => &edr::NAMES,
            Family::Time => &time::NAMES,
            Family::Freq => &freq::NAMES,
            Family::Nonlinear => &nonlinear::NAMES,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const FEATURES_PER_SCALE: usize = 88;

/// The full ordered list of qualified names.
pub fn catalog() -> Vec<String> {
    Scale::ALL.iter().flat_map(|&s| scale_catalog(s)).collect()
}

pub fn scale_catalog(scale: Scale) -> Vec<String> {
    Family::ALL
        .iter()
        .flat_map(|f| {
            f.names()
                .iter()
                .map(move |n| format!("{}.{}.{}", scale.as_str(), f.as_str(), n))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub step_s: u32,
    pub freq: FreqConfig,
    pub nonlinear: NonlinearConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            step_s: 30,
            freq: FreqConfig::default(),
            nonlinear: NonlinearConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub window_id: String,
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub flags: Vec<Flag>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

/// Concatenate the two scales, prefixing each family feature name.
/// Both inputs must be the 88 per-scale features in catalog order.
pub fn assemble_feature_vector(
    window_id: &str,
    step: &[Feature],
    window: &[Feature],
) -> FeatureVector {
    let mut v = FeatureVector {
        window_id: window_id.to_string(),
        names: Vec::with_capacity(step.len() + window.len()),
        values: Vec::with_capacity(step.len() + window.len()),
        flags: Vec::with_capacity(step.len() + window.len()),
    };
    for (scale, feats) in [(Scale::Step30, step), (Scale::Win300, window)] {
        let mut i = 0;
        for fam in Family::ALL {
            for _ in fam.names() {
                let f = &feats[i];
                v.names
                    .push(format!("{}.{}.{}", scale.as_str(), fam.as_str(), f.name));
                v.values.push(f.value);
                v.flags.push(f.flag);
                i += 1;
            }
        }
    }
    v
}

/// The 88 features of one segment. Fails when the segment has too few
/// detectable beats for an RR series.
pub fn extract_scale(segment: &[f64], rate: u32, cfg: &FeatureConfig) -> Result<Vec<Feature>> {
    let peaks = detect_rpeaks(segment, rate)?;
    let rr = derive_rr_series(&peaks.peak_indices, rate)?;
    let edr_series = derive_edr_series(segment, &peaks)?;
    let mut out = edr::compute_edr_features(&edr_series.values);
    out.extend(time::compute_hrv_time_features(&rr.rr_ms)?);
    match freq::compute_hrv_freq_features(&rr.rr_ms, &rr.times_s, &cfg.freq) {
        Ok(f) => out.extend(f),
        Err(Error::InsufficientData(_)) => {
            out.extend(freq::NAMES.iter().map(|&n| Feature::undefined(n)))
        }
        Err(e) => return Err(e),
    }
    out.extend(nonlinear::compute_hrv_nonlinear_features(
        &rr.rr_ms,
        &cfg.nonlinear,
    ));
    debug_assert_eq!(out.len(), FEATURES_PER_SCALE);
    Ok(out)
}

/// Features of one window: the first `step_s` seconds and the whole segment.
pub fn extract_window_features(
    window_id: &str,
    segment: &[f64],
    rate: u32,
    cfg: &FeatureConfig,
) -> Result<FeatureVector> {
    let step_len = (cfg.step_s as usize * rate as usize).min(segment.len());
    let step = extract_scale(&segment[..step_len], rate, cfg)?;
    let window = extract_scale(segment, rate, cfg)?;
    Ok(assemble_feature_vector(window_id, &step, &window))
}

pub fn window_id(subject: &str, start_sample: usize) -> String {
    format!("{subject}:{start_sample}")
}

/// Result of extracting a whole window set.
#[derive(Debug)]
pub struct Extraction {
    /// Index into `WindowSet::windows` and the vector, in window order.
    pub vectors: Vec<(usize, FeatureVector)>,
    /// Windows skipped, with the reason.
    pub skipped: Vec<(usize, Error)>,
}

/// Extract every window in parallel. Order of the output follows the
/// window order regardless of scheduling.
pub fn extract_windowset(rec: &EcgRecording, set: &WindowSet, cfg: &FeatureConfig) -> Extraction {
    let results: Vec<(usize, Result<FeatureVector>)> = set
        .windows
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let id = window_id(&rec.subject_id, w.start_sample);
            (
                i,
                extract_window_features(&id, w.samples(rec), rec.sample_rate_hz, cfg),
            )
        })
        .collect();
    let mut out = Extraction {
        vectors: Vec::new(),
        skipped: Vec::new(),
    };
    for (i, r) in results {
        match r {
            Ok(v) => out.vectors.push((i, v)),
            Err(e) => {
                log::warn!("window {i} skipped: {e}");
                out.skipped.push((i, e));
            }
        }
    }
    out
}

/// Feature matrix with labels and split tags.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<SleepStage>,
    pub splits: Vec<Option<SplitTag>>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>) -> Self {
        Self {
            names,
            rows: Vec::new(),
            labels: Vec::new(),
            splits: Vec::new(),
        }
    }

    pub fn push(
        &mut self,
        values: Vec<f64>,
        label: SleepStage,
        split: Option<SplitTag>,
    ) -> Result<()> {
        if values.len() != self.names.len() {
            return Err(Error::FeatureMismatch(format!(
                "row has {} values, table has {} columns",
                values.len(),
                self.names.len()
            )));
        }
        self.rows.push(values);
        self.labels.push(label);
        self.splits.push(split);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows (and labels) carrying the given split tag.
    pub fn subset(&self, tag: SplitTag) -> (Vec<Vec<f64>>, Vec<SleepStage>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..self.rows.len() {
            if self.splits[i] == Some(tag) {
                x.push(self.rows[i].clone());
                y.push(self.labels[i]);
            }
        }
        (x, y)
    }

    /// Keep only the named columns, in the given order.
    pub fn select(&self, keep: &[String]) -> Result<FeatureTable> {
        let idx: Vec<usize> = keep
            .iter()
            .map(|k| {
                self.names
                    .iter()
                    .position(|n| n == k)
                    .ok_or_else(|| Error::FeatureMismatch(format!("no feature named `{k}`")))
            })
            .collect::<Result<_>>()?;
        Ok(FeatureTable {
            names: keep.to_vec(),
            rows: self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&i| r[i]).collect())
                .collect(),
            labels: self.labels.clone(),
            splits: self.splits.clone(),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.names.join(",");
        s.push_str(",label,split\n");
        for i in 0..self.rows.len() {
            for v in &self.rows[i] {
                s.push_str(&format!("{v:?},"));
            }
            s.push_str(self.labels[i].as_str());
            s.push(',');
            if let Some(t) = self.splits[i] {
                s.push_str(t.as_str());
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<FeatureTable> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Parse("empty feature table".into()))?
            .split(',')
            .collect();
        if header.len() < 2 || header[header.len() - 2..] != ["label", "split"] {
            return Err(Error::Parse(
                "feature table header must end with label,split".into(),
            ));
        }
        let k = header.len() - 2;
        let mut t = FeatureTable::new(header[..k].iter().map(|s| s.to_string()).collect());
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != k + 2 {
                return Err(Error::Parse(format!(
                    "row {}: expected {} cells",
                    ln + 2,
                    k + 2
                )));
            }
            let values = cells[..k]
                .iter()
                .map(|c| {
                    c.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("row {}: bad number `{c}`", ln + 2)))
                })
                .collect::<Result<Vec<_>>>()?;
            let label = cells[k].parse::<SleepStage>()?;
            let split = match cells[k + 1] {
                "" => None,
                s => Some(s.parse::<SplitTag>()?),
            };
            t.push(values, label, split)?;
        }
        Ok(t)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<FeatureTable> {
        FeatureTable::from_csv(&std::fs::read_to_string(path)?)
    }
}

//! Stage-to-stage glue used by the CLI, the examples and the end-to-end tests.

use rayon::prelude::*;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::eval::{compute_metrics, emit_hypnogram, Hypnogram, Metrics};
use crate::features::{catalog, extract_windowset, FeatureTable};
use crate::ingest::{EcgRecording, SleepStage};
use crate::ml::{argmax, train_classifier, ClassifierSpec, TrainedModel};
use crate::qnn::{LayerGraph, ModelFile, QuantizedModel};
use crate::windowing::{
    generate_windows, split_dataset_with, window_offsets, SplitTag, WindowSet, WindowingConfig,
};

/// Feature rows of every ML window over a set of recordings.
#[derive(Debug, Clone)]
pub struct MlDataset {
    pub table: FeatureTable,
    /// `subject:start_sample` per row.
    pub window_ids: Vec<String>,
    /// Windows whose features could not be extracted.
    pub skipped: usize,
}

/// ML windows → features → one stratified split over all rows.
pub fn build_feature_table(recordings: &[EcgRecording], cfg: &Config) -> Result<MlDataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut window_ids = Vec::new();
    let mut skipped = 0;
    for rec in recordings {
        let set = generate_windows(rec, &cfg.ml_window)?;
        let ex = extract_windowset(rec, &set, &cfg.features);
        skipped += ex.skipped.len();
        for (i, v) in ex.vectors {
            labels.push(set.windows[i].label);
            window_ids.push(v.window_id);
            rows.push(v.values);
        }
    }
    let split = split_dataset_with(&labels, cfg.seed, cfg.split)?;
    let tags = split.tags(labels.len());
    let mut table = FeatureTable::new(catalog());
    for ((r, l), t) in rows.into_iter().zip(labels).zip(tags) {
        table.push(r, l, t)?;
    }
    Ok(MlDataset {
        table,
        window_ids,
        skipped,
    })
}

/// Accuracy of always predicting the most frequent training stage.
pub fn majority_baseline(train: &[SleepStage], test: &[SleepStage]) -> (SleepStage, f64) {
    let mut counts = [0usize; SleepStage::COUNT];
    train.iter().for_each(|s| counts[s.index()] += 1);
    let f: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let majority = SleepStage::ALL[argmax(&f)];
    let hits = test.iter().filter(|&&s| s == majority).count();
    (majority, hits as f64 / test.len().max(1) as f64)
}

#[derive(Debug, Clone)]
pub struct MlRun {
    pub model: TrainedModel,
    pub test_metrics: Metrics,
    pub majority: SleepStage,
    pub majority_accuracy: f64,
}

/// Fit on the train split and score on the test split.
pub fn train_and_evaluate(table: &FeatureTable, spec: &ClassifierSpec) -> Result<MlRun> {
    let (x, y) = table.subset(SplitTag::Train);
    let (xt, yt) = table.subset(SplitTag::Test);
    if xt.is_empty() {
        return Err(Error::InsufficientData("test split is empty".into()));
    }
    let model = train_classifier(spec, &table.names, &x, &y)?;
    let pred = model.predict(&table.names, &xt)?;
    let (majority, majority_accuracy) = majority_baseline(&y, &yt);
    Ok(MlRun {
        test_metrics: compute_metrics(&yt, &pred.labels)?,
        model,
        majority,
        majority_accuracy,
    })
}

/// Float or integer CNN behind one call.
#[derive(Debug, Clone, Copy)]
pub enum Cnn<'a> {
    Float(&'a LayerGraph),
    Int8(&'a QuantizedModel),
}

impl<'a> From<&'a ModelFile> for Cnn<'a> {
    fn from(m: &'a ModelFile) -> Self {
        match m {
            ModelFile::Float(g) => Cnn::Float(g),
            ModelFile::Quantized(q) => Cnn::Int8(q),
        }
    }
}

impl Cnn<'_> {
    pub fn input_len(&self) -> usize {
        match self {
            Cnn::Float(g) => g.input_shape.size(),
            Cnn::Int8(q) => q.input_shape.size(),
        }
    }

    pub fn proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Cnn::Float(g) => g.infer(x),
            Cnn::Int8(q) => q.infer(x),
        }
    }

    /// Stage per segment, in parallel.
    pub fn classify(&self, segments: &[&[f64]]) -> Result<Vec<SleepStage>> {
        segments
            .par_iter()
            .map(|s| self.proba(s).map(|p| SleepStage::ALL[argmax(&p)]))
            .collect()
    }
}

fn check_input(cnn: &Cnn<'_>, rec: &EcgRecording, cfg: &WindowingConfig) -> Result<()> {
    let w = cfg.window_samples(rec.sample_rate_hz);
    if w != cnn.input_len() {
        return Err(Error::ShapeMismatch(format!(
            "a {} s window at {} Hz has {w} samples, the model takes {}",
            cfg.window_s,
            rec.sample_rate_hz,
            cnn.input_len()
        )));
    }
    Ok(())
}

/// Labelled DL windows, their predictions and the hypnogram (gaps where a
/// window was dropped).
pub fn cnn_labelled(
    cnn: Cnn<'_>,
    rec: &EcgRecording,
    cfg: &WindowingConfig,
) -> Result<(WindowSet, Vec<SleepStage>, Hypnogram)> {
    check_input(&cnn, rec, cfg)?;
    let set = generate_windows(rec, cfg)?;
    let segs: Vec<&[f64]> = set.windows.iter().map(|w| w.samples(rec)).collect();
    let pred = cnn.classify(&segs)?;
    let hyp = emit_hypnogram(&set, &pred)?;
    Ok((set, pred, hyp))
}

/// Hypnogram of an unannotated recording: every window offset is scored.
pub fn cnn_hypnogram(cnn: Cnn<'_>, rec: &EcgRecording, cfg: &WindowingConfig) -> Result<Hypnogram> {
    check_input(&cnn, rec, cfg)?;
    let (w, step) = (
        cfg.window_samples(rec.sample_rate_hz),
        cfg.step_samples(rec.sample_rate_hz),
    );
    let offsets: Vec<usize> = window_offsets(rec.samples.len(), w, step).collect();
    if offsets.is_empty() {
        return Err(Error::RecordingTooShort {
            samples: rec.samples.len(),
            needed: w,
        });
    }
    let segs: Vec<&[f64]> = offsets.iter().map(|&o| &rec.samples[o..o + w]).collect();
    let pred = cnn.classify(&segs)?;
    Ok(Hypnogram {
        step_s: cfg.step_s,
        entries: offsets
            .iter()
            .zip(pred)
            .map(|(&o, p)| (o as f64 / rec.sample_rate_hz as f64, Some(p)))
            .collect(),
    })
}

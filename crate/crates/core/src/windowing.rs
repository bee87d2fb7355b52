//! Sliding-window segmentation, window labels and train/validation/test splits.
//!
//! Two presets exist: 300-s windows every 30 s for the feature-based learners
//! and 30-s windows every 10 s for the CNN path. Windows are `(offset, length)`
//! views into the recording; samples are never copied.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::{EcgRecording, SleepStage, StageAnnotation, EPOCH_SECONDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WindowMode {
    Ml,
    Dl,
}

impl WindowMode {
    pub fn as_str(self) -> &'static str {
        match self {
            WindowMode::Ml => "ML",
            WindowMode::Dl => "DL",
        }
    }
}

impl fmt::Display for WindowMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WindowMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ml" => Ok(WindowMode::Ml),
            "dl" => Ok(WindowMode::Dl),
            other => Err(Error::InvalidConfig(format!(
                "unknown window mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowingConfig {
    pub mode: WindowMode,
    pub window_s: u32,
    pub step_s: u32,
}

impl WindowingConfig {
    /// 5-minute window, 30-second step.
    pub const fn ml() -> Self {
        Self {
            mode: WindowMode::Ml,
            window_s: 300,
            step_s: 30,
        }
    }

    /// 30-second window, 10-second step.
    pub const fn dl() -> Self {
        Self {
            mode: WindowMode::Dl,
            window_s: 30,
            step_s: 10,
        }
    }

    pub fn preset(mode: WindowMode) -> Self {
        match mode {
            WindowMode::Ml => Self::ml(),
            WindowMode::Dl => Self::dl(),
        }
    }

    pub fn new(mode: WindowMode, window_s: u32, step_s: u32) -> Result<Self> {
        if step_s == 0 || window_s <= step_s {
            return Err(Error::InvalidConfig(format!(
                "need window_s > step_s > 0, got window {window_s} s, step {step_s} s"
            )));
        }
        Ok(Self {
            mode,
            window_s,
            step_s,
        })
    }

    pub fn window_samples(&self, rate: u32) -> usize {
        self.window_s as usize * rate as usize
    }

    pub fn step_samples(&self, rate: u32) -> usize {
        self.step_s as usize * rate as usize
    }
}

/// Number of windows of length `window` at stride `step` in `len` samples:
/// `floor((len - window) / step) + 1`, or zero when the signal is too short.
pub fn window_count(len: usize, window: usize, step: usize) -> usize {
    assert!(step > 0, "step must be positive");
    if len < window {
        0
    } else {
        (len - window) / step + 1
    }
}

pub fn window_offsets(len: usize, window: usize, step: usize) -> impl Iterator<Item = usize> {
    (0..window_count(len, window, step)).map(move |i| i * step)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start_sample: usize,
    pub length_samples: usize,
    pub label: SleepStage,
    pub mode: WindowMode,
}

impl Window {
    pub fn samples<'a>(&self, recording: &'a EcgRecording) -> &'a [f64] {
        &recording.samples[self.start_sample..self.start_sample + self.length_samples]
    }

    pub fn end_sample(&self) -> usize {
        self.start_sample + self.length_samples
    }
}

/// Why a window at a given offset carries no label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    /// Overlaps an artifact or indeterminate epoch.
    Excluded,
    /// Extends past the last annotated epoch.
    Unannotated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DroppedWindow {
    pub start_sample: usize,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub subject_id: String,
    pub sample_rate_hz: u32,
    pub config: WindowingConfig,
    pub windows: Vec<Window>,
    pub dropped: Vec<DroppedWindow>,
}

impl WindowSet {
    pub fn labels(&self) -> Vec<SleepStage> {
        self.windows.iter().map(|w| w.label).collect()
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

struct EpochIndex<'a> {
    epoch_len: usize,
    slots: Vec<Option<&'a StageAnnotation>>,
}

impl<'a> EpochIndex<'a> {
    fn new(annotations: &'a [StageAnnotation], rate: u32) -> Self {
        let epoch_len = EPOCH_SECONDS * rate as usize;
        let n = annotations
            .iter()
            .map(|a| a.start_sample / epoch_len + 1)
            .max()
            .unwrap_or(0);
        let mut slots = vec![None; n];
        for a in annotations {
            slots[a.start_sample / epoch_len] = Some(a);
        }
        Self { epoch_len, slots }
    }

    fn get(&self, epoch: usize) -> Option<&'a StageAnnotation> {
        self.slots.get(epoch).copied().flatten()
    }
}

/// Label one window.
///
/// ML windows take the stage of the epoch under their first 30 s. DL windows
/// take the stage covering the most samples; a tie goes to the epoch holding
/// the window midpoint. Any covered epoch that is excluded or missing makes
/// the window unlabeled.
pub fn assign_window_label(
    start: usize,
    length: usize,
    mode: WindowMode,
    annotations: &[StageAnnotation],
    rate: u32,
) -> std::result::Result<SleepStage, DropReason> {
    label_with_index(start, length, mode, &EpochIndex::new(annotations, rate))
}

fn label_with_index(
    start: usize,
    length: usize,
    mode: WindowMode,
    index: &EpochIndex<'_>,
) -> std::result::Result<SleepStage, DropReason> {
    let first = start / index.epoch_len;
    let last = (start + length - 1) / index.epoch_len;
    let mut covered = [0usize; SleepStage::COUNT];
    for epoch in first..=last {
        let ann = index.get(epoch).ok_or(DropReason::Unannotated)?;
        let stage = ann.raw_label.stage().ok_or(DropReason::Excluded)?;
        let lo = start.max(epoch * index.epoch_len);
        let hi = (start + length).min((epoch + 1) * index.epoch_len);
        covered[stage.index()] += hi - lo;
    }
    let stage_of = |sample: usize| {
        index
            .get(sample / index.epoch_len)
            .and_then(|a| a.raw_label.stage())
            .ok_or(DropReason::Unannotated)
    };
    match mode {
        WindowMode::Ml => stage_of(start),
        WindowMode::Dl => {
            let best = *covered.iter().max().expect("four classes");
            let tied: Vec<SleepStage> = SleepStage::ALL
                .into_iter()
                .filter(|s| covered[s.index()] == best)
                .collect();
            if tied.len() == 1 {
                return Ok(tied[0]);
            }
            let mid = stage_of(start + length / 2)?;
            Ok(if tied.contains(&mid) { mid } else { tied[0] })
        }
    }
}

/// Enumerate every window of `config` over the recording and label it from
/// the recording's annotations. Unlabelable offsets are recorded in
/// [`WindowSet::dropped`].
pub fn generate_windows(recording: &EcgRecording, config: &WindowingConfig) -> Result<WindowSet> {
    let rate = recording.sample_rate_hz;
    let w = config.window_samples(rate);
    let s = config.step_samples(rate);
    let len = recording.samples.len();
    if len < w {
        return Err(Error::RecordingTooShort {
            samples: len,
            needed: w,
        });
    }
    let index = EpochIndex::new(&recording.annotations, rate);
    let mut windows = Vec::with_capacity(window_count(len, w, s));
    let mut dropped = Vec::new();
    for start in window_offsets(len, w, s) {
        match label_with_index(start, w, config.mode, &index) {
            Ok(label) => windows.push(Window {
                start_sample: start,
                length_samples: w,
                label,
                mode: config.mode,
            }),
            Err(reason) => dropped.push(DroppedWindow {
                start_sample: start,
                reason,
            }),
        }
    }
    Ok(WindowSet {
        subject_id: recording.subject_id.clone(),
        sample_rate_hz: rate,
        config: *config,
        windows,
        dropped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Validation,
    Test,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Validation => "validation",
            SplitTag::Test => "test",
        }
    }
}

impl FromStr for SplitTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitTag::Train),
            "validation" => Ok(SplitTag::Validation),
            "test" => Ok(SplitTag::Test),
            other => Err(Error::Parse(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub test: f64,
    /// Carved out of the training portion.
    pub validation: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            test: 0.2,
            validation: 0.1,
        }
    }
}

/// Indices into a window list, partitioned into three disjoint sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    /// Stages with no windows at all; stratification skipped them.
    pub absent: Vec<SleepStage>,
}

impl DatasetSplit {
    pub fn tags(&self, n: usize) -> Vec<Option<SplitTag>> {
        let mut tags = vec![None; n];
        for &i in &self.train {
            tags[i] = Some(SplitTag::Train);
        }
        for &i in &self.validation {
            tags[i] = Some(SplitTag::Validation);
        }
        for &i in &self.test {
            tags[i] = Some(SplitTag::Test);
        }
        tags
    }
}

fn take_fraction(n: usize, fraction: f64) -> usize {
    ((n as f64) * fraction).round() as usize
}

/// Window-level split stratified by stage, deterministic in `seed`.
pub fn split_dataset(labels: &[SleepStage], seed: u64) -> Result<DatasetSplit> {
    split_dataset_with(labels, seed, SplitFractions::default())
}

pub fn split_dataset_with(
    labels: &[SleepStage],
    seed: u64,
    fractions: SplitFractions,
) -> Result<DatasetSplit> {
    if labels.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "need at least 10 labeled windows to split, got {}",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = DatasetSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed,
        absent: Vec::new(),
    };
    for stage in SleepStage::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == stage).collect();
        if idx.is_empty() {
            log::warn!("stage {stage} absent from window set; stratification skips it");
            split.absent.push(stage);
            continue;
        }
        idx.shuffle(&mut rng);
        let n_test = take_fraction(idx.len(), fractions.test);
        let n_val = take_fraction(idx.len() - n_test, fractions.validation);
        split.test.extend_from_slice(&idx[..n_test]);
        split
            .validation
            .extend_from_slice(&idx[n_test..n_test + n_val]);
        split.train.extend_from_slice(&idx[n_test + n_val..]);
    }
    split.train.sort_unstable();
    split.validation.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Subject-level split: whole groups go to one side. Groups are shuffled and
/// assigned to test until at least the test fraction of windows is reached,
/// then to validation likewise.
pub fn split_by_group(
    groups: &[&str],
    labels: &[SleepStage],
    seed: u64,
    fractions: SplitFractions,
) -> Result<DatasetSplit> {
    if groups.len() != labels.len() {
        return Err(Error::LengthMismatch(groups.len(), labels.len()));
    }
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        members.entry(g).or_default().push(i);
    }
    if members.len() < 2 {
        return Err(Error::InsufficientData(
            "subject split needs at least two subjects".into(),
        ));
    }
    let mut order: Vec<&str> = members.keys().copied().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = labels.len() as f64;
    let mut split = DatasetSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed,
        absent: SleepStage::ALL
            .into_iter()
            .filter(|s| !labels.contains(s))
            .collect(),
    };
    let mut groups_iter = order.into_iter().peekable();
    while let Some(g) = groups_iter.next() {
        let idx = &members[g];
        if (split.test.len() as f64) < fractions.test * n && groups_iter.peek().is_some() {
            split.test.extend_from_slice(idx);
        } else if (split.validation.len() as f64)
            < fractions.validation * (n - split.test.len() as f64)
            && groups_iter.peek().is_some()
        {
            split.validation.extend_from_slice(idx);
        } else {
            split.train.extend_from_slice(idx);
        }
    }
    split.train.sort_unstable();
    split.validation.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// One row of a window manifest CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub subject: String,
    pub start_sample: usize,
    pub length: usize,
    pub mode: WindowMode,
    pub label: SleepStage,
    pub split: Option<SplitTag>,
}

pub const MANIFEST_HEADER: &str = "subject,start_sample,length,mode,label,split";

pub fn manifest_rows(set: &WindowSet, tags: Option<&[Option<SplitTag>]>) -> Vec<ManifestRow> {
    set.windows
        .iter()
        .enumerate()
        .map(|(i, w)| ManifestRow {
            subject: set.subject_id.clone(),
            start_sample: w.start_sample,
            length: w.length_samples,
            mode: w.mode,
            label: w.label,
            split: tags.and_then(|t| t[i]),
        })
        .collect()
}

pub fn write_manifest(rows: &[ManifestRow], path: &Path) -> Result<()> {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.subject,
            r.start_sample,
            r.length,
            r.mode,
            r.label,
            r.split.map(SplitTag::as_str).unwrap_or("")
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(MANIFEST_HEADER) {
        return Err(Error::MalformedHeader(format!(
            "expected `{MANIFEST_HEADER}`"
        )));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|e| Error::Parse(format!("{s}: {e}")))
    };
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::Parse(format!(
                    "manifest row `{line}` has {} fields",
                    f.len()
                )));
            }
            Ok(ManifestRow {
                subject: f[0].to_string(),
                start_sample: num(f[1])?,
                length: num(f[2])?,
                mode: f[3].parse()?,
                label: f[4].parse()?,
                split: if f[5].is_empty() {
                    None
                } else {
                    Some(f[5].parse()?)
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::RawLabel;

    fn recording(labels: &[RawLabel]) -> EcgRecording {
        EcgRecording::new("t", 128, vec![0.0; labels.len() * 3840])
            .unwrap()
            .with_labels(labels)
            .unwrap()
    }

    #[test]
    fn presets() {
        assert_eq!(WindowingConfig::ml().window_samples(128), 38400);
        assert_eq!(WindowingConfig::dl().step_samples(128), 1280);
        assert!(WindowingConfig::new(WindowMode::Dl, 10, 10).is_err());
        assert!(WindowingConfig::new(WindowMode::Dl, 10, 0).is_err());
    }

    #[test]
    fn one_hour_counts() {
        let rec = recording(&[RawLabel::S2; 120]);
        assert_eq!(
            generate_windows(&rec, &WindowingConfig::dl())
                .unwrap()
                .len(),
            358
        );
        assert_eq!(
            generate_windows(&rec, &WindowingConfig::ml())
                .unwrap()
                .len(),
            111
        );
    }

    #[test]
    fn exactly_one_window() {
        let rec = recording(&[RawLabel::W]);
        let set = generate_windows(&rec, &WindowingConfig::dl()).unwrap();
        assert_eq!(set.windows.len(), 1);
        assert_eq!(set.windows[0].start_sample, 0);
    }

    #[test]
    fn too_short() {
        let rec = recording(&[RawLabel::W; 9]);
        assert!(matches!(
            generate_windows(&rec, &WindowingConfig::ml()),
            Err(Error::RecordingTooShort { .. })
        ));
    }

    #[test]
    fn dl_single_epoch() {
        let rec = recording(&[RawLabel::S1, RawLabel::S2]);
        let l = assign_window_label(3840, 3840, WindowMode::Dl, &rec.annotations, 128).unwrap();
        assert_eq!(l, SleepStage::Light);
    }

    #[test]
    fn dl_majority() {
        // start at 10 s: 20 s of Wake then 10 s of Light
        let rec = recording(&[RawLabel::W, RawLabel::S2]);
        let l = assign_window_label(1280, 3840, WindowMode::Dl, &rec.annotations, 128).unwrap();
        assert_eq!(l, SleepStage::Wake);
        let l = assign_window_label(2560, 3840, WindowMode::Dl, &rec.annotations, 128).unwrap();
        assert_eq!(l, SleepStage::Light);
    }

    #[test]
    fn dl_tie_goes_to_midpoint_epoch() {
        // 15 s Wake + 15 s REM with a window of 30 s starting at 15 s: the
        // midpoint (30 s) lies in the REM epoch.
        let rec = recording(&[RawLabel::W, RawLabel::Rem]);
        let l = assign_window_label(1920, 3840, WindowMode::Dl, &rec.annotations, 128).unwrap();
        assert_eq!(l, SleepStage::Rem);
    }

    #[test]
    fn ml_takes_first_epoch() {
        let mut labels = vec![RawLabel::S4; 10];
        labels[0] = RawLabel::Rem;
        let rec = recording(&labels);
        let l = assign_window_label(0, 38400, WindowMode::Ml, &rec.annotations, 128).unwrap();
        assert_eq!(l, SleepStage::Rem);
    }

    #[test]
    fn excluded_epochs_drop_windows() {
        let mut labels = vec![RawLabel::S2; 12];
        labels[5] = RawLabel::Artifact;
        let rec = recording(&labels);
        let set = generate_windows(&rec, &WindowingConfig::dl()).unwrap();
        for w in &set.windows {
            assert!(w.end_sample() <= 5 * 3840 || w.start_sample >= 6 * 3840);
        }
        assert!(set.dropped.iter().all(|d| d.reason == DropReason::Excluded));
        assert_eq!(
            set.windows.len() + set.dropped.len(),
            window_count(12 * 3840, 3840, 1280)
        );
    }

    #[test]
    fn missing_annotations_drop_windows() {
        let rec = EcgRecording::new("t", 128, vec![0.0; 4 * 3840])
            .unwrap()
            .with_labels(&[RawLabel::W, RawLabel::W])
            .unwrap();
        let set = generate_windows(&rec, &WindowingConfig::dl()).unwrap();
        assert_eq!(set.windows.len(), 4);
        assert!(set
            .dropped
            .iter()
            .all(|d| d.reason == DropReason::Unannotated));
    }

    #[test]
    fn balanced_split_counts() {
        let labels: Vec<SleepStage> = SleepStage::ALL.iter().flat_map(|&s| [s; 25]).collect();
        let split = split_dataset(&labels, 7).unwrap();
        for s in SleepStage::ALL {
            assert_eq!(split.test.iter().filter(|&&i| labels[i] == s).count(), 5);
            // 10% of the remaining 20
            assert_eq!(
                split.validation.iter().filter(|&&i| labels[i] == s).count(),
                2
            );
        }
        assert_eq!(
            split.train.len() + split.validation.len() + split.test.len(),
            100
        );
        assert_eq!(split, split_dataset(&labels, 7).unwrap());
        assert_ne!(split.test, split_dataset(&labels, 8).unwrap().test);
    }

    #[test]
    fn imbalanced_split_within_one() {
        let mut labels = vec![SleepStage::Light; 700];
        labels.extend([SleepStage::Wake; 100]);
        labels.extend([SleepStage::Rem; 100]);
        labels.extend([SleepStage::Deep; 100]);
        let split = split_dataset(&labels, 3).unwrap();
        for s in SleepStage::ALL {
            let n = labels.iter().filter(|&&l| l == s).count() as f64;
            let t = split.test.iter().filter(|&&i| labels[i] == s).count() as f64;
            assert!((t - 0.2 * n).abs() <= 1.0);
        }
    }

    #[test]
    fn absent_class_is_reported() {
        let labels = vec![SleepStage::Wake; 20];
        let split = split_dataset(&labels, 1).unwrap();
        assert_eq!(split.absent.len(), 3);
        assert_eq!(split.test.len(), 4);
    }

    #[test]
    fn group_split_keeps_subjects_together() {
        let groups: Vec<&str> = (0..100).map(|i| ["a", "b", "c", "d", "e"][i % 5]).collect();
        let labels = vec![SleepStage::Light; 100];
        let split = split_by_group(&groups, &labels, 4, SplitFractions::default()).unwrap();
        let tags = split.tags(100);
        for i in 0..100 {
            for j in 0..100 {
                if groups[i] == groups[j] {
                    assert_eq!(tags[i], tags[j]);
                }
            }
        }
        assert!(!split.test.is_empty());
        assert!(!split.train.is_empty());
    }

    #[test]
    fn manifest_round_trip() {
        let rec = recording(&[RawLabel::W, RawLabel::Rem, RawLabel::S3]);
        let set = generate_windows(&rec, &WindowingConfig::dl()).unwrap();
        let rows = manifest_rows(&set, None);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_manifest(&rows, &p).unwrap();
        assert_eq!(read_manifest(&p).unwrap(), rows);
    }
}

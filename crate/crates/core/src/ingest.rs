//! Recording and annotation readers.
//!
//! Two on-disk recording formats are supported:
//!
//! - a CSV fallback: first line `sample_rate_hz=<int>`, then one decimal
//!   amplitude per line;
//! - a read-only EDF subset: standard 256-byte header plus signal headers,
//!   16-bit little-endian samples, one channel selected by label.
//!
//! Annotations are plain text, one token per 30-s epoch from
//! `W REM S1 S2 S3 S4 ARTIFACT INDET`.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Length of one expert-scored epoch.
pub const EPOCH_SECONDS: usize = 30;

/// Four-class sleep stage. The declaration order is the fixed class order used
/// for confusion matrices and score vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SleepStage {
    Wake,
    Rem,
    Light,
    Deep,
}

impl SleepStage {
    pub const ALL: [SleepStage; 4] = [
        SleepStage::Wake,
        SleepStage::Rem,
        SleepStage::Light,
        SleepStage::Deep,
    ];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<SleepStage> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SleepStage::Wake => "Wake",
            SleepStage::Rem => "REM",
            SleepStage::Light => "Light",
            SleepStage::Deep => "Deep",
        }
    }
}

impl fmt::Display for SleepStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SleepStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wake" | "w" => Ok(SleepStage::Wake),
            "rem" => Ok(SleepStage::Rem),
            "light" => Ok(SleepStage::Light),
            "deep" => Ok(SleepStage::Deep),
            _ => Err(Error::UnknownLabel(s.to_string())),
        }
    }
}

/// Raw expert label of one 30-s epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RawLabel {
    W,
    Rem,
    S1,
    S2,
    S3,
    S4,
    Artifact,
    Indeterminate,
}

impl RawLabel {
    pub fn token(self) -> &'static str {
        match self {
            RawLabel::W => "W",
            RawLabel::Rem => "REM",
            RawLabel::S1 => "S1",
            RawLabel::S2 => "S2",
            RawLabel::S3 => "S3",
            RawLabel::S4 => "S4",
            RawLabel::Artifact => "ARTIFACT",
            RawLabel::Indeterminate => "INDET",
        }
    }

    /// W→Wake, REM→REM, S1/S2→Light, S3/S4→Deep; artifact and
    /// indeterminate epochs have no stage.
    pub fn stage(self) -> Option<SleepStage> {
        match self {
            RawLabel::W => Some(SleepStage::Wake),
            RawLabel::Rem => Some(SleepStage::Rem),
            RawLabel::S1 | RawLabel::S2 => Some(SleepStage::Light),
            RawLabel::S3 | RawLabel::S4 => Some(SleepStage::Deep),
            RawLabel::Artifact | RawLabel::Indeterminate => None,
        }
    }
}

impl FromStr for RawLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "W" => Ok(RawLabel::W),
            "REM" | "R" => Ok(RawLabel::Rem),
            "S1" => Ok(RawLabel::S1),
            "S2" => Ok(RawLabel::S2),
            "S3" => Ok(RawLabel::S3),
            "S4" => Ok(RawLabel::S4),
            "ARTIFACT" => Ok(RawLabel::Artifact),
            "INDET" => Ok(RawLabel::Indeterminate),
            _ => Err(Error::UnknownLabel(s.trim().to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageAnnotation {
    pub start_sample: usize,
    pub raw_label: RawLabel,
    /// `None` until [`map_stage_labels`] runs, and for excluded epochs after.
    pub mapped: Option<SleepStage>,
}

impl StageAnnotation {
    pub fn is_excluded(&self) -> bool {
        self.raw_label.stage().is_none()
    }
}

/// A single-lead ECG exactly as read from disk (no filtering, no scaling).
#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecording {
    pub subject_id: String,
    pub sample_rate_hz: u32,
    pub samples: Vec<f64>,
    pub annotations: Vec<StageAnnotation>,
}

impl EcgRecording {
    pub fn new(
        subject_id: impl Into<String>,
        sample_rate_hz: u32,
        samples: Vec<f64>,
    ) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::SampleRateMismatch(
                "sample rate must be positive".into(),
            ));
        }
        if samples.is_empty() {
            return Err(Error::InsufficientData("recording has no samples".into()));
        }
        Ok(Self {
            subject_id: subject_id.into(),
            sample_rate_hz,
            samples,
            annotations: Vec::new(),
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn epoch_samples(&self) -> usize {
        EPOCH_SECONDS * self.sample_rate_hz as usize
    }

    /// Number of complete 30-s epochs in the signal.
    pub fn complete_epochs(&self) -> usize {
        self.samples.len() / self.epoch_samples()
    }

    /// Attach raw labels (one per epoch, in order) and map them to stages.
    pub fn with_labels(mut self, labels: &[RawLabel]) -> Result<Self> {
        self.annotations =
            annotations_from_labels(labels, self.sample_rate_hz, self.complete_epochs())?;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordingFormat {
    Edf,
    Csv,
}

impl RecordingFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "edf" | "rec" => Some(RecordingFormat::Edf),
            "csv" | "txt" => Some(RecordingFormat::Csv),
            _ => None,
        }
    }
}

impl FromStr for RecordingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "edf" => Ok(RecordingFormat::Edf),
            "csv" => Ok(RecordingFormat::Csv),
            other => Err(Error::InvalidConfig(format!(
                "unknown recording format `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReadOptions {
    /// Signal label to select from an EDF file. When `None`, the first signal
    /// whose label mentions `ECG` or `V2` is used.
    pub channel: Option<String>,
    /// When set, a recording at any other rate is rejected.
    pub expected_rate_hz: Option<u32>,
}

/// Read a recording. The subject id is the file stem.
pub fn read_recording(
    path: &Path,
    format: RecordingFormat,
    options: &ReadOptions,
) -> Result<EcgRecording> {
    let subject = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("subject")
        .to_string();
    let rec = match format {
        RecordingFormat::Csv => parse_csv(&subject, &fs::read_to_string(path)?)?,
        RecordingFormat::Edf => parse_edf(&subject, &fs::read(path)?, options)?,
    };
    if let Some(expected) = options.expected_rate_hz {
        if expected != rec.sample_rate_hz {
            return Err(Error::SampleRateMismatch(format!(
                "file declares {} Hz, expected {expected} Hz",
                rec.sample_rate_hz
            )));
        }
    }
    Ok(rec)
}

pub fn parse_csv(subject_id: &str, text: &str) -> Result<EcgRecording> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::MalformedHeader("empty file".into()))?
        .trim();
    let rate = header
        .strip_prefix("sample_rate_hz=")
        .ok_or_else(|| {
            Error::MalformedHeader(format!("expected `sample_rate_hz=<int>`, got `{header}`"))
        })?
        .trim()
        .parse::<u32>()
        .map_err(|e| Error::MalformedHeader(format!("bad sample rate: {e}")))?;
    if rate == 0 {
        return Err(Error::SampleRateMismatch("header declares 0 Hz".into()));
    }
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v = line
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", i + 2)))?;
        samples.push(v);
    }
    EcgRecording::new(subject_id, rate, samples)
}

/// Write the CSV fallback format. Values use Rust's shortest round-trip
/// formatting, so reading the file back is bit-exact.
pub fn write_csv(recording: &EcgRecording, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(recording.samples.len() * 12);
    out.push_str(&format!("sample_rate_hz={}\n", recording.sample_rate_hz));
    for v in &recording.samples {
        out.push_str(&format!("{v:?}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Header fields of one EDF signal.
#[derive(Debug, Clone, PartialEq)]
pub struct EdfSignalHeader {
    pub label: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub samples_per_record: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdfHeader {
    pub header_bytes: usize,
    pub data_records: usize,
    pub record_duration_s: f64,
    pub signals: Vec<EdfSignalHeader>,
}

fn ascii_field(bytes: &[u8], what: &str) -> Result<String> {
    std::str::from_utf8(bytes)
        .map(|s| s.trim().to_string())
        .map_err(|_| Error::MalformedHeader(format!("{what} is not ASCII")))
}

fn numeric_field<T: FromStr>(bytes: &[u8], what: &str) -> Result<T> {
    let s = ascii_field(bytes, what)?;
    s.parse::<T>()
        .map_err(|_| Error::MalformedHeader(format!("{what}: cannot parse `{s}`")))
}

pub fn parse_edf_header(bytes: &[u8]) -> Result<EdfHeader> {
    if bytes.len() < 256 {
        return Err(Error::MalformedHeader(
            "file shorter than the 256-byte fixed header".into(),
        ));
    }
    let header_bytes: usize = numeric_field(&bytes[184..192], "header byte count")?;
    let declared_records: i64 = numeric_field(&bytes[236..244], "data record count")?;
    let record_duration_s: f64 = numeric_field(&bytes[244..252], "record duration")?;
    let ns: usize = numeric_field(&bytes[252..256], "signal count")?;
    if ns == 0 {
        return Err(Error::MalformedHeader("no signals".into()));
    }
    if header_bytes != 256 + 256 * ns {
        return Err(Error::MalformedHeader(format!(
            "header byte count {header_bytes} does not match {ns} signals"
        )));
    }
    if bytes.len() < header_bytes {
        return Err(Error::MalformedHeader("signal headers truncated".into()));
    }
    if !(record_duration_s > 0.0) {
        return Err(Error::MalformedHeader(
            "record duration must be positive".into(),
        ));
    }

    // Signal header fields are stored field-major: all labels, then all
    // transducers, and so on.
    let field = |offset: usize, width: usize, i: usize| {
        let start = 256 + offset * ns + i * width;
        &bytes[start..start + width]
    };
    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        signals.push(EdfSignalHeader {
            label: ascii_field(field(0, 16, i), "signal label")?,
            physical_min: numeric_field(field(16 + 80 + 8, 8, i), "physical minimum")?,
            physical_max: numeric_field(field(16 + 80 + 16, 8, i), "physical maximum")?,
            digital_min: numeric_field(field(16 + 80 + 24, 8, i), "digital minimum")?,
            digital_max: numeric_field(field(16 + 80 + 32, 8, i), "digital maximum")?,
            samples_per_record: numeric_field(
                field(16 + 80 + 40 + 80, 8, i),
                "samples per record",
            )?,
        });
    }
    let record_bytes: usize = signals.iter().map(|s| s.samples_per_record * 2).sum();
    if record_bytes == 0 {
        return Err(Error::MalformedHeader("data records are empty".into()));
    }
    let available = (bytes.len() - header_bytes) / record_bytes;
    let data_records = if declared_records < 0 {
        available
    } else {
        let declared = declared_records as usize;
        if declared > available {
            return Err(Error::Truncated);
        }
        declared
    };
    Ok(EdfHeader {
        header_bytes,
        data_records,
        record_duration_s,
        signals,
    })
}

fn default_channel(signals: &[EdfSignalHeader]) -> Option<usize> {
    signals.iter().position(|s| {
        let l = s.label.to_ascii_uppercase();
        l.contains("ECG") || l.contains("V2")
    })
}

pub fn parse_edf(subject_id: &str, bytes: &[u8], options: &ReadOptions) -> Result<EcgRecording> {
    let header = parse_edf_header(bytes)?;
    let channel = match &options.channel {
        Some(label) => header
            .signals
            .iter()
            .position(|s| s.label.eq_ignore_ascii_case(label.trim()))
            .ok_or_else(|| Error::ChannelNotFound(label.clone()))?,
        None => {
            default_channel(&header.signals).ok_or_else(|| Error::ChannelNotFound("ECG".into()))?
        }
    };
    let sig = &header.signals[channel];
    let rate = sig.samples_per_record as f64 / header.record_duration_s;
    if rate < 1.0 || (rate - rate.round()).abs() > 1e-9 {
        return Err(Error::SampleRateMismatch(format!(
            "{} samples per {} s record is not an integer rate",
            sig.samples_per_record, header.record_duration_s
        )));
    }
    if sig.digital_max <= sig.digital_min {
        return Err(Error::MalformedHeader("digital range is empty".into()));
    }
    let gain = (sig.physical_max - sig.physical_min) / (sig.digital_max - sig.digital_min) as f64;
    let offset_in_record: usize = header.signals[..channel]
        .iter()
        .map(|s| s.samples_per_record * 2)
        .sum();
    let record_bytes: usize = header
        .signals
        .iter()
        .map(|s| s.samples_per_record * 2)
        .sum();

    let mut samples = Vec::with_capacity(header.data_records * sig.samples_per_record);
    for r in 0..header.data_records {
        let start = header.header_bytes + r * record_bytes + offset_in_record;
        let block = &bytes[start..start + sig.samples_per_record * 2];
        samples.extend(block.chunks_exact(2).map(|b| {
            let d = i16::from_le_bytes([b[0], b[1]]) as f64;
            sig.physical_min + (d - sig.digital_min as f64) * gain
        }));
    }
    EcgRecording::new(subject_id, rate.round() as u32, samples)
}

/// Parse annotation tokens (whitespace or newline separated) against a
/// recording. Produces unmapped annotations on the 30-s grid.
pub fn parse_annotation_text(text: &str, recording: &EcgRecording) -> Result<Vec<StageAnnotation>> {
    let labels = text
        .split_whitespace()
        .map(RawLabel::from_str)
        .collect::<Result<Vec<_>>>()?;
    let epochs = recording.complete_epochs();
    if labels.len() > epochs {
        return Err(Error::AnnotationOverrun {
            labels: labels.len(),
            epochs,
        });
    }
    let step = recording.epoch_samples();
    Ok(labels
        .into_iter()
        .enumerate()
        .map(|(i, raw_label)| StageAnnotation {
            start_sample: i * step,
            raw_label,
            mapped: None,
        })
        .collect())
}

pub fn parse_annotations(path: &Path, recording: &EcgRecording) -> Result<Vec<StageAnnotation>> {
    parse_annotation_text(&fs::read_to_string(path)?, recording)
}

/// Fill in the four-class stage of each annotation. Total and idempotent.
pub fn map_stage_labels(annotations: &[StageAnnotation]) -> Vec<StageAnnotation> {
    annotations
        .iter()
        .map(|a| StageAnnotation {
            mapped: a.raw_label.stage(),
            ..*a
        })
        .collect()
}

fn annotations_from_labels(
    labels: &[RawLabel],
    rate: u32,
    epochs: usize,
) -> Result<Vec<StageAnnotation>> {
    if labels.len() > epochs {
        return Err(Error::AnnotationOverrun {
            labels: labels.len(),
            epochs,
        });
    }
    let step = EPOCH_SECONDS * rate as usize;
    let raw: Vec<StageAnnotation> = labels
        .iter()
        .enumerate()
        .map(|(i, &raw_label)| StageAnnotation {
            start_sample: i * step,
            raw_label,
            mapped: None,
        })
        .collect();
    Ok(map_stage_labels(&raw))
}

/// Read a recording and its annotation file, with labels already mapped.
pub fn load_annotated(
    recording: &Path,
    annotations: &Path,
    format: RecordingFormat,
    options: &ReadOptions,
) -> Result<EcgRecording> {
    let mut rec = read_recording(recording, format, options)?;
    rec.annotations = map_stage_labels(&parse_annotations(annotations, &rec)?);
    Ok(rec)
}

pub fn write_annotations(annotations: &[StageAnnotation], path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for a in annotations {
        writeln!(f, "{}", a.raw_label.token())?;
    }
    Ok(())
}

//! ECG-only four-stage sleep staging.
//!
//! The crate covers the full pipeline from a single-lead ECG recording to a
//! hypnogram:
//!
//! - [`ingest`]: EDF/CSV readers and expert annotations mapped to
//!   Wake / REM / Light / Deep.
//! - [`windowing`]: the 5-min/30-s (classical learners) and 30-s/10-s
//!   (CNN) sliding windows, window labels and stratified splits.
//! - [`cardio`]: R-peak detection, RR tachogram and ECG-derived respiration.
//! - [`features`]: EDR plus HRV time, frequency and nonlinear features at
//!   two time scales, and recursive feature elimination.
//! - [`ml`]: KNN, logistic regression, CART, random forest and gradient
//!   boosting with cross-validation and random-search tuning.
//! - [`qnn`]: a 1D layer-graph inference engine with a float reference path
//!   and an integer-only 8-bit path, the SleepLiteCNN builder and the `SLCW`
//!   weight container.
//! - [`energy`]: per-layer operation counts and per-inference energy at a
//!   technology node.
//! - [`eval`]: accuracy / macro metrics, confusion matrices and hypnograms.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod cardio;
mod codec;
pub mod config;
pub mod energy;
pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod ml;
pub mod pipeline;
pub mod qnn;
pub mod synth;
pub mod windowing;

pub use error::{Error, Result};
pub use ingest::{EcgRecording, RawLabel, SleepStage, StageAnnotation};

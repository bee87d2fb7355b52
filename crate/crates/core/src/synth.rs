//! Synthetic single-lead ECG with stage-dependent heart rhythm.
//!
//! Each beat is a sum of Gaussian P, Q, R, S and T waves. RR intervals follow
//! a per-stage mean with respiratory sinus arrhythmia and AR(1) jitter; the
//! R amplitude is modulated by respiration so the EDR carries the breathing
//! rate. Used by tests, examples and the CNN fixture; no claim of clinical
//! realism.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::ingest::{EcgRecording, RawLabel, SleepStage, EPOCH_SECONDS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageProfile {
    pub mean_rr_ms: f64,
    /// Standard deviation of the AR(1) RR jitter.
    pub rr_sd_ms: f64,
    /// Peak respiratory sinus arrhythmia swing.
    pub rsa_ms: f64,
    pub resp_hz: f64,
    /// Relative R-amplitude modulation depth.
    pub edr_depth: f64,
}

impl StageProfile {
    pub fn for_stage(stage: SleepStage) -> Self {
        match stage {
            SleepStage::Wake => Self {
                mean_rr_ms: 750.0,
                rr_sd_ms: 45.0,
                rsa_ms: 15.0,
                resp_hz: 0.30,
                edr_depth: 0.08,
            },
            SleepStage::Rem => Self {
                mean_rr_ms: 850.0,
                rr_sd_ms: 35.0,
                rsa_ms: 20.0,
                resp_hz: 0.27,
                edr_depth: 0.10,
            },
            SleepStage::Light => Self {
                mean_rr_ms: 950.0,
                rr_sd_ms: 25.0,
                rsa_ms: 30.0,
                resp_hz: 0.24,
                edr_depth: 0.12,
            },
            SleepStage::Deep => Self {
                mean_rr_ms: 1050.0,
                rr_sd_ms: 15.0,
                rsa_ms: 40.0,
                resp_hz: 0.20,
                edr_depth: 0.15,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub sample_rate_hz: u32,
    /// Additive white noise SD (signal units, R wave ≈ 1).
    pub noise_sd: f64,
    pub baseline_wander: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 128,
            noise_sd: 0.02,
            baseline_wander: 0.05,
            seed: 0,
        }
    }
}

/// (amplitude, offset from R in s, width in s)
const WAVES: [(f64, f64, f64); 5] = [
    (0.12, -0.20, 0.025),
    (-0.12, -0.035, 0.010),
    (1.00, 0.0, 0.012),
    (-0.25, 0.035, 0.010),
    (0.30, 0.26, 0.045),
];

/// Beat times (s) and their R amplitudes over `stages`, one per 30-s epoch.
pub fn synth_beats(stages: &[SleepStage], rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let duration = (stages.len() * EPOCH_SECONDS) as f64;
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let mut t = rng.random_range(0.1..0.6);
    let mut jitter = 0.0;
    let (mut times, mut amps) = (Vec::new(), Vec::new());
    let phase = rng.random_range(0.0..TAU);
    while t < duration {
        let stage = stages[((t as usize) / EPOCH_SECONDS).min(stages.len() - 1)];
        let p = StageProfile::for_stage(stage);
        let resp = (TAU * p.resp_hz * t + phase).sin();
        times.push(t);
        amps.push(1.0 + p.edr_depth * resp);
        // AR(1) with coefficient 0.7, stationary SD rr_sd_ms
        jitter = 0.7 * jitter + p.rr_sd_ms * (1.0 - 0.49f64).sqrt() * unit.sample(rng);
        let rr = (p.mean_rr_ms + p.rsa_ms * resp + jitter).clamp(350.0, 2000.0);
        t += rr / 1000.0;
    }
    (times, amps)
}

/// Render beats into a sampled signal of `n` samples.
pub fn render_ecg(
    times: &[f64],
    amps: &[f64],
    n: usize,
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let fs = cfg.sample_rate_hz as f64;
    let mut x = vec![0.0; n];
    for (&tb, &a) in times.iter().zip(amps) {
        for &(amp, off, w) in &WAVES {
            let centre = tb + off;
            let lo = (((centre - 4.0 * w) * fs).floor().max(0.0)) as usize;
            let hi = (((centre + 4.0 * w) * fs).ceil().max(0.0) as usize).min(n);
            let scale = if off == 0.0 { a } else { 1.0 };
            for (i, v) in x.iter_mut().enumerate().take(hi).skip(lo) {
                let d = i as f64 / fs - centre;
                *v += amp * scale * (-0.5 * (d / w).powi(2)).exp();
            }
        }
    }
    let noise = Normal::new(0.0, cfg.noise_sd.max(0.0)).expect("valid normal");
    let wander_phase = rng.random_range(0.0..TAU);
    for (i, v) in x.iter_mut().enumerate() {
        let t = i as f64 / fs;
        *v += cfg.baseline_wander * (TAU * 0.05 * t + wander_phase).sin() + noise.sample(rng);
    }
    x
}

/// A labelled recording whose epoch `k` follows `stages[k]`.
pub fn synth_recording(
    subject_id: &str,
    stages: &[SleepStage],
    cfg: &SynthConfig,
) -> Result<EcgRecording> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = stages.len() * EPOCH_SECONDS * cfg.sample_rate_hz as usize;
    let (times, amps) = synth_beats(stages, &mut rng);
    let samples = render_ecg(&times, &amps, n, cfg, &mut rng);
    let labels: Vec<RawLabel> = stages
        .iter()
        .map(|s| match s {
            SleepStage::Wake => RawLabel::W,
            SleepStage::Rem => RawLabel::Rem,
            SleepStage::Light => RawLabel::S2,
            SleepStage::Deep => RawLabel::S3,
        })
        .collect();
    EcgRecording::new(subject_id, cfg.sample_rate_hz, samples)?.with_labels(&labels)
}

/// A night-like stage sequence: runs of 3..=12 epochs with random stages.
pub fn random_hypnogram(epochs: usize, seed: u64) -> Vec<SleepStage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(epochs);
    while out.len() < epochs {
        let s = SleepStage::ALL[rng.random_range(0..4)];
        let run = rng.random_range(3..=12).min(epochs - out.len());
        out.extend(std::iter::repeat_n(s, run));
    }
    out
}

/// A 20-minute night (40 epochs) that visits every stage twice in runs of
/// 4 to 6 epochs.
pub fn demo_night() -> Vec<SleepStage> {
    use SleepStage::*;
    [
        (Wake, 4),
        (Light, 6),
        (Deep, 6),
        (Light, 4),
        (Rem, 6),
        (Wake, 4),
        (Deep, 4),
        (Rem, 6),
    ]
    .into_iter()
    .flat_map(|(s, n)| std::iter::repeat_n(s, n))
    .collect()
}

/// A single 30-s window of one stage, `sample_rate_hz * 30` samples long.
pub fn synth_epoch(stage: SleepStage, cfg: &SynthConfig) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (times, amps) = synth_beats(&[stage], &mut rng);
    render_ecg(
        &times,
        &amps,
        EPOCH_SECONDS * cfg.sample_rate_hz as usize,
        cfg,
        &mut rng,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cardio::detect_rpeaks;

    #[test]
    fn detector_recovers_stage_rhythm() {
        for stage in SleepStage::ALL {
            let x = synth_epoch(stage, &SynthConfig::default());
            let peaks = detect_rpeaks(&x, 128).unwrap();
            let mean = peaks.rr_ms.iter().sum::<f64>() / peaks.rr_ms.len() as f64;
            let want = StageProfile::for_stage(stage).mean_rr_ms;
            assert!(
                (mean - want).abs() < 60.0,
                "{stage}: mean RR {mean} vs {want}"
            );
        }
    }

    #[test]
    fn recording_is_labelled() {
        let stages = random_hypnogram(20, 1);
        let rec = synth_recording("s", &stages, &SynthConfig::default()).unwrap();
        assert_eq!(rec.samples.len(), 20 * 3840);
        assert_eq!(rec.annotations.len(), 20);
        assert!(rec
            .annotations
            .iter()
            .zip(&stages)
            .all(|(a, s)| a.mapped == Some(*s)));
    }
}

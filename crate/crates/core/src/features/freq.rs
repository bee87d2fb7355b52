//! HRV frequency-domain band powers.
//!
//! The RR tachogram is resampled on an even grid with a natural cubic
//! spline, mean-removed, and its one-sided power spectral density (ms²/Hz)
//! estimated with Welch's method when at least one full segment fits, or a
//! single Hann-windowed periodogram otherwise. Band powers integrate the
//! density over half-open bands `[lo, hi)`.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::stats::mean;
use super::{Feature, Flag};
use crate::error::{Error, Result};

pub const NAMES: [&str; 7] = ["LF", "HF", "VHF", "LFHF", "LFn", "HFn", "LnHF"];

pub const MIN_INTERVALS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqConfig {
    pub lf: (f64, f64),
    pub hf: (f64, f64),
    pub vhf: (f64, f64),
    pub resample_hz: f64,
    pub welch_segment_s: f64,
    /// Spans shorter than this are computed but flagged unreliable.
    pub min_reliable_span_s: f64,
}

impl Default for FreqConfig {
    fn default() -> Self {
        Self {
            lf: (0.04, 0.15),
            hf: (0.15, 0.40),
            vhf: (0.40, 0.50),
            resample_hz: 4.0,
            welch_segment_s: 64.0,
            min_reliable_span_s: 60.0,
        }
    }
}

/// Natural cubic spline through strictly increasing knots.
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior second derivatives
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            let mut upper = vec![0.0; k];
            for i in 0..k {
                let h0 = x[i + 1] - x[i];
                let h1 = x[i + 2] - x[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0);
            }
            for i in 1..k {
                let lower = x[i + 1] - x[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Self {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if n == 1 {
            return self.y[0];
        }
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// Evenly resampled tachogram from the first to the last beat time.
pub fn resample_tachogram(rr_ms: &[f64], times_s: &[f64], fs: f64) -> Vec<f64> {
    let spline = CubicSpline::new(times_s, rr_ms);
    let t0 = times_s[0];
    let span = times_s[times_s.len() - 1] - t0;
    let n = (span * fs).floor() as usize + 1;
    (0..n).map(|i| spline.eval(t0 + i as f64 / fs)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub density: Vec<f64>,
    pub df: f64,
}

impl Psd {
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        self.freqs
            .iter()
            .zip(&self.density)
            .filter(|(f, _)| **f >= lo && **f < hi)
            .map(|(_, p)| p * self.df)
            .sum()
    }
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

fn segment_spectrum(
    planner: &mut FftPlanner<f64>,
    seg: &[f64],
    window: &[f64],
    fs: f64,
) -> Vec<f64> {
    let n = seg.len();
    let m = mean(seg);
    let mut buf: Vec<Complex<f64>> = seg
        .iter()
        .zip(window)
        .map(|(v, w)| Complex::new((v - m) * w, 0.0))
        .collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let norm = fs * window.iter().map(|w| w * w).sum::<f64>();
    (0..=n / 2)
        .map(|k| {
            let p = buf[k].norm_sqr() / norm;
            if k == 0 || (n % 2 == 0 && k == n / 2) {
                p
            } else {
                2.0 * p
            }
        })
        .collect()
}

/// Welch estimate with 50% overlap, or a single periodogram when the series
/// is shorter than one segment.
pub fn power_spectrum(x: &[f64], fs: f64, segment_len: usize) -> Psd {
    let mut planner = FftPlanner::new();
    let len = if x.len() >= segment_len {
        segment_len
    } else {
        x.len()
    };
    let window = hann(len);
    let step = (len / 2).max(1);
    let mut acc = vec![0.0; len / 2 + 1];
    let mut count = 0usize;
    let mut start = 0;
    while start + len <= x.len() {
        for (a, p) in acc.iter_mut().zip(segment_spectrum(
            &mut planner,
            &x[start..start + len],
            &window,
            fs,
        )) {
            *a += p;
        }
        count += 1;
        start += step;
    }
    let df = fs / len as f64;
    Psd {
        freqs: (0..acc.len()).map(|k| k as f64 * df).collect(),
        density: acc.into_iter().map(|p| p / count as f64).collect(),
        df,
    }
}

pub fn tachogram_psd(rr_ms: &[f64], times_s: &[f64], cfg: &FreqConfig) -> Psd {
    let x = resample_tachogram(rr_ms, times_s, cfg.resample_hz);
    let seg = (cfg.welch_segment_s * cfg.resample_hz).round() as usize;
    power_spectrum(&x, cfg.resample_hz, seg)
}

pub fn compute_hrv_freq_features(
    rr_ms: &[f64],
    times_s: &[f64],
    cfg: &FreqConfig,
) -> Result<Vec<Feature>> {
    if rr_ms.len() != times_s.len() {
        return Err(Error::LengthMismatch(rr_ms.len(), times_s.len()));
    }
    if rr_ms.len() < MIN_INTERVALS {
        return Err(Error::InsufficientData(format!(
            "{} RR intervals, need {MIN_INTERVALS}",
            rr_ms.len()
        )));
    }
    let psd = tachogram_psd(rr_ms, times_s, cfg);
    // powers below this are numerical residue of a flat tachogram
    let floor = 1e-12 * mean(rr_ms).powi(2);
    let clean = |p: f64| if p <= floor { 0.0 } else { p };
    let lf = clean(psd.band_power(cfg.lf.0, cfg.lf.1));
    let hf = clean(psd.band_power(cfg.hf.0, cfg.hf.1));
    let vhf = clean(psd.band_power(cfg.vhf.0, cfg.vhf.1));
    let div = |a: f64, b: f64| if b > 0.0 { a / b } else { f64::NAN };
    let out = [
        lf,
        hf,
        vhf,
        div(lf, hf),
        div(lf, lf + hf),
        div(hf, lf + hf),
        if hf > 0.0 { hf.ln() } else { f64::NAN },
    ];
    let span = times_s[times_s.len() - 1] - times_s[0];
    let reliable = span >= cfg.min_reliable_span_s;
    Ok(NAMES
        .iter()
        .zip(out)
        .map(|(&n, v)| {
            let mut f = Feature::new(n, v);
            if !reliable && f.flag == Flag::Ok {
                f.flag = Flag::Unreliable;
            }
            f
        })
        .collect())
}

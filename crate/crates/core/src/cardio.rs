//! R-peak detection, RR tachogram and ECG-derived respiration.
//!
//! The detector follows the Pan–Tompkins structure: a 5–15 Hz band-pass,
//! a five-point derivative, squaring, moving-window integration and an
//! adaptive two-level threshold with search-back. All filtering stages are
//! zero-phase, so the integrated energy peaks line up with the QRS complex.
//! Filtering is internal to detection; the recording itself stays raw.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Minimum spacing between two R-peaks.
pub const REFRACTORY_MS: f64 = 200.0;
/// RR intervals outside `(MIN_RR_MS, MAX_RR_MS)` are physiologically implausible.
pub const MIN_RR_MS: f64 = 200.0;
pub const MAX_RR_MS: f64 = 4000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RPeakSeries {
    pub sample_rate_hz: u32,
    /// Strictly increasing sample indices relative to the analysed segment.
    pub peak_indices: Vec<usize>,
    /// Successive differences in ms, after the physiologic filter.
    pub rr_ms: Vec<f64>,
}

/// RR intervals with the time (s) of the beat that closes each interval.
#[derive(Debug, Clone, PartialEq)]
pub struct RrSeries {
    pub rr_ms: Vec<f64>,
    pub times_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdrSeries {
    pub values: Vec<f64>,
    pub times_s: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn lowpass(cutoff: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * cutoff / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
        let a0 = 1.0 + alpha;
        Self {
            b: [
                (1.0 - cos) / 2.0 / a0,
                (1.0 - cos) / a0,
                (1.0 - cos) / 2.0 / a0,
            ],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    fn highpass(cutoff: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * cutoff / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
        let a0 = 1.0 + alpha;
        Self {
            b: [
                (1.0 + cos) / 2.0 / a0,
                -(1.0 + cos) / a0,
                (1.0 + cos) / 2.0 / a0,
            ],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    // transposed direct form II, zero initial state
    fn run(&self, x: &mut [f64]) {
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[0] * y + z2;
            z2 = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }
}

fn filtfilt(stages: &[Biquad], x: &mut [f64]) {
    for s in stages {
        s.run(x);
    }
    x.reverse();
    for s in stages {
        s.run(x);
    }
    x.reverse();
}

/// Band-passed, differentiated, squared and integrated detection signal.
pub fn detection_signal(segment: &[f64], rate: u32) -> Vec<f64> {
    let fs = rate as f64;
    let mut band = segment.to_vec();
    let hi = (15.0f64).min(0.45 * fs);
    filtfilt(
        &[Biquad::highpass(5.0, fs), Biquad::lowpass(hi, fs)],
        &mut band,
    );

    let n = band.len();
    let at = |i: isize| -> f64 {
        if i < 0 || i as usize >= n {
            0.0
        } else {
            band[i as usize]
        }
    };
    let squared: Vec<f64> = (0..n as isize)
        .map(|i| {
            let d = (2.0 * at(i + 1) + at(i + 2) - 2.0 * at(i - 1) - at(i - 2)) / 8.0 * fs;
            d * d
        })
        .collect();

    // 150 ms centered integration window
    let half = ((0.150 * fs).round() as usize / 2).max(1);
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + squared[i];
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (2 * half + 1) as f64
        })
        .collect()
}

fn percentile_of_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Detect R-peaks in a raw ECG segment.
pub fn detect_rpeaks(segment: &[f64], rate: u32) -> Result<RPeakSeries> {
    if rate == 0 {
        return Err(Error::SampleRateMismatch(
            "sample rate must be positive".into(),
        ));
    }
    if segment.len() < 2 * rate as usize {
        return Err(Error::InsufficientData(format!(
            "segment of {} samples is shorter than 2 s",
            segment.len()
        )));
    }
    let fs = rate as f64;
    let refractory = (REFRACTORY_MS * fs / 1000.0).ceil() as usize;
    let signal = detection_signal(segment, rate);

    let candidates: Vec<usize> = (1..signal.len() - 1)
        .filter(|&i| signal[i] > signal[i - 1] && signal[i] >= signal[i + 1])
        .collect();
    if candidates.is_empty() {
        return Err(Error::InsufficientBeats { found: 0 });
    }
    let mut heights: Vec<f64> = candidates.iter().map(|&i| signal[i]).collect();
    heights.sort_by(f64::total_cmp);
    let mut spki = 0.5 * percentile_of_sorted(&heights, 0.98);
    let mut npki = (0.5 * percentile_of_sorted(&heights, 0.5)).min(0.5 * spki);
    let threshold = |spki: f64, npki: f64| npki + 0.25 * (spki - npki);

    let mut beats: Vec<usize> = Vec::new();
    let mut recent_rr: Vec<usize> = Vec::new();
    let mut last_searched = 0usize;
    for (ci, &i) in candidates.iter().enumerate() {
        let h = signal[i];

        // search back for a missed beat when the gap grows too long
        if let Some(&last) = beats.last() {
            if recent_rr.len() >= 2 {
                let mean_rr = recent_rr.iter().sum::<usize>() as f64 / recent_rr.len() as f64;
                if (i - last) as f64 > 1.66 * mean_rr && last_searched != last {
                    last_searched = last;
                    let half_thr = 0.5 * threshold(spki, npki);
                    let missed = candidates[..ci]
                        .iter()
                        .copied()
                        .filter(|&j| {
                            j > last + refractory && i >= j + refractory && signal[j] > half_thr
                        })
                        .max_by(|&a, &b| signal[a].total_cmp(&signal[b]).then(b.cmp(&a)));
                    if let Some(j) = missed {
                        spki = 0.25 * signal[j] + 0.75 * spki;
                        recent_rr.push(j - last);
                        beats.push(j);
                    }
                }
            }
        }

        let last = beats.last().copied();
        match last {
            Some(l) if i - l < refractory => {
                if h > signal[l] {
                    beats.pop();
                    if let Some(&prev) = beats.last() {
                        if let Some(rr) = recent_rr.last_mut() {
                            *rr = i - prev;
                        }
                    }
                    beats.push(i);
                }
            }
            _ if h > threshold(spki, npki) => {
                spki = 0.125 * h + 0.875 * spki;
                if let Some(l) = last {
                    recent_rr.push(i - l);
                    if recent_rr.len() > 8 {
                        recent_rr.remove(0);
                    }
                }
                beats.push(i);
            }
            _ => npki = 0.125 * h + 0.875 * npki,
        }
    }

    // locate each R-wave at the raw maximum near the energy peak
    let reach = (0.1 * fs).round() as usize;
    let mut peaks: Vec<usize> = Vec::with_capacity(beats.len());
    for b in beats {
        let lo = b.saturating_sub(reach);
        let hi = (b + reach + 1).min(segment.len());
        let mut best = lo;
        for j in lo..hi {
            if segment[j] > segment[best] {
                best = j;
            }
        }
        match peaks.last() {
            Some(&p) if best < p + refractory => {
                if segment[best] > segment[p] {
                    peaks.pop();
                    peaks.push(best);
                }
            }
            _ => peaks.push(best),
        }
    }
    if peaks.len() < 3 {
        return Err(Error::InsufficientBeats { found: peaks.len() });
    }
    let rr_ms = physiologic_filter(&successive_ms(&peaks, rate));
    Ok(RPeakSeries {
        sample_rate_hz: rate,
        peak_indices: peaks,
        rr_ms,
    })
}

fn successive_ms(peaks: &[usize], rate: u32) -> Vec<f64> {
    peaks
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64 * 1000.0 / rate as f64)
        .collect()
}

/// Keep intervals strictly inside `(200, 4000)` ms. Idempotent.
pub fn physiologic_filter(rr_ms: &[f64]) -> Vec<f64> {
    rr_ms
        .iter()
        .copied()
        .filter(|&v| v > MIN_RR_MS && v < MAX_RR_MS)
        .collect()
}

/// RR intervals (ms) from peak indices, with implausible intervals removed.
pub fn derive_rr_series(peaks: &[usize], rate: u32) -> Result<RrSeries> {
    if peaks.len() < 2 {
        return Err(Error::InsufficientBeats { found: peaks.len() });
    }
    let mut out = RrSeries {
        rr_ms: Vec::with_capacity(peaks.len() - 1),
        times_s: Vec::with_capacity(peaks.len() - 1),
    };
    for w in peaks.windows(2) {
        let rr = (w[1] - w[0]) as f64 * 1000.0 / rate as f64;
        if rr > MIN_RR_MS && rr < MAX_RR_MS {
            out.rr_ms.push(rr);
            out.times_s.push(w[1] as f64 / rate as f64);
        }
    }
    if out.rr_ms.is_empty() {
        return Err(Error::InsufficientBeats { found: 0 });
    }
    Ok(out)
}

/// Least-squares line removal of `y` against `x`.
pub fn linear_detrend(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len() as f64;
    if y.is_empty() {
        return Vec::new();
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    x.iter()
        .zip(y)
        .map(|(a, b)| b - my - slope * (a - mx))
        .collect()
}

/// R-wave amplitudes at each peak, linearly detrended over peak time.
pub fn derive_edr_series(segment: &[f64], peaks: &RPeakSeries) -> Result<EdrSeries> {
    if peaks.peak_indices.len() < 2 {
        return Err(Error::InsufficientBeats {
            found: peaks.peak_indices.len(),
        });
    }
    let rate = peaks.sample_rate_hz as f64;
    let mut amplitudes = Vec::with_capacity(peaks.peak_indices.len());
    let mut times_s = Vec::with_capacity(peaks.peak_indices.len());
    for &p in &peaks.peak_indices {
        let v = *segment.get(p).ok_or_else(|| {
            Error::ShapeMismatch(format!("peak {p} outside segment of {}", segment.len()))
        })?;
        amplitudes.push(v);
        times_s.push(p as f64 / rate);
    }
    Ok(EdrSeries {
        values: linear_detrend(&times_s, &amplitudes),
        times_s,
    })
}

/// Debug dump `window_id,peak_sample,rr_ms`; the first peak of each window
/// has an empty RR field.
pub fn write_peak_dump(windows: &[(usize, &RPeakSeries)], path: &Path) -> Result<()> {
    let mut out = String::from("window_id,peak_sample,rr_ms\n");
    for (id, series) in windows {
        let rate = series.sample_rate_hz as f64;
        for (k, &p) in series.peak_indices.iter().enumerate() {
            if k == 0 {
                writeln!(out, "{id},{p},").ok();
            } else {
                let rr = (p - series.peak_indices[k - 1]) as f64 * 1000.0 / rate;
                writeln!(out, "{id},{p},{rr}").ok();
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Gaussian spikes every `period` samples, first one half a period in.
    pub(crate) fn spike_train(len: usize, period: usize) -> Vec<f64> {
        let mut x = vec![0.0; len];
        let mut c = period / 2;
        while c < len {
            for (j, v) in x.iter_mut().enumerate() {
                let d = j as f64 - c as f64;
                *v += (-d * d / (2.0 * 1.5 * 1.5)).exp();
            }
            c += period;
        }
        x
    }

    #[test]
    fn spike_train_every_750ms() {
        let x = spike_train(3840, 96);
        let p = detect_rpeaks(&x, 128).unwrap();
        assert_eq!(p.peak_indices.len(), 40);
        assert!(p.rr_ms.iter().all(|&v| v == 750.0));
        assert_eq!(p.peak_indices[0], 48);
    }

    #[test]
    fn flat_signal_has_no_beats() {
        let err = detect_rpeaks(&vec![0.0; 3840], 128).unwrap_err();
        assert!(matches!(err, Error::InsufficientBeats { .. }));
    }

    #[test]
    fn short_segment_rejected() {
        assert!(detect_rpeaks(&vec![0.0; 200], 128).is_err());
    }

    #[test]
    fn rr_from_peaks() {
        assert_eq!(
            derive_rr_series(&[0, 96, 192], 128).unwrap().rr_ms,
            vec![750.0, 750.0]
        );
        let rr = derive_rr_series(&[0, 10, 106], 128).unwrap();
        assert_eq!(rr.rr_ms, vec![750.0]);
        assert_eq!(rr.times_s, vec![106.0 / 128.0]);
        assert!(derive_rr_series(&[5], 128).is_err());
        assert!(derive_rr_series(&[0, 10], 128).is_err());
    }

    #[test]
    fn filter_idempotent() {
        let v = [100.0, 200.0, 201.0, 3999.0, 4000.0, 800.0];
        let once = physiologic_filter(&v);
        assert_eq!(once, vec![201.0, 3999.0, 800.0]);
        assert_eq!(physiologic_filter(&once), once);
    }

    #[test]
    fn constant_amplitude_edr_is_flat() {
        let x = spike_train(3840, 96);
        let p = detect_rpeaks(&x, 128).unwrap();
        let edr = derive_edr_series(&x, &p).unwrap();
        assert_eq!(edr.values.len(), p.peak_indices.len());
        assert!(edr.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn two_peak_edr() {
        let p = RPeakSeries {
            sample_rate_hz: 128,
            peak_indices: vec![10, 120],
            rr_ms: vec![],
        };
        let x: Vec<f64> = (0..256).map(|i| i as f64).collect();
        assert_eq!(derive_edr_series(&x, &p).unwrap().values.len(), 2);
    }

    #[test]
    fn detrend_removes_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 2.0).collect();
        assert!(linear_detrend(&x, &y).iter().all(|r| r.abs() < 1e-12));
    }
}

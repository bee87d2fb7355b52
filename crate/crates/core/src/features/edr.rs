//! Amplitude statistics of the ECG-derived respiration series.

use super::stats::{kurtosis, mean, median, ratio, skewness, std, variance};
use super::Feature;

pub const NAMES: [&str; 15] = [
    "max",
    "min",
    "mean",
    "median",
    "std",
    "var",
    "peak_to_peak",
    "rmse",
    "kurtosis",
    "skewness",
    "waveform_factor",
    "peak_factor",
    "impulse_factor",
    "margin_factor",
    "rms",
];

/// Minimum number of EDR points for the family to be defined.
pub const MIN_POINTS: usize = 2;

/// Fifteen amplitude features. `std`/`var` use the sample (n-1) estimator,
/// `rmse` is the root mean squared deviation from the mean and `rms` the
/// root mean square of the raw values. Ratios with a zero denominator are
/// NaN-flagged.
pub fn compute_edr_features(values: &[f64]) -> Vec<Feature> {
    if values.len() < MIN_POINTS {
        return NAMES.iter().map(|&n| Feature::undefined(n)).collect();
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let m = mean(values);
    let p2p = max - min;
    let rmse = variance(values, 0).sqrt();
    let rms = (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt();
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let out = [
        max,
        min,
        m,
        median(values),
        std(values, 1),
        variance(values, 1),
        p2p,
        rmse,
        kurtosis(values),
        skewness(values),
        ratio(rmse, m, scale),
        ratio(p2p, rmse, scale),
        ratio(p2p, m, scale),
        ratio(p2p, rms, scale),
        rms,
    ];
    NAMES
        .iter()
        .zip(out)
        .map(|(&n, v)| Feature::new(n, v))
        .collect()
}

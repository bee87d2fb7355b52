//! HRV time-domain statistics of an RR series (ms).

use super::stats::{diff, mad, mean, median, percentile_sorted, ratio, sorted, std};
use super::Feature;
use crate::error::{Error, Result};

pub const NAMES: [&str; 19] = [
    "MeanNN", "SDNN", "RMSSD", "SDSD", "CVNN", "CVSD", "MedianNN", "MadNN", "MCVNN", "IQRNN",
    "SDRMSSD", "Prc20NN", "Prc80NN", "pNN50", "pNN20", "MinNN", "MaxNN", "HTI", "TINN",
];

/// Below this many intervals every feature of the family is NaN-flagged.
pub const MIN_INTERVALS: usize = 2;
/// HTI and TINN need a populated histogram.
pub const MIN_INTERVALS_GEOMETRIC: usize = 20;

/// Histogram bin width for HTI/TINN: one sample period at 128 Hz.
pub const HIST_BIN_MS: f64 = 1000.0 / 128.0;

/// Histogram of RR values on the absolute grid `floor(rr / bin)`.
/// Returns the index of the first bin and the counts.
pub fn rr_histogram(rr: &[f64], bin_ms: f64) -> (i64, Vec<usize>) {
    let idx: Vec<i64> = rr.iter().map(|v| (v / bin_ms).floor() as i64).collect();
    let lo = *idx.iter().min().expect("non-empty");
    let hi = *idx.iter().max().expect("non-empty");
    let mut counts = vec![0usize; (hi - lo + 1) as usize];
    for i in idx {
        counts[(i - lo) as usize] += 1;
    }
    (lo, counts)
}

/// Triangular interpolation of the RR histogram: the base width (ms) of the
/// triangle with apex at the modal bin that best fits the histogram in the
/// least-squares sense.
pub fn tinn(rr: &[f64], bin_ms: f64) -> f64 {
    let (_, d) = rr_histogram(rr, bin_ms);
    let nb = d.len() as i64;
    let x = d
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i as i64)
        .expect("non-empty");
    let y = d[x as usize] as f64;
    let count = |k: i64| {
        if k >= 0 && k < nb {
            d[k as usize] as f64
        } else {
            0.0
        }
    };

    // The error splits into a left part (depends only on N) and a right part
    // (depends only on M), so each side is minimised on its own.
    let mut best_left = (f64::INFINITY, 0i64);
    for n in -1..x {
        let mut e = 0.0;
        for k in 0..x {
            let q = if k <= n {
                0.0
            } else {
                y * (k - n) as f64 / (x - n) as f64
            };
            e += (count(k) - q).powi(2);
        }
        if e < best_left.0 {
            best_left = (e, n);
        }
    }
    let mut best_right = (f64::INFINITY, 0i64);
    for m in (x + 1)..=nb {
        let mut e = 0.0;
        for k in (x + 1)..nb {
            let q = if k >= m {
                0.0
            } else {
                y * (m - k) as f64 / (m - x) as f64
            };
            e += (count(k) - q).powi(2);
        }
        if e < best_right.0 {
            best_right = (e, m);
        }
    }
    (best_right.1 - best_left.1) as f64 * bin_ms
}

pub fn compute_hrv_time_features(rr: &[f64]) -> Result<Vec<Feature>> {
    if rr.is_empty() {
        return Err(Error::InsufficientData("empty RR series".into()));
    }
    if rr.len() < MIN_INTERVALS {
        return Ok(NAMES.iter().map(|&n| Feature::undefined(n)).collect());
    }
    let d = diff(rr);
    let s = sorted(rr);
    let mean_nn = mean(rr);
    let sdnn = std(rr, 1);
    let rmssd = (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt();
    let median_nn = median(rr);
    let mad_nn = mad(rr);
    let pnn = |t: f64| 100.0 * d.iter().filter(|v| v.abs() > t).count() as f64 / d.len() as f64;
    let scale = mean_nn.abs();
    let (hti, tinn_ms) = if rr.len() >= MIN_INTERVALS_GEOMETRIC {
        let (_, h) = rr_histogram(rr, HIST_BIN_MS);
        let peak = *h.iter().max().expect("non-empty") as f64;
        (rr.len() as f64 / peak, tinn(rr, HIST_BIN_MS))
    } else {
        (f64::NAN, f64::NAN)
    };
    let out = [
        mean_nn,
        sdnn,
        rmssd,
        std(&d, 1),
        ratio(sdnn, mean_nn, scale),
        ratio(rmssd, mean_nn, scale),
        median_nn,
        mad_nn,
        ratio(mad_nn, median_nn, scale),
        percentile_sorted(&s, 75.0) - percentile_sorted(&s, 25.0),
        ratio(sdnn, rmssd, scale),
        percentile_sorted(&s, 20.0),
        percentile_sorted(&s, 80.0),
        pnn(50.0),
        pnn(20.0),
        s[0],
        s[s.len() - 1],
        hti,
        tinn_ms,
    ];
    Ok(NAMES
        .iter()
        .zip(out)
        .map(|(&n, v)| Feature::new(n, v))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn get(f: &[Feature], name: &str) -> f64 {
        f.iter().find(|x| x.name == name).unwrap().value
    }

    #[test]
    fn constant_rr() {
        let f = compute_hrv_time_features(&[800.0; 4]).unwrap();
        assert_eq!(get(&f, "MeanNN"), 800.0);
        assert_eq!(get(&f, "SDNN"), 0.0);
        assert_eq!(get(&f, "pNN50"), 0.0);
        assert!(get(&f, "SDRMSSD").is_nan());
        assert!(get(&f, "HTI").is_nan());
    }

    #[test]
    fn alternating_rmssd() {
        let f = compute_hrv_time_features(&[800.0, 900.0, 800.0, 900.0]).unwrap();
        assert!((get(&f, "RMSSD") - 100.0).abs() < 1e-12);
    }

    #[test]
    fn pnn50_counts_successive_differences() {
        let f = compute_hrv_time_features(&[700.0, 760.0, 700.0]).unwrap();
        assert_eq!(get(&f, "pNN50"), 100.0);
        assert_eq!(get(&f, "pNN20"), 100.0);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(compute_hrv_time_features(&[]).is_err());
        assert!(compute_hrv_time_features(&[800.0])
            .unwrap()
            .iter()
            .all(|f| f.value.is_nan()));
    }

    #[test]
    fn tinn_of_a_triangle() {
        // histogram 1,2,3,2,1 on consecutive bins: the exact triangle has
        // its base one bin outside each end
        let b = HIST_BIN_MS;
        let mut rr = Vec::new();
        for (k, c) in [1, 2, 3, 2, 1].iter().enumerate() {
            for _ in 0..*c {
                rr.push((100 + k) as f64 * b + 0.5 * b);
            }
        }
        assert!((tinn(&rr, b) - 6.0 * b).abs() < 1e-9);
    }
}

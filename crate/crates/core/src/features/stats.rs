//! Small descriptive-statistics helpers shared by the feature families.

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Variance with `ddof` delta degrees of freedom (NaN when undefined).
pub fn variance(x: &[f64], ddof: usize) -> f64 {
    if x.len() <= ddof {
        return f64::NAN;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - ddof) as f64
}

pub fn std(x: &[f64], ddof: usize) -> f64 {
    variance(x, ddof).sqrt()
}

pub fn sorted(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Linear-interpolation percentile (`q` in 0..=100) of sorted data.
pub fn percentile_sorted(s: &[f64], q: f64) -> f64 {
    if s.is_empty() {
        return f64::NAN;
    }
    let pos = q / 100.0 * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

pub fn percentile(x: &[f64], q: f64) -> f64 {
    percentile_sorted(&sorted(x), q)
}

pub fn median(x: &[f64]) -> f64 {
    percentile(x, 50.0)
}

/// Median absolute deviation scaled to be consistent with the normal SD.
pub fn mad(x: &[f64]) -> f64 {
    let m = median(x);
    let dev: Vec<f64> = x.iter().map(|v| (v - m).abs()).collect();
    1.482_602_218_505_602 * median(&dev)
}

/// Biased sample skewness `m3 / m2^1.5`.
pub fn skewness(x: &[f64]) -> f64 {
    let m = mean(x);
    let n = x.len() as f64;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    if m2 == 0.0 {
        f64::NAN
    } else {
        m3 / m2.powf(1.5)
    }
}

/// Biased excess kurtosis `m4 / m2^2 - 3`.
pub fn kurtosis(x: &[f64]) -> f64 {
    let m = mean(x);
    let n = x.len() as f64;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    if m2 == 0.0 {
        f64::NAN
    } else {
        m4 / (m2 * m2) - 3.0
    }
}

pub fn diff(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// `num / den`, or NaN when the denominator is zero relative to `scale`.
pub fn ratio(num: f64, den: f64, scale: f64) -> f64 {
    if !den.is_finite() || den.abs() <= 1e-12 * scale.abs().max(f64::MIN_POSITIVE) {
        f64::NAN
    } else {
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles_match_linear_interpolation() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&x, 50.0), 2.5);
        assert_eq!(percentile(&x, 20.0), 1.6);
        assert_eq!(percentile(&x, 100.0), 4.0);
    }

    #[test]
    fn moments() {
        assert!((variance(&[1.0, 2.0, 3.0], 1) - 1.0).abs() < 1e-15);
        assert_eq!(skewness(&[1.0, 2.0, 3.0]), 0.0);
        assert!((kurtosis(&[0.0, 2.0]) + 2.0).abs() < 1e-15);
        assert!(skewness(&[5.0, 5.0]).is_nan());
    }

    #[test]
    fn ratio_zero_denominator() {
        assert!(ratio(1.0, 0.0, 1.0).is_nan());
        assert!(ratio(1.0, 1e-20, 1.0).is_nan());
        assert_eq!(ratio(2.0, 1.0, 1.0), 2.0);
    }
}

//! HRV nonlinear measures: Poincaré geometry, fragmentation, heart-rate
//! asymmetry, detrended fluctuation, entropies and fractal complexity.
//!
//! Every feature has its own minimum length; below it the value is NaN and
//! flagged, the vector itself is always complete.

use super::stats::{diff, linear_fit, mean, median, std, variance};
use super::Feature;

pub const NAMES: [&str; 47] = [
    "SD1",
    "SD2",
    "SD1SD2",
    "S",
    "CSI",
    "CVI",
    "CSI_Modified",
    "PIP",
    "IALS",
    "PSS",
    "PAS",
    "GI",
    "SI",
    "AI",
    "PI",
    "C1d",
    "C1a",
    "SD1d",
    "SD1a",
    "C2d",
    "C2a",
    "SD2d",
    "SD2a",
    "Cd",
    "Ca",
    "SDNNd",
    "SDNNa",
    "DFA_alpha1",
    "MFDFA_alpha1_Width",
    "MFDFA_alpha1_Peak",
    "MFDFA_alpha1_Mean",
    "MFDFA_alpha1_Max",
    "MFDFA_alpha1_Delta",
    "MFDFA_alpha1_Asymmetry",
    "MFDFA_alpha1_Fluctuation",
    "MFDFA_alpha1_Increment",
    "ApEn",
    "SampEn",
    "ShanEn",
    "FuzzyEn",
    "MSEn",
    "CMSEn",
    "RCMSEn",
    "CD",
    "HFD",
    "KFD",
    "LZC",
];

pub const MIN_INTERVALS: usize = 10;
/// DFA, MFDFA and the multiscale entropies.
pub const MIN_INTERVALS_LONG: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearConfig {
    pub embedding_dim: usize,
    /// Tolerance as a fraction of the sample SD.
    pub tolerance_sd: f64,
    pub max_scale: usize,
    pub dfa_scales: (usize, usize),
    pub higuchi_kmax: usize,
}

impl Default for NonlinearConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 2,
            tolerance_sd: 0.2,
            max_scale: 5,
            dfa_scales: (4, 16),
            higuchi_kmax: 10,
        }
    }
}

fn nan_div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        f64::NAN
    } else {
        a / b
    }
}

/// `[SD1, SD2, SD1SD2, S, CSI, CVI, CSI_Modified]`.
pub fn poincare(rr: &[f64]) -> [f64; 7] {
    let d = diff(rr);
    let sd1 = (0.5 * variance(&d, 1)).sqrt();
    let sd2 = (2.0 * variance(rr, 1) - 0.5 * variance(&d, 1))
        .max(0.0)
        .sqrt();
    [
        sd1,
        sd2,
        nan_div(sd1, sd2),
        std::f64::consts::PI * sd1 * sd2,
        nan_div(sd2, sd1),
        (16.0 * sd1 * sd2).log10(),
        nan_div(4.0 * sd2 * sd2, sd1),
    ]
}

/// Runs of consecutive integers.
fn runs(idx: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut len = 0;
    for (k, &i) in idx.iter().enumerate() {
        if k > 0 && i == idx[k - 1] + 1 {
            len += 1;
        } else {
            if len > 0 {
                out.push(len);
            }
            len = 1;
        }
    }
    if len > 0 {
        out.push(len);
    }
    out
}

/// `[PIP, IALS, PSS, PAS]`.
pub fn fragmentation(rr: &[f64]) -> [f64; 4] {
    let d = diff(rr);
    let sign: Vec<f64> = d
        .iter()
        .map(|v| {
            if *v > 0.0 {
                1.0
            } else if *v < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
        .collect();
    let inflections: Vec<usize> = (0..sign.len().saturating_sub(1))
        .filter(|&i| sign[i + 1] != sign[i])
        .collect();
    let acc: Vec<usize> = (0..d.len()).filter(|&i| d[i] > 0.0).collect();
    let dec: Vec<usize> = (0..d.len()).filter(|&i| d[i] < 0.0).collect();
    let mut segs = runs(&acc);
    segs.extend(runs(&dec));
    let alternations = runs(&inflections);
    let frac = |xs: &[usize], pred: &dyn Fn(usize) -> bool| {
        nan_div(
            xs.iter().filter(|&&l| pred(l)).count() as f64,
            xs.len() as f64,
        )
    };
    let mean_len = nan_div(segs.iter().sum::<usize>() as f64, segs.len() as f64);
    [
        inflections.len() as f64 / rr.len() as f64,
        1.0 / mean_len,
        frac(&segs, &|l| l < 3),
        frac(&alternations, &|l| l >= 4),
    ]
}

/// Heart-rate asymmetry, in `NAMES` order from GI to SDNNa.
pub fn asymmetry(rr: &[f64]) -> [f64; 16] {
    let x = &rr[..rr.len() - 1];
    let y = &rr[1..];
    let n = x.len() as f64;
    let (cx, cy) = (mean(x), mean(y));
    let s2 = std::f64::consts::SQRT_2;
    let mut dec = Vec::new();
    let mut acc = Vec::new();
    let mut flat = Vec::new();
    for i in 0..x.len() {
        match y[i].partial_cmp(&x[i]) {
            Some(std::cmp::Ordering::Greater) => dec.push(i),
            Some(std::cmp::Ordering::Less) => acc.push(i),
            _ => flat.push(i),
        }
    }
    let dist_l1: Vec<f64> = x.iter().zip(y).map(|(a, b)| (b - a).abs() / s2).collect();
    let dist_l2: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| ((a - cx) + (b - cy)).abs() / s2)
        .collect();
    let theta: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| (std::f64::consts::FRAC_PI_4 - (b / a).atan()).abs())
        .collect();
    let area: Vec<f64> = x
        .iter()
        .zip(y)
        .zip(&theta)
        .map(|((a, b), t)| 0.5 * t * (a * a + b * b))
        .collect();
    let sum_at = |v: &[f64], idx: &[usize]| idx.iter().map(|&i| v[i]).sum::<f64>();
    let sq_at =
        |v: &[f64], idx: &[usize]| idx.iter().map(|&i| v[i] * v[i]).sum::<f64>() / (n - 1.0);
    let pct = |v: &[f64]| 100.0 * nan_div(sum_at(v, &dec), v.iter().sum());

    let gi = pct(&dist_l1);
    let si = pct(&theta);
    let ai = pct(&area);
    let pi = 100.0 * nan_div(acc.len() as f64, (x.len() - flat.len()) as f64);

    let sd1d = sq_at(&dist_l1, &dec).sqrt();
    let sd1a = sq_at(&dist_l1, &acc).sqrt();
    let sd1 = (sd1d * sd1d + sd1a * sd1a).sqrt();
    let flat_l2 = sq_at(&dist_l2, &flat);
    let sd2d = (sq_at(&dist_l2, &dec) + 0.5 * flat_l2).sqrt();
    let sd2a = (sq_at(&dist_l2, &acc) + 0.5 * flat_l2).sqrt();
    let sd2 = (sd2d * sd2d + sd2a * sd2a).sqrt();
    let sdnnd = (0.5 * (sd1d * sd1d + sd2d * sd2d)).sqrt();
    let sdnna = (0.5 * (sd1a * sd1a + sd2a * sd2a)).sqrt();
    let sdnn = (sdnnd * sdnnd + sdnna * sdnna).sqrt();
    let c = |a: f64, t: f64| nan_div(a, t).powi(2);
    [
        gi,
        si,
        ai,
        pi,
        c(sd1d, sd1),
        c(sd1a, sd1),
        sd1d,
        sd1a,
        c(sd2d, sd2),
        c(sd2a, sd2),
        sd2d,
        sd2a,
        c(sdnnd, sdnn),
        c(sdnna, sdnn),
        sdnnd,
        sdnna,
    ]
}

/// Squared residual of a linear fit on each non-overlapping window of the
/// profile, one mean-square value per window.
fn window_fluctuations(profile: &[f64], n: usize) -> Vec<f64> {
    let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
    profile
        .chunks_exact(n)
        .map(|seg| {
            let (a, b) = linear_fit(&t, seg);
            seg.iter()
                .zip(&t)
                .map(|(v, ti)| (v - (a * ti + b)).powi(2))
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

fn profile(x: &[f64]) -> Vec<f64> {
    let m = mean(x);
    x.iter()
        .scan(0.0, |acc, v| {
            *acc += v - m;
            Some(*acc)
        })
        .collect()
}

/// First-order DFA exponent over integer scales `lo..=hi`.
pub fn dfa(x: &[f64], lo: usize, hi: usize) -> f64 {
    let y = profile(x);
    let mut ln_n = Vec::new();
    let mut ln_f = Vec::new();
    for n in lo..=hi {
        let f2 = window_fluctuations(&y, n);
        if f2.is_empty() {
            continue;
        }
        let f = mean(&f2).sqrt();
        if f > 0.0 {
            ln_n.push((n as f64).ln());
            ln_f.push(f.ln());
        }
    }
    if ln_n.len() < 2 {
        return f64::NAN;
    }
    linear_fit(&ln_n, &ln_f).0
}

/// Generalised Hurst exponents h(q) for q = -5..=5.
pub fn generalized_hurst(x: &[f64], lo: usize, hi: usize) -> Vec<f64> {
    let y = profile(x);
    let per_scale: Vec<(f64, Vec<f64>)> = (lo..=hi)
        .map(|n| (n as f64, window_fluctuations(&y, n)))
        .filter(|(_, f)| !f.is_empty() && f.iter().all(|v| *v > 0.0))
        .collect();
    (-5..=5)
        .map(|q| {
            let q = q as f64;
            let (ln_n, ln_f): (Vec<f64>, Vec<f64>) = per_scale
                .iter()
                .map(|(n, f2)| {
                    let fq = if q == 0.0 {
                        0.5 * mean(&f2.iter().map(|v| v.ln()).collect::<Vec<_>>())
                    } else {
                        mean(&f2.iter().map(|v| v.powf(q / 2.0)).collect::<Vec<_>>()).ln() / q
                    };
                    (n.ln(), fq)
                })
                .unzip();
            if ln_n.len() < 2 {
                f64::NAN
            } else {
                linear_fit(&ln_n, &ln_f).0
            }
        })
        .collect()
}

/// Singularity-spectrum summary
/// `[Width, Peak, Mean, Max, Delta, Asymmetry, Fluctuation, Increment]`.
///
/// From h(q): tau = q h - 1, alpha = d tau / dq (central differences),
/// f = q alpha - tau. Width is the alpha range, Peak the alpha at max f,
/// Mean the centre of the alpha range, Max the largest f, Delta the f
/// difference between the largest and smallest alpha, Asymmetry the
/// position of Peak within the range minus one half, Fluctuation the mean
/// squared second difference of h and Increment the summed squared first
/// difference of h.
pub fn mfdfa_summary(x: &[f64], lo: usize, hi: usize) -> [f64; 8] {
    let h = generalized_hurst(x, lo, hi);
    if h.iter().any(|v| !v.is_finite()) {
        return [f64::NAN; 8];
    }
    let q: Vec<f64> = (-5..=5).map(|v| v as f64).collect();
    let tau: Vec<f64> = q.iter().zip(&h).map(|(q, h)| q * h - 1.0).collect();
    let k = q.len();
    let alpha: Vec<f64> = (0..k)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(k - 1));
            (tau[b] - tau[a]) / (q[b] - q[a])
        })
        .collect();
    let f: Vec<f64> = (0..k).map(|i| q[i] * alpha[i] - tau[i]).collect();
    let argmax = |v: &[f64]| (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
    let argmin = |v: &[f64]| (0..v.len()).fold(0, |b, i| if v[i] < v[b] { i } else { b });
    let (amax, amin) = (argmax(&alpha), argmin(&alpha));
    let width = alpha[amax] - alpha[amin];
    let peak = alpha[argmax(&f)];
    let d1 = diff(&h);
    let d2 = diff(&d1);
    [
        width,
        peak,
        0.5 * (alpha[amax] + alpha[amin]),
        f[argmax(&f)],
        f[amax] - f[amin],
        nan_div(peak - alpha[amin], width) - 0.5,
        mean(&d2.iter().map(|v| v * v).collect::<Vec<_>>()),
        d1.iter().map(|v| v * v).sum(),
    ]
}

fn chebyshev(x: &[f64], i: usize, j: usize, m: usize) -> f64 {
    (0..m).fold(0.0f64, |d, k| d.max((x[i + k] - x[j + k]).abs()))
}

/// Approximate entropy (self-matches included).
pub fn approximate_entropy(x: &[f64], m: usize, r: f64) -> f64 {
    let phi = |m: usize| {
        let n = x.len() - m + 1;
        let s: f64 = (0..n)
            .map(|i| {
                let c = (0..n).filter(|&j| chebyshev(x, i, j, m) <= r).count();
                (c as f64 / n as f64).ln()
            })
            .sum();
        s / n as f64
    };
    if x.len() <= m + 1 {
        return f64::NAN;
    }
    phi(m) - phi(m + 1)
}

/// Template match counts `(A, B)` for lengths m+1 and m over the same
/// `N - m` templates, self-matches excluded.
pub fn sample_entropy_counts(x: &[f64], m: usize, r: f64) -> (u64, u64) {
    if x.len() <= m {
        return (0, 0);
    }
    let n = x.len() - m;
    let (mut a, mut b) = (0u64, 0u64);
    for i in 0..n {
        for j in (i + 1)..n {
            if chebyshev(x, i, j, m) <= r {
                b += 1;
                if (x[i + m] - x[j + m]).abs() <= r {
                    a += 1;
                }
            }
        }
    }
    (a, b)
}

fn sampen_from(a: u64, b: u64) -> f64 {
    if a == 0 || b == 0 {
        f64::NAN
    } else {
        -((a as f64) / (b as f64)).ln()
    }
}

pub fn sample_entropy(x: &[f64], m: usize, r: f64) -> f64 {
    let (a, b) = sample_entropy_counts(x, m, r);
    sampen_from(a, b)
}

/// Shannon entropy (bits) of the empirical distribution of distinct values.
pub fn shannon_entropy(x: &[f64]) -> f64 {
    let s = super::stats::sorted(x);
    let n = s.len() as f64;
    let mut h = 0.0;
    let mut i = 0;
    while i < s.len() {
        let j = s[i..].iter().take_while(|v| **v == s[i]).count();
        let p = j as f64 / n;
        h -= p * p.log2();
        i += j;
    }
    h
}

/// Fuzzy entropy with baseline-removed templates and exponential membership
/// `exp(-(d / r)^2)`.
pub fn fuzzy_entropy(x: &[f64], m: usize, r: f64) -> f64 {
    if x.len() <= m + 1 || r <= 0.0 {
        return f64::NAN;
    }
    let n = x.len() - m;
    let phi = |m: usize| {
        let templates: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let t = &x[i..i + m];
                let mu = mean(t);
                t.iter().map(|v| v - mu).collect()
            })
            .collect();
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = templates[i]
                    .iter()
                    .zip(&templates[j])
                    .fold(0.0f64, |d, (a, b)| d.max((a - b).abs()));
                s += (-(d / r).powi(2)).exp();
            }
        }
        s / (n * (n - 1) / 2) as f64
    };
    phi(m).ln() - phi(m + 1).ln()
}

fn coarse_grain(x: &[f64], scale: usize, offset: usize) -> Vec<f64> {
    x[offset..].chunks_exact(scale).map(mean).collect()
}

fn finite_mean(v: &[f64]) -> f64 {
    let f: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    if f.is_empty() {
        f64::NAN
    } else {
        mean(&f)
    }
}

/// `[MSEn, CMSEn, RCMSEn]`, each the mean over scales `1..=max_scale` of the
/// per-scale sample entropy, with the tolerance fixed from the original
/// series.
pub fn multiscale_entropies(x: &[f64], m: usize, r: f64, max_scale: usize) -> [f64; 3] {
    let mut ms = Vec::new();
    let mut cms = Vec::new();
    let mut rcms = Vec::new();
    for s in 1..=max_scale {
        ms.push(sample_entropy(&coarse_grain(x, s, 0), m, r));
        let counts: Vec<(u64, u64)> = (0..s)
            .map(|k| sample_entropy_counts(&coarse_grain(x, s, k), m, r))
            .collect();
        cms.push(finite_mean(
            &counts
                .iter()
                .map(|&(a, b)| sampen_from(a, b))
                .collect::<Vec<_>>(),
        ));
        let (a, b) = counts.iter().fold((0, 0), |(a, b), &(x, y)| (a + x, b + y));
        rcms.push(sampen_from(a, b));
    }
    [finite_mean(&ms), finite_mean(&cms), finite_mean(&rcms)]
}

/// Grassberger-Procaccia correlation dimension in a delay-1 embedding of
/// dimension `m`, slope of log C(r) over ten log-spaced radii between 0.1
/// and 0.5 sample SD.
pub fn correlation_dimension(x: &[f64], m: usize) -> f64 {
    let sd = std(x, 1);
    if !(sd > 0.0) || x.len() <= m {
        return f64::NAN;
    }
    let n = x.len() - m + 1;
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = (0..m).map(|k| (x[i + k] - x[j + k]).powi(2)).sum();
            dists.push(d.sqrt());
        }
    }
    let total = dists.len() as f64;
    let (lo, hi) = ((0.1 * sd).ln(), (0.5 * sd).ln());
    let mut lr = Vec::new();
    let mut lc = Vec::new();
    for k in 0..10 {
        let r = (lo + (hi - lo) * k as f64 / 9.0).exp();
        let c = dists.iter().filter(|&&d| d < r).count() as f64 / total;
        if c > 0.0 {
            lr.push(r.ln());
            lc.push(c.ln());
        }
    }
    if lr.len() < 2 {
        return f64::NAN;
    }
    linear_fit(&lr, &lc).0
}

/// Higuchi fractal dimension.
pub fn higuchi_fd(x: &[f64], kmax: usize) -> f64 {
    let n = x.len();
    let mut lk = Vec::new();
    let mut lnk = Vec::new();
    for k in 1..=kmax {
        let mut lm = Vec::new();
        for m in 0..k {
            let cnt = (n - 1 - m) / k;
            if cnt == 0 {
                continue;
            }
            let s: f64 = (1..=cnt)
                .map(|i| (x[m + i * k] - x[m + (i - 1) * k]).abs())
                .sum();
            lm.push(s * (n - 1) as f64 / (cnt * k) as f64 / k as f64);
        }
        if lm.is_empty() {
            continue;
        }
        let l = mean(&lm);
        if l > 0.0 {
            lk.push(l.ln());
            lnk.push((1.0 / k as f64).ln());
        }
    }
    if lk.len() < 2 {
        return f64::NAN;
    }
    linear_fit(&lnk, &lk).0
}

/// Katz fractal dimension `log10(L/a) / log10(d/a)`.
pub fn katz_fd(x: &[f64]) -> f64 {
    let steps: Vec<f64> = diff(x).iter().map(|v| v.abs()).collect();
    let l: f64 = steps.iter().sum();
    let a = mean(&steps);
    let d = x.iter().fold(0.0f64, |d, v| d.max((v - x[0]).abs()));
    nan_div((l / a).log10(), (d / a).log10())
}

/// Lempel-Ziv (1976) complexity of the median-binarised series, normalised
/// by `n / log2(n)`.
pub fn lempel_ziv(x: &[f64]) -> f64 {
    let med = median(x);
    let s: Vec<u8> = x.iter().map(|v| u8::from(*v > med)).collect();
    let n = s.len();
    if n < 2 {
        return f64::NAN;
    }
    // Kaspar-Schuster counting
    let (mut c, mut l, mut i, mut k, mut kmax) = (1usize, 1usize, 0usize, 1usize, 1usize);
    loop {
        if s[i + k - 1] == s[l + k - 1] {
            k += 1;
            if l + k > n {
                c += 1;
                break;
            }
        } else {
            kmax = kmax.max(k);
            i += 1;
            if i == l {
                c += 1;
                l += kmax;
                if l + 1 > n {
                    break;
                }
                i = 0;
                k = 1;
                kmax = 1;
            } else {
                k = 1;
            }
        }
    }
    c as f64 * (n as f64).log2() / n as f64
}

pub fn compute_hrv_nonlinear_features(rr: &[f64], cfg: &NonlinearConfig) -> Vec<Feature> {
    let mut out = vec![f64::NAN; NAMES.len()];
    let n = rr.len();
    if n >= MIN_INTERVALS {
        let m = cfg.embedding_dim;
        let r = cfg.tolerance_sd * std(rr, 1);
        out[0..7].copy_from_slice(&poincare(rr));
        out[7..11].copy_from_slice(&fragmentation(rr));
        out[11..27].copy_from_slice(&asymmetry(rr));
        out[36] = approximate_entropy(rr, m, r);
        out[37] = sample_entropy(rr, m, r);
        out[38] = shannon_entropy(rr);
        out[39] = fuzzy_entropy(rr, m, r);
        out[43] = correlation_dimension(rr, m);
        out[44] = higuchi_fd(rr, cfg.higuchi_kmax);
        out[45] = katz_fd(rr);
        out[46] = lempel_ziv(rr);
        if n >= MIN_INTERVALS_LONG {
            let (lo, hi) = cfg.dfa_scales;
            out[27] = dfa(rr, lo, hi);
            out[28..36].copy_from_slice(&mfdfa_summary(rr, lo, hi));
            out[40..43].copy_from_slice(&multiscale_entropies(rr, m, r, cfg.max_scale));
        }
    }
    NAMES
        .iter()
        .zip(out)
        .map(|(&n, v)| Feature::new(n, v))
        .collect()
}

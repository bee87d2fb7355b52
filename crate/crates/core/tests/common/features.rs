use std::collections::BTreeMap;
use std::f64::consts::PI;

pub fn close(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || (a - b).abs() <= 1e-9 * a.abs().max(b.abs()) + 1e-12
}

pub fn get(f: &[Feature], name: &str) -> f64 {
    f.iter().find(|x| x.name == name).unwrap().value
}
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sleeplite::features::time::HIST_BIN_MS;
use sleeplite::features::Feature;

// ---- naive oracles ----

pub fn o_mean(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for v in x {
        s += v;
    }
    s / x.len() as f64
}

pub fn o_var(x: &[f64], ddof: f64) -> f64 {
    let m = o_mean(x);
    let mut s = 0.0;
    for v in x {
        s += (v - m) * (v - m);
    }
    s / (x.len() as f64 - ddof)
}

pub fn o_sorted(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s
}

pub fn o_median(x: &[f64]) -> f64 {
    let s = o_sorted(x);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// numpy's default (linear) percentile.
pub fn o_pct(x: &[f64], q: f64) -> f64 {
    let s = o_sorted(x);
    let h = (s.len() - 1) as f64 * q / 100.0;
    let i = h.floor() as usize;
    if i + 1 >= s.len() {
        return s[i];
    }
    s[i] + (h - i as f64) * (s[i + 1] - s[i])
}

pub fn o_moment(x: &[f64], k: i32) -> f64 {
    let m = o_mean(x);
    x.iter().map(|v| (v - m).powi(k)).sum::<f64>() / x.len() as f64
}

pub fn edr_oracle(x: &[f64]) -> Vec<(&'static str, f64)> {
    let s = o_sorted(x);
    let (min, max) = (s[0], s[s.len() - 1]);
    let mean = o_mean(x);
    let rmse = o_moment(x, 2).sqrt();
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    let p2p = max - min;
    vec![
        ("max", max),
        ("min", min),
        ("mean", mean),
        ("median", o_median(x)),
        ("std", o_var(x, 1.0).sqrt()),
        ("var", o_var(x, 1.0)),
        ("peak_to_peak", p2p),
        ("rmse", rmse),
        ("kurtosis", o_moment(x, 4) / o_moment(x, 2).powi(2) - 3.0),
        ("skewness", o_moment(x, 3) / o_moment(x, 2).powf(1.5)),
        ("waveform_factor", rmse / mean),
        ("peak_factor", p2p / rmse),
        ("impulse_factor", p2p / mean),
        ("margin_factor", p2p / rms),
        ("rms", rms),
    ]
}

/// Least-squares triangle over every (N, M) pair at once. Returns every base
/// width (ms) within rounding of the minimum error.
pub fn tinn_oracle(rr: &[f64]) -> Vec<f64> {
    let mut h: BTreeMap<i64, usize> = BTreeMap::new();
    for v in rr {
        *h.entry((v / HIST_BIN_MS).floor() as i64).or_default() += 1;
    }
    let lo = *h.keys().next().unwrap();
    let hi = *h.keys().last().unwrap();
    let d: Vec<f64> = (lo..=hi).map(|k| *h.get(&k).unwrap_or(&0) as f64).collect();
    let nb = d.len() as i64;
    let peak = d.iter().cloned().fold(0.0, f64::max);
    let x = d.iter().position(|&c| c == peak).unwrap() as i64;
    let mut all = Vec::new();
    for n in -1..x {
        for m in (x + 1)..=nb {
            let mut e = 0.0;
            for k in 0..nb {
                let q = if k <= n || k >= m {
                    0.0
                } else if k <= x {
                    peak * (k - n) as f64 / (x - n) as f64
                } else {
                    peak * (m - k) as f64 / (m - x) as f64
                };
                e += (d[k as usize] - q).powi(2);
            }
            all.push((e, m - n));
        }
    }
    let best = all.iter().map(|a| a.0).fold(f64::INFINITY, f64::min);
    all.iter()
        .filter(|a| a.0 <= best + 1e-9 * best.max(1.0))
        .map(|a| a.1 as f64 * HIST_BIN_MS)
        .collect()
}

pub fn time_oracle(rr: &[f64]) -> Vec<(&'static str, f64)> {
    let d: Vec<f64> = rr.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = o_mean(rr);
    let sdnn = o_var(rr, 1.0).sqrt();
    let rmssd = (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt();
    let med = o_median(rr);
    let dev: Vec<f64> = rr.iter().map(|v| (v - med).abs()).collect();
    let mad = 1.482_602_218_505_602 * o_median(&dev);
    let pnn = |t: f64| 100.0 * d.iter().filter(|v| v.abs() > t).count() as f64 / d.len() as f64;
    let s = o_sorted(rr);
    let mut out = vec![
        ("MeanNN", mean),
        ("SDNN", sdnn),
        ("RMSSD", rmssd),
        ("SDSD", o_var(&d, 1.0).sqrt()),
        ("CVNN", sdnn / mean),
        ("CVSD", rmssd / mean),
        ("MedianNN", med),
        ("MadNN", mad),
        ("MCVNN", mad / med),
        ("IQRNN", o_pct(rr, 75.0) - o_pct(rr, 25.0)),
        ("SDRMSSD", sdnn / rmssd),
        ("Prc20NN", o_pct(rr, 20.0)),
        ("Prc80NN", o_pct(rr, 80.0)),
        ("pNN50", pnn(50.0)),
        ("pNN20", pnn(20.0)),
        ("MinNN", s[0]),
        ("MaxNN", s[s.len() - 1]),
    ];
    if rr.len() >= 20 {
        let mut h: BTreeMap<i64, usize> = BTreeMap::new();
        for v in rr {
            *h.entry((v / HIST_BIN_MS).floor() as i64).or_default() += 1;
        }
        out.push(("HTI", rr.len() as f64 / *h.values().max().unwrap() as f64));
    }
    out
}

/// SD1/SD2 from the rotated Poincaré axes and the variance identity.
pub fn poincare_oracle(rr: &[f64]) -> Vec<(&'static str, f64)> {
    let minor: Vec<f64> = rr.windows(2).map(|w| (w[1] - w[0]) / 2f64.sqrt()).collect();
    let sd1 = o_var(&minor, 1.0).sqrt();
    let d: Vec<f64> = rr.windows(2).map(|w| w[1] - w[0]).collect();
    let sd2 = (2.0 * o_var(rr, 1.0) - 0.5 * o_var(&d, 1.0)).sqrt();
    let (l, t) = (4.0 * sd2, 4.0 * sd1);
    vec![
        ("SD1", sd1),
        ("SD2", sd2),
        ("SD1SD2", sd1 / sd2),
        ("S", PI * sd1 * sd2),
        ("CSI", l / t),
        ("CVI", (l * t).log10()),
        ("CSI_Modified", l * l / t),
    ]
}

pub fn random_rr(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rng.random_range(20..300);
    let mut v: f64 = rng.random_range(650.0..1100.0);
    (0..n)
        .map(|_| {
            v = (v + rng.random_range(-40.0..40.0)).clamp(400.0, 1500.0);
            v
        })
        .collect()
}

pub fn modulated(freq_hz: f64, seconds: f64) -> (Vec<f64>, Vec<f64>) {
    let (mut t, mut rr, mut times) = (0.0, Vec::new(), Vec::new());
    while t < seconds {
        let v = 1000.0 + 50.0 * (2.0 * PI * freq_hz * t).sin();
        t += v / 1000.0;
        rr.push(v);
        times.push(t);
    }
    (rr, times)
}

/// One-sided periodogram of the mean-removed series by a direct O(n²) DFT.
pub fn dft_periodogram(x: &[f64], fs: f64, window: bool) -> Vec<(f64, f64)> {
    let n = x.len();
    let m = o_mean(x);
    let w: Vec<f64> = (0..n)
        .map(|i| {
            if window {
                0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()
            } else {
                1.0
            }
        })
        .collect();
    let norm = fs * w.iter().map(|v| v * v).sum::<f64>();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, v) in x.iter().enumerate() {
                let a = -2.0 * PI * (k * i) as f64 / n as f64;
                re += (v - m) * w[i] * a.cos();
                im += (v - m) * w[i] * a.sin();
            }
            let p = (re * re + im * im) / norm;
            let one_sided = if k == 0 || (n % 2 == 0 && k == n / 2) {
                p
            } else {
                2.0 * p
            };
            (k as f64 * fs / n as f64, one_sided)
        })
        .collect()
}

pub fn band(p: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    p.iter()
        .filter(|(f, _)| *f >= lo && *f < hi)
        .map(|x| x.1)
        .sum()
}

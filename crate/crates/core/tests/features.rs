use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};
use sleeplite::features::edr::compute_edr_features;
use sleeplite::features::freq::{
    compute_hrv_freq_features, power_spectrum, resample_tachogram, FreqConfig,
};
use sleeplite::features::nonlinear::{
    compute_hrv_nonlinear_features, dfa, sample_entropy, NonlinearConfig,
};
use sleeplite::features::time::compute_hrv_time_features;
use sleeplite::features::{
    assemble_feature_vector, catalog, extract_scale, extract_window_features, extract_windowset,
    FeatureConfig, Flag, FEATURES_PER_SCALE,
};
use sleeplite::synth::{demo_night, synth_recording, SynthConfig};
use sleeplite::windowing::{generate_windows, WindowingConfig};

mod common;
use common::features::*;

#[test]
fn closed_forms_match_naive_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cfg = NonlinearConfig::default();
    let mut ties = 0;
    for trial in 0..1000 {
        let rr = random_rr(&mut rng);
        let edr: Vec<f64> = (0..rng.random_range(3..80))
            .map(|_| rng.random_range(0.5..1.5))
            .collect();
        let fe = compute_edr_features(&edr);
        for (name, want) in edr_oracle(&edr) {
            assert!(
                close(get(&fe, name), want),
                "trial {trial} edr {name}: {} vs {want}",
                get(&fe, name)
            );
        }
        let ft = compute_hrv_time_features(&rr).unwrap();
        for (name, want) in time_oracle(&rr) {
            assert!(
                close(get(&ft, name), want),
                "trial {trial} time {name}: {} vs {want}",
                get(&ft, name)
            );
        }
        if rr.len() >= 20 {
            let widths = tinn_oracle(&rr);
            assert!(
                widths.iter().any(|w| close(*w, get(&ft, "TINN"))),
                "trial {trial} TINN {} not in {widths:?}",
                get(&ft, "TINN")
            );
            ties += (widths.len() > 1) as usize;
        }
        let fnl = compute_hrv_nonlinear_features(&rr, &cfg);
        for (name, want) in poincare_oracle(&rr) {
            assert!(
                close(get(&fnl, name), want),
                "trial {trial} {name}: {} vs {want}",
                get(&fnl, name)
            );
        }
    }
    // exact ties are possible but should stay rare
    assert!(ties < 100, "{ties} TINN ties");
}

#[test]
fn worked_examples() {
    let f = compute_edr_features(&[0.0, 2.0]);
    assert_eq!(
        (
            get(&f, "mean"),
            get(&f, "peak_to_peak"),
            get(&f, "impulse_factor")
        ),
        (1.0, 2.0, 2.0)
    );
    let f = compute_hrv_time_features(&[800.0, 900.0, 800.0, 900.0]).unwrap();
    assert!(close(get(&f, "RMSSD"), 100.0));
    let f = compute_hrv_time_features(&[700.0, 760.0, 700.0]).unwrap();
    assert_eq!(get(&f, "pNN50"), 100.0);
    let rr: Vec<f64> = (0..40)
        .map(|i| if i % 2 == 0 { 800.0 } else { 850.0 })
        .collect();
    let f = compute_hrv_nonlinear_features(&rr, &NonlinearConfig::default());
    let d: Vec<f64> = rr.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(close(get(&f, "SD1").powi(2), 0.5 * o_var(&d, 1.0)));
}

#[test]
fn sinusoidal_tachograms_land_in_their_band() {
    let cfg = FreqConfig::default();
    for (f0, target) in [(0.1, cfg.lf), (0.3, cfg.hf)] {
        let (rr, times) = modulated(f0, 300.0);
        let f = compute_hrv_freq_features(&rr, &times, &cfg).unwrap();
        let (lf, hf, vhf) = (get(&f, "LF"), get(&f, "HF"), get(&f, "VHF"));
        let got = if f0 < 0.15 { lf } else { hf };
        assert!(
            got / (lf + hf + vhf) >= 0.8,
            "{f0} Hz: {got} of {}",
            lf + hf + vhf
        );

        let x = resample_tachogram(&rr, &times, cfg.resample_hz);
        let p = dft_periodogram(&x, cfg.resample_hz, false);
        let total = band(&p, cfg.lf.0, cfg.vhf.1);
        assert!(
            band(&p, target.0, target.1) / total >= 0.8,
            "DFT oracle at {f0} Hz"
        );
    }
    let (rr, times) = modulated(0.1, 300.0);
    assert!(
        get(
            &compute_hrv_freq_features(&rr, &times, &cfg).unwrap(),
            "LFHF"
        ) > 5.0
    );
    let (rr, times) = modulated(0.3, 300.0);
    assert!(
        get(
            &compute_hrv_freq_features(&rr, &times, &cfg).unwrap(),
            "HFn"
        ) > 0.9
    );
}

#[test]
fn periodogram_matches_direct_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [17usize, 64, 101, 120] {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let psd = power_spectrum(&x, 4.0, 1000);
        let oracle = dft_periodogram(&x, 4.0, true);
        assert_eq!(psd.density.len(), oracle.len());
        for ((f, p), (fo, po)) in psd.freqs.iter().zip(&psd.density).zip(&oracle) {
            assert!(close(*f, *fo));
            assert!(
                (p - po).abs() <= 1e-9 * po.abs().max(1e-6),
                "n {n} f {f}: {p} vs {po}"
            );
        }
    }
}

#[test]
fn band_powers_do_not_exceed_total() {
    let cfg = FreqConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let rr = random_rr(&mut rng);
        let times: Vec<f64> = rr
            .iter()
            .scan(0.0, |t, v| {
                *t += v / 1000.0;
                Some(*t)
            })
            .collect();
        let Ok(f) = compute_hrv_freq_features(&rr, &times, &cfg) else {
            continue;
        };
        let x = resample_tachogram(&rr, &times, cfg.resample_hz);
        let seg = (cfg.welch_segment_s * cfg.resample_hz).round() as usize;
        let psd = power_spectrum(&x, cfg.resample_hz, seg);
        let total: f64 = psd
            .freqs
            .iter()
            .zip(&psd.density)
            .filter(|(f, _)| **f >= 0.04 && **f <= 0.5)
            .map(|(_, p)| p * psd.df)
            .sum();
        let sum = get(&f, "LF") + get(&f, "HF") + get(&f, "VHF");
        assert!(sum <= total * (1.0 + 1e-6), "{sum} > {total}");
    }
}

#[test]
fn constant_rr_has_no_ratio() {
    let rr = vec![1000.0; 80];
    let times: Vec<f64> = (1..=80).map(|i| i as f64).collect();
    let f = compute_hrv_freq_features(&rr, &times, &FreqConfig::default()).unwrap();
    assert_eq!(get(&f, "LF"), 0.0);
    assert_eq!(get(&f, "HF"), 0.0);
    let lfhf = f.iter().find(|x| x.name == "LFHF").unwrap();
    assert!(lfhf.value.is_nan() && lfhf.flag == Flag::Undefined);
}

#[test]
fn dfa_of_white_and_integrated_noise() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let (mut white, mut brown) = (0.0, 0.0);
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..1000).map(|_| normal.sample(&mut rng)).collect();
        let y: Vec<f64> = x
            .iter()
            .scan(0.0, |s, v| {
                *s += v;
                Some(*s)
            })
            .collect();
        white += dfa(&x, 4, 16) / 20.0;
        brown += dfa(&y, 4, 16) / 20.0;
    }
    assert!((0.4..=0.6).contains(&white), "white noise alpha1 {white}");
    assert!(
        (1.4..=1.6).contains(&brown),
        "integrated noise alpha1 {brown}"
    );
}

#[test]
fn sampen_periodic_below_shuffled() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut wins = 0;
    for _ in 0..100 {
        let period = rng.random_range(5.0..20.0);
        let phase = rng.random_range(0.0..2.0 * PI);
        let x: Vec<f64> = (0..300)
            .map(|i| 800.0 + 40.0 * (2.0 * PI * i as f64 / period + phase).sin())
            .collect();
        let mut s = x.clone();
        for i in (1..s.len()).rev() {
            s.swap(i, rng.random_range(0..=i));
        }
        let r = 0.2 * o_var(&x, 1.0).sqrt();
        let (a, b) = (sample_entropy(&x, 2, r), sample_entropy(&s, 2, r));
        if a < b || (a.is_finite() && b.is_nan()) {
            wins += 1;
        }
    }
    assert_eq!(wins, 100);
}

#[test]
fn sampen_noise_above_sine() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let noise: Vec<f64> = (0..512).map(|_| rng.random_range(700.0..900.0)).collect();
    let sine: Vec<f64> = (0..512)
        .map(|i| 800.0 + 50.0 * (i as f64 * 0.3).sin())
        .collect();
    let r = |x: &[f64]| 0.2 * o_var(x, 1.0).sqrt();
    assert!(sample_entropy(&noise, 2, r(&noise)) > sample_entropy(&sine, 2, r(&sine)));
}

#[test]
fn catalog_is_unique_and_pinned() {
    let names = catalog();
    assert_eq!(names.len(), 2 * FEATURES_PER_SCALE);
    let mut u = names.clone();
    u.sort();
    u.dedup();
    assert_eq!(u.len(), names.len());
    let digest = Sha256::digest(names.join("\n").as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(hex, include_str!("data/catalog.sha256").trim());
}

#[test]
fn equal_segments_give_equal_scales() {
    let x = sleeplite::synth::synth_epoch(sleeplite::SleepStage::Light, &SynthConfig::default());
    let cfg = FeatureConfig::default();
    let step = extract_scale(&x, 128, &cfg).unwrap();
    let v = assemble_feature_vector("w", &step, &step);
    let n = FEATURES_PER_SCALE;
    for i in 0..n {
        assert!(close(v.values[i], v.values[n + i]));
    }
    // a 30-s segment is its own step
    let w = extract_window_features("w", &x, 128, &cfg).unwrap();
    assert_eq!(w.values.len(), 2 * n);
    assert!(w.values[..n]
        .iter()
        .zip(&w.values[n..])
        .all(|(a, b)| close(*a, *b)));
}

#[test]
fn parallel_extraction_is_ordered_and_repeatable() {
    let rec = synth_recording("n", &demo_night()[..16], &SynthConfig::default()).unwrap();
    let set = generate_windows(&rec, &WindowingConfig::ml()).unwrap();
    let cfg = FeatureConfig::default();
    let a = extract_windowset(&rec, &set, &cfg);
    let b = extract_windowset(&rec, &set, &cfg);
    assert_eq!(a.vectors.len(), set.len());
    for ((i, va), (j, vb)) in a.vectors.iter().zip(&b.vectors) {
        assert_eq!(i, j);
        assert_eq!(va.window_id, vb.window_id);
        assert!(va
            .values
            .iter()
            .zip(&vb.values)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        let w = &set.windows[*i];
        let seq = extract_window_features(&va.window_id, w.samples(&rec), 128, &cfg).unwrap();
        assert!(seq
            .values
            .iter()
            .zip(&va.values)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

proptest! {
    #[test]
    fn nan_only_when_flagged(rr in prop::collection::vec(300.0f64..2000.0, 1..150)) {
        let mut f = compute_hrv_time_features(&rr).unwrap();
        f.extend(compute_hrv_nonlinear_features(&rr, &NonlinearConfig::default()));
        f.extend(compute_edr_features(&rr));
        for x in &f {
            prop_assert_eq!(x.value.is_nan(), x.flag == Flag::Undefined, "{}", x.name);
        }
    }

    #[test]
    fn time_features_shift_and_scale(rr in prop::collection::vec(500.0f64..1500.0, 4..60), c in -200.0f64..200.0, k in 0.5f64..2.0) {
        let base = compute_hrv_time_features(&rr).unwrap();
        let shifted: Vec<f64> = rr.iter().map(|v| v + c).collect();
        let scaled: Vec<f64> = rr.iter().map(|v| v * k).collect();
        let fs = compute_hrv_time_features(&shifted).unwrap();
        let fk = compute_hrv_time_features(&scaled).unwrap();
        for name in ["SDNN", "RMSSD", "SDSD", "IQRNN"] {
            let (a, b) = (get(&base, name), get(&fs, name));
            prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{name} shift");
            let b = get(&fk, name);
            prop_assert!((a * k - b).abs() <= 1e-6 * b.abs().max(1.0), "{name} scale");
        }
        prop_assert!((get(&base, "MeanNN") + c - get(&fs, "MeanNN")).abs() < 1e-6);
    }
}

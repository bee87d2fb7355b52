use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sleeplite::SleepStage;

/// Columns 0..5 shift with the class, 5..30 are pure noise.
pub fn planted(n: usize, seed: u64) -> (Vec<String>, Vec<Vec<f64>>, Vec<SleepStage>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let names = (0..30)
        .map(|j| {
            if j < 5 {
                format!("inf{j}")
            } else {
                format!("noise{j}")
            }
        })
        .collect();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let c = rng.random_range(0..4);
        let row = (0..30)
            .map(|j| {
                let shift = if j < 5 {
                    1.5 * ((c + j) % 4) as f64
                } else {
                    0.0
                };
                shift + noise.sample(&mut rng)
            })
            .collect();
        x.push(row);
        y.push(SleepStage::ALL[c]);
    }
    (names, x, y)
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sleeplite::ml::{Algo, ClassifierSpec};
use sleeplite::SleepStage;

pub fn names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("f{j}")).collect()
}

/// Four Gaussian blobs in `d` dimensions, `sep` apart.
pub fn blobs(n: usize, d: usize, sep: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<SleepStage>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let c = i % 4;
        x.push(
            (0..d)
                .map(|j| if j % 4 == c { sep } else { 0.0 } + noise.sample(&mut rng))
                .collect(),
        );
        y.push(SleepStage::ALL[c]);
    }
    (x, y)
}

/// Default spec with fewer trees where there are trees.
pub fn small(algo: Algo, seed: u64) -> ClassifierSpec {
    match algo {
        Algo::RandomForest | Algo::Gbdt => ClassifierSpec::new(algo, seed).with("n_trees", 30.0),
        _ => ClassifierSpec::new(algo, seed),
    }
}

/// Full sort by (distance, index), first k, plurality with ties to the
/// lower class.
pub fn knn_oracle(x: &[Vec<f64>], y: &[usize], row: &[f64], k: usize) -> usize {
    let mut d: Vec<(f64, usize)> = x
        .iter()
        .enumerate()
        .map(|(i, t)| (t.iter().zip(row).map(|(a, b)| (a - b).powi(2)).sum(), i))
        .collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut votes = [0usize; 4];
    for &(_, i) in d.iter().take(k) {
        votes[y[i]] += 1;
    }
    let best = *votes.iter().max().unwrap();
    votes.iter().position(|&v| v == best).unwrap()
}

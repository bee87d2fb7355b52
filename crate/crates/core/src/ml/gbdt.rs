//! Multinomial gradient boosting with regression-tree stages.
//!
//! Each round fits one squared-error tree per class to the residual
//! `onehot - softmax(F)` and sets leaf values by a single Newton step on the
//! multinomial deviance: `(K-1)/K * sum(r) / sum(|r| (1-|r|))`.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::logistic::softmax;
use super::tree::{build, SquaredError, Tree, TreeParams};
use super::{ClassifierSpec, N_CLASSES};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub tree: TreeParams,
    pub subsample: f64,
}

impl GbdtParams {
    pub fn from_spec(spec: &ClassifierSpec) -> Result<Self> {
        Ok(Self {
            n_trees: spec.get("n_trees") as usize,
            learning_rate: spec.get("learning_rate"),
            tree: TreeParams {
                max_depth: spec.get("max_depth") as usize,
                min_samples_split: 2,
                min_samples_leaf: spec.get("min_samples_leaf") as usize,
                max_features: None,
            },
            subsample: spec.get("subsample"),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gbdt {
    pub init: Vec<f64>,
    pub learning_rate: f64,
    /// `stages[round][class]`.
    pub stages: Vec<Vec<Tree>>,
}

impl Gbdt {
    pub fn fit(x: &[Vec<f64>], y: &[usize], params: &GbdtParams, seed: u64) -> Self {
        let n = x.len();
        let k = N_CLASSES as f64;
        let mut prior = [0.0; N_CLASSES];
        y.iter().for_each(|&c| prior[c] += 1.0);
        // absent classes start very unlikely rather than at -inf
        let init: Vec<f64> = prior
            .iter()
            .map(|c| (c / n as f64).max(1e-6).ln())
            .collect();
        let mut f: Vec<Vec<f64>> = vec![init.clone(); n];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut stages = Vec::with_capacity(params.n_trees);
        let m = ((params.subsample * n as f64).round() as usize).clamp(1, n);
        for _ in 0..params.n_trees {
            let p: Vec<Vec<f64>> = f.iter().map(|row| softmax(row)).collect();
            let idx: Vec<usize> = if m < n {
                let mut v = sample(&mut rng, n, m).into_vec();
                v.sort_unstable();
                v
            } else {
                (0..n).collect()
            };
            let mut round = Vec::with_capacity(N_CLASSES);
            for c in 0..N_CLASSES {
                let r: Vec<f64> = (0..n)
                    .map(|i| f64::from(u8::from(y[i] == c)) - p[i][c])
                    .collect();
                let leaf = |ids: &[usize]| {
                    let num: f64 = ids.iter().map(|&i| r[i]).sum();
                    let den: f64 = ids.iter().map(|&i| r[i].abs() * (1.0 - r[i].abs())).sum();
                    if den < 1e-150 {
                        0.0
                    } else {
                        (k - 1.0) / k * num / den
                    }
                };
                let tree = build(
                    x,
                    &idx,
                    SquaredError { y: &r, leaf },
                    &params.tree,
                    ChaCha8Rng::seed_from_u64(seed),
                );
                for i in 0..n {
                    f[i][c] += params.learning_rate * tree.leaf_value(&x[i])[0];
                }
                round.push(tree);
            }
            stages.push(round);
        }
        Gbdt {
            init,
            learning_rate: params.learning_rate,
            stages,
        }
    }

    pub fn decision(&self, row: &[f64]) -> Vec<f64> {
        let mut f = self.init.clone();
        for round in &self.stages {
            for (c, t) in round.iter().enumerate() {
                f[c] += self.learning_rate * t.leaf_value(row)[0];
            }
        }
        f
    }

    pub fn proba(&self, row: &[f64]) -> [f64; N_CLASSES] {
        let p = softmax(&self.decision(row));
        [p[0], p[1], p[2], p[3]]
    }
}

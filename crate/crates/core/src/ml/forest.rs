//! Random forest of Gini trees with majority voting.
//!
//! Tree `t` grows with a feature-sampling generator seeded from the spec
//! seed on stream `t`, so tree 0 of a forest and a single decision tree
//! with the same seed and parameters are the same tree. Bootstrap draws use
//! a separate generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::tree::{build, Gini, Tree, TreeParams};
use super::{argmax, ClassifierSpec, N_CLASSES};
use crate::error::Result;

const BOOTSTRAP_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
}

impl ForestParams {
    pub fn from_spec(spec: &ClassifierSpec, n_features: usize) -> Result<Self> {
        let mut tree = spec.tree_params()?;
        let frac = spec.get("max_features");
        let m = if frac > 0.0 {
            ((frac * n_features as f64).round() as usize).max(1)
        } else {
            ((n_features as f64).sqrt().round() as usize).max(1)
        };
        tree.max_features = (m < n_features).then_some(m);
        Ok(Self {
            n_trees: spec.get("n_trees") as usize,
            tree,
            bootstrap: spec.get("bootstrap") >= 0.5,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
    /// Out-of-bag accuracy; NaN without bootstrap or when no sample was
    /// ever out of bag.
    pub oob_accuracy: f64,
}

pub(crate) fn tree_rng(seed: u64, t: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(t as u64);
    r
}

impl RandomForest {
    pub fn fit(x: &[Vec<f64>], y: &[usize], params: &ForestParams, seed: u64) -> Self {
        let n = x.len();
        let grown: Vec<(Tree, Vec<bool>)> = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let (idx, in_bag) = if params.bootstrap {
                    let mut r = ChaCha8Rng::seed_from_u64(seed ^ BOOTSTRAP_SALT);
                    r.set_stream(t as u64);
                    let idx: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
                    let mut in_bag = vec![false; n];
                    idx.iter().for_each(|&i| in_bag[i] = true);
                    (idx, in_bag)
                } else {
                    ((0..n).collect(), vec![true; n])
                };
                (
                    build(x, &idx, Gini { y }, &params.tree, tree_rng(seed, t)),
                    in_bag,
                )
            })
            .collect();

        let mut votes = vec![[0.0; N_CLASSES]; n];
        for (tree, in_bag) in &grown {
            for i in (0..n).filter(|&i| !in_bag[i]) {
                votes[i][tree.predict(&x[i])] += 1.0;
            }
        }
        let (mut hit, mut seen) = (0usize, 0usize);
        for i in 0..n {
            if votes[i].iter().sum::<f64>() > 0.0 {
                seen += 1;
                hit += usize::from(argmax(&votes[i]) == y[i]);
            }
        }
        RandomForest {
            trees: grown.into_iter().map(|(t, _)| t).collect(),
            oob_accuracy: if seen > 0 {
                hit as f64 / seen as f64
            } else {
                f64::NAN
            },
        }
    }

    /// Fraction of trees voting for each class.
    pub fn scores(&self, row: &[f64]) -> [f64; N_CLASSES] {
        let mut v = [0.0; N_CLASSES];
        for t in &self.trees {
            v[t.predict(row)] += 1.0;
        }
        v.iter_mut().for_each(|s| *s /= self.trees.len() as f64);
        v
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        argmax(&self.scores(row))
    }

    /// Mean impurity decrease per feature, each tree normalised to sum 1.
    pub fn importances(&self) -> Vec<f64> {
        let d = self.trees.first().map_or(0, |t| t.n_features);
        let mut out = vec![0.0; d];
        for t in &self.trees {
            let s: f64 = t.importances.iter().sum();
            if s > 0.0 {
                for (o, v) in out.iter_mut().zip(&t.importances) {
                    *o += v / s;
                }
            }
        }
        out.iter_mut().for_each(|v| *v /= self.trees.len() as f64);
        out
    }
}

//! CART trees: Gini classification trees and squared-error regression trees
//! (the latter used as boosting stages).
//!
//! Thresholds sit at the midpoint between consecutive distinct feature
//! values and a row goes left when `x <= threshold`. Among equally good
//! splits the first candidate found wins, scanning features in order (or in
//! the drawn order when features are subsampled) and thresholds ascending.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::N_CLASSES;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features drawn per split; `None` tries all of them in column order.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 8,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        value: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
    /// Summed impurity decrease per feature, weighted by node sample count.
    pub importances: Vec<f64>,
}

/// Split statistics of a set of samples.
pub(crate) trait Target {
    type Acc: Clone;
    fn zero(&self) -> Self::Acc;
    fn add(&self, acc: &mut Self::Acc, i: usize);
    fn remove(&self, acc: &mut Self::Acc, i: usize);
    /// Impurity times sample count.
    fn cost(&self, acc: &Self::Acc, n: usize) -> f64;
    fn leaf(&self, idx: &[usize]) -> Vec<f64>;
}

pub(crate) struct Gini<'a> {
    pub y: &'a [usize],
}

impl Target for Gini<'_> {
    type Acc = [f64; N_CLASSES];
    fn zero(&self) -> Self::Acc {
        [0.0; N_CLASSES]
    }
    fn add(&self, acc: &mut Self::Acc, i: usize) {
        acc[self.y[i]] += 1.0;
    }
    fn remove(&self, acc: &mut Self::Acc, i: usize) {
        acc[self.y[i]] -= 1.0;
    }
    fn cost(&self, acc: &Self::Acc, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let n = n as f64;
        n - acc.iter().map(|c| c * c).sum::<f64>() / n
    }
    fn leaf(&self, idx: &[usize]) -> Vec<f64> {
        let mut c = [0.0; N_CLASSES];
        for &i in idx {
            c[self.y[i]] += 1.0;
        }
        c.iter().map(|v| v / idx.len() as f64).collect()
    }
}

pub(crate) struct SquaredError<'a, F: Fn(&[usize]) -> f64> {
    pub y: &'a [f64],
    pub leaf: F,
}

impl<F: Fn(&[usize]) -> f64> Target for SquaredError<'_, F> {
    type Acc = (f64, f64);
    fn zero(&self) -> Self::Acc {
        (0.0, 0.0)
    }
    fn add(&self, acc: &mut Self::Acc, i: usize) {
        acc.0 += self.y[i];
        acc.1 += self.y[i] * self.y[i];
    }
    fn remove(&self, acc: &mut Self::Acc, i: usize) {
        acc.0 -= self.y[i];
        acc.1 -= self.y[i] * self.y[i];
    }
    fn cost(&self, acc: &Self::Acc, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        (acc.1 - acc.0 * acc.0 / n as f64).max(0.0)
    }
    fn leaf(&self, idx: &[usize]) -> Vec<f64> {
        vec![(self.leaf)(idx)]
    }
}

struct Builder<'a, T: Target> {
    x: &'a [Vec<f64>],
    target: T,
    params: &'a TreeParams,
    rng: ChaCha8Rng,
    tree: Tree,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    cost: f64,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    if m >= b {
        a
    } else {
        m
    }
}

impl<T: Target> Builder<'_, T> {
    fn find_split(&mut self, idx: &[usize], total: &T::Acc) -> Option<BestSplit> {
        let d = self.tree.n_features;
        let features: Vec<usize> = match self.params.max_features {
            Some(m) if m < d => {
                let mut f: Vec<usize> = (0..d).collect();
                let (chosen, _) = f.partial_shuffle(&mut self.rng, m);
                chosen.to_vec()
            }
            _ => (0..d).collect(),
        };
        let n = idx.len();
        let min_leaf = self.params.min_samples_leaf.max(1);
        let mut best: Option<BestSplit> = None;
        let mut order = idx.to_vec();
        for &f in &features {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut left = self.target.zero();
            let mut right = total.clone();
            for k in 0..n - 1 {
                let i = order[k];
                self.target.add(&mut left, i);
                self.target.remove(&mut right, i);
                let (a, b) = (self.x[i][f], self.x[order[k + 1]][f]);
                let nl = k + 1;
                if a == b || nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let cost = self.target.cost(&left, nl) + self.target.cost(&right, n - nl);
                if best.as_ref().is_none_or(|s| cost < s.cost) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: midpoint(a, b),
                        cost,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let mut total = self.target.zero();
        for &i in idx {
            self.target.add(&mut total, i);
        }
        let node_cost = self.target.cost(&total, idx.len());
        let id = self.tree.nodes.len();
        self.tree.nodes.push(Node::Leaf {
            value: self.target.leaf(idx),
        });
        if depth >= self.params.max_depth
            || idx.len() < self.params.min_samples_split.max(2)
            || node_cost <= 1e-12 * idx.len() as f64
        {
            return id;
        }
        let Some(split) = self.find_split(idx, &total) else {
            return id;
        };
        self.tree.importances[split.feature] += (node_cost - split.cost).max(0.0);
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.x[i][split.feature] <= split.threshold);
        let left = self.grow(&l, depth + 1);
        let right = self.grow(&r, depth + 1);
        self.tree.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

pub(crate) fn build<T: Target>(
    x: &[Vec<f64>],
    idx: &[usize],
    target: T,
    params: &TreeParams,
    rng: ChaCha8Rng,
) -> Tree {
    let d = x.first().map_or(0, |r| r.len());
    let mut b = Builder {
        x,
        target,
        params,
        rng,
        tree: Tree {
            nodes: Vec::new(),
            n_features: d,
            importances: vec![0.0; d],
        },
    };
    b.grow(idx, 0);
    b.tree
}

impl Tree {
    /// Gini tree on all rows. The seed only matters when features are
    /// subsampled.
    pub fn fit_classifier(x: &[Vec<f64>], y: &[usize], params: &TreeParams, seed: u64) -> Tree {
        let idx: Vec<usize> = (0..x.len()).collect();
        build(x, &idx, Gini { y }, params, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn leaf_value(&self, row: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn proba(&self, row: &[f64]) -> [f64; N_CLASSES] {
        let v = self.leaf_value(row);
        [v[0], v[1], v[2], v[3]]
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        super::argmax(self.leaf_value(row))
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }
}

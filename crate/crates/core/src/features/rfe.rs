//! Recursive feature elimination driven by random-forest Gini importance.
//!
//! Each round fits a forest on the surviving columns, records its
//! out-of-bag accuracy, and drops the least important tenth (at least one
//! column, never going below the target). Importance ties drop the later
//! column first.

use crate::error::{Error, Result};
use crate::ingest::SleepStage;
use crate::ml::forest::{ForestParams, RandomForest};
use crate::ml::tree::TreeParams;

pub const MIN_SAMPLES: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct RfeRound {
    pub round: usize,
    pub dropped: Vec<String>,
    /// Out-of-bag accuracy of the forest fitted before the drop.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RfeSelection {
    /// In their original column order.
    pub kept_names: Vec<String>,
    pub trace: Vec<RfeRound>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RfeConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub drop_fraction: f64,
}

impl Default for RfeConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 12,
            drop_fraction: 0.1,
        }
    }
}

pub fn rfe_select(
    names: &[String],
    x: &[Vec<f64>],
    y: &[SleepStage],
    target_k: usize,
    seed: u64,
    cfg: &RfeConfig,
) -> Result<RfeSelection> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if target_k == 0 || target_k >= names.len() {
        return Err(Error::InvalidConfig(format!(
            "target_k = {target_k} must lie in 1..{}",
            names.len()
        )));
    }
    if x.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} training vectors, need {MIN_SAMPLES}",
            x.len()
        )));
    }
    crate::ml::check_matrix(x)?;
    let yi: Vec<usize> = y.iter().map(|s| s.index()).collect();
    let mut alive: Vec<usize> = (0..names.len()).collect();
    let mut trace = Vec::new();
    let mut round = 0;
    while alive.len() > target_k {
        let sub: Vec<Vec<f64>> = x
            .iter()
            .map(|r| alive.iter().map(|&j| r[j]).collect())
            .collect();
        let m = ((alive.len() as f64).sqrt().round() as usize).max(1);
        let params = ForestParams {
            n_trees: cfg.n_trees,
            tree: TreeParams {
                max_depth: cfg.max_depth,
                min_samples_split: 2,
                min_samples_leaf: 1,
                max_features: (m < alive.len()).then_some(m),
            },
            bootstrap: true,
        };
        let forest = RandomForest::fit(&sub, &yi, &params, seed.wrapping_add(round as u64));
        let imp = forest.importances();
        let n_drop = ((alive.len() as f64 * cfg.drop_fraction).floor() as usize)
            .max(1)
            .min(alive.len() - target_k);
        let mut order: Vec<usize> = (0..alive.len()).collect();
        order.sort_by(|&a, &b| imp[a].total_cmp(&imp[b]).then(b.cmp(&a)));
        let mut drop: Vec<usize> = order[..n_drop].to_vec();
        drop.sort_unstable();
        trace.push(RfeRound {
            round,
            dropped: drop.iter().map(|&i| names[alive[i]].clone()).collect(),
            score: forest.oob_accuracy,
        });
        alive = (0..alive.len())
            .filter(|i| drop.binary_search(i).is_err())
            .map(|i| alive[i])
            .collect();
        round += 1;
    }
    Ok(RfeSelection {
        kept_names: alive.iter().map(|&j| names[j].clone()).collect(),
        trace,
    })
}

//! Seeded random search with an internal cross-validation score.
//!
//! When every dimension is discrete and the grid has at most `budget`
//! points, the whole grid is evaluated in shuffled order. A larger discrete
//! grid is sampled without replacement. Continuous dimensions are sampled
//! independently per trial.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{cross_validate, Algo, ClassifierSpec};
use crate::error::{Error, Result};
use crate::ingest::SleepStage;

/// Cap on grid enumeration; larger grids fall back to independent draws.
const MAX_GRID: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub enum ParamDomain {
    Discrete(Vec<f64>),
    Uniform(f64, f64),
    LogUniform(f64, f64),
}

impl ParamDomain {
    fn int_range(lo: i64, hi: i64) -> Self {
        ParamDomain::Discrete((lo..=hi).map(|v| v as f64).collect())
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            ParamDomain::Discrete(v) => v[rng.random_range(0..v.len())],
            ParamDomain::Uniform(a, b) => rng.random_range(*a..=*b),
            ParamDomain::LogUniform(a, b) => rng.random_range(a.ln()..=b.ln()).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub algo: Algo,
    pub dims: Vec<(String, ParamDomain)>,
}

impl SearchSpace {
    pub fn new(algo: Algo) -> Self {
        Self {
            algo,
            dims: Vec::new(),
        }
    }

    pub fn with(mut self, name: &str, d: ParamDomain) -> Self {
        self.dims.push((name.to_string(), d));
        self
    }

    /// Default ranges per algorithm.
    pub fn default_for(algo: Algo) -> Self {
        let s = SearchSpace::new(algo);
        match algo {
            Algo::Knn => s.with("k", ParamDomain::int_range(1, 15)),
            Algo::LogisticRegression => s
                .with("learning_rate", ParamDomain::LogUniform(0.01, 1.0))
                .with("l2", ParamDomain::LogUniform(1e-6, 1e-1)),
            Algo::DecisionTree => s
                .with("max_depth", ParamDomain::int_range(2, 16))
                .with("min_samples_leaf", ParamDomain::int_range(1, 10)),
            Algo::RandomForest => s
                .with("n_trees", ParamDomain::Discrete(vec![50.0, 100.0, 200.0]))
                .with("max_depth", ParamDomain::int_range(4, 16))
                .with("min_samples_leaf", ParamDomain::int_range(1, 5)),
            Algo::Gbdt => s
                .with("n_trees", ParamDomain::Discrete(vec![50.0, 100.0, 200.0]))
                .with("learning_rate", ParamDomain::LogUniform(0.02, 0.5))
                .with("max_depth", ParamDomain::int_range(2, 5)),
        }
    }

    fn grid_size(&self) -> Option<usize> {
        let mut n = 1usize;
        for (_, d) in &self.dims {
            match d {
                ParamDomain::Discrete(v) => n = n.checked_mul(v.len())?,
                _ => return None,
            }
        }
        Some(n)
    }

    fn grid_point(&self, mut i: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dims.len());
        for (_, d) in self.dims.iter().rev() {
            let ParamDomain::Discrete(v) = d else {
                unreachable!("grid of discrete dims")
            };
            out.push(v[i % v.len()]);
            i /= v.len();
        }
        out.reverse();
        out
    }

    /// The configurations to try, in trial order.
    pub fn draw(&self, budget: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self.grid_size() {
            Some(g) if g <= MAX_GRID => {
                let mut order: Vec<usize> = (0..g).collect();
                order.shuffle(&mut rng);
                order.truncate(budget);
                order.into_iter().map(|i| self.grid_point(i)).collect()
            }
            _ => (0..budget)
                .map(|_| self.dims.iter().map(|(_, d)| d.draw(&mut rng)).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub params: Vec<(String, f64)>,
    pub mean_accuracy: f64,
    pub mean_macro_f1: f64,
    pub std_macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub best: ClassifierSpec,
    pub best_trial: usize,
    pub trace: Vec<TrialRecord>,
}

impl TuneResult {
    pub fn trace_csv(&self) -> String {
        let names: Vec<&str> = self
            .trace
            .first()
            .map(|t| t.params.iter().map(|p| p.0.as_str()).collect())
            .unwrap_or_default();
        let mut s = String::from("trial");
        for n in &names {
            let _ = write!(s, ",{n}");
        }
        s.push_str(",mean_accuracy,mean_macro_f1,std_macro_f1\n");
        for t in &self.trace {
            let _ = write!(s, "{}", t.trial);
            for (_, v) in &t.params {
                let _ = write!(s, ",{v}");
            }
            let _ = writeln!(
                s,
                ",{},{},{}",
                t.mean_accuracy, t.mean_macro_f1, t.std_macro_f1
            );
        }
        s
    }

    pub fn write_trace(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.trace_csv())?;
        Ok(())
    }
}

/// Evaluate up to `budget` configurations with `folds`-fold CV and keep the
/// best mean macro-F1 (earliest trial on ties). Trials run concurrently.
pub fn tune_hyperparameters(
    space: &SearchSpace,
    base: &ClassifierSpec,
    names: &[String],
    x: &[Vec<f64>],
    y: &[SleepStage],
    budget: usize,
    folds: usize,
    seed: u64,
) -> Result<TuneResult> {
    if budget == 0 {
        return Err(Error::InvalidConfig("tuning budget must be ≥ 1".into()));
    }
    if space.dims.is_empty()
        || space
            .dims
            .iter()
            .any(|(_, d)| matches!(d, ParamDomain::Discrete(v) if v.is_empty()))
    {
        return Err(Error::InvalidConfig("empty search space".into()));
    }
    if base.algo != space.algo {
        return Err(Error::InvalidConfig(format!(
            "search space is for {}, base spec is {}",
            space.algo, base.algo
        )));
    }
    let configs = space.draw(budget, seed);
    let trace: Vec<TrialRecord> = configs
        .par_iter()
        .enumerate()
        .map(|(trial, vals)| {
            let mut spec = base.clone();
            for ((n, _), v) in space.dims.iter().zip(vals) {
                spec.hyperparams.insert(n.clone(), *v);
            }
            let cv = cross_validate(&spec, names, x, y, folds, seed)?;
            Ok(TrialRecord {
                trial,
                params: space
                    .dims
                    .iter()
                    .map(|(n, _)| n.clone())
                    .zip(vals.iter().copied())
                    .collect(),
                mean_accuracy: cv.mean_accuracy,
                mean_macro_f1: cv.mean_macro_f1,
                std_macro_f1: cv.std_macro_f1,
            })
        })
        .collect::<Result<_>>()?;
    let best_trial = trace.iter().fold(0, |b, t| {
        if t.mean_macro_f1 > trace[b].mean_macro_f1 {
            t.trial
        } else {
            b
        }
    });
    let mut best = base.clone();
    for (n, v) in &trace[best_trial].params {
        best.hyperparams.insert(n.clone(), *v);
    }
    Ok(TuneResult {
        best,
        best_trial,
        trace,
    })
}

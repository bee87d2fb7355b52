//! Stratified k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{train_classifier, ClassifierSpec};
use crate::error::{Error, Result};
use crate::eval::compute_metrics;
use crate::ingest::SleepStage;

/// Test indices of each fold. Each class is shuffled and dealt round-robin,
/// continuing from where the previous class stopped so fold sizes differ by
/// at most one.
pub fn stratified_folds(labels: &[SleepStage], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    if labels.len() < folds {
        return Err(Error::InsufficientData(format!(
            "{} samples cannot fill {folds} folds",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    let mut next = 0;
    for st in SleepStage::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == st).collect();
        if !idx.is_empty() && idx.len() < folds {
            log::warn!(
                "class {st} has {} samples, fewer than {folds} folds",
                idx.len()
            );
        }
        idx.shuffle(&mut rng);
        for i in idx {
            out[next].push(i);
            next = (next + 1) % folds;
        }
    }
    out.iter_mut().for_each(|f| f.sort_unstable());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub fold_accuracy: Vec<f64>,
    pub fold_macro_f1: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_macro_f1: f64,
    pub std_macro_f1: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (
        m,
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt(),
    )
}

/// Folds are trained concurrently and gathered in fold order.
pub fn cross_validate(
    spec: &ClassifierSpec,
    names: &[String],
    x: &[Vec<f64>],
    y: &[SleepStage],
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let parts = stratified_folds(y, folds, seed)?;
    let scores: Vec<(f64, f64)> = parts
        .par_iter()
        .map(|test| {
            let mut is_test = vec![false; x.len()];
            test.iter().for_each(|&i| is_test[i] = true);
            let (mut xtr, mut ytr) = (Vec::new(), Vec::new());
            for i in (0..x.len()).filter(|&i| !is_test[i]) {
                xtr.push(x[i].clone());
                ytr.push(y[i]);
            }
            let model = train_classifier(spec, names, &xtr, &ytr)?;
            let xte: Vec<Vec<f64>> = test.iter().map(|&i| x[i].clone()).collect();
            let yte: Vec<SleepStage> = test.iter().map(|&i| y[i]).collect();
            let pred = model.predict_rows(&xte)?;
            let m = compute_metrics(&yte, &pred.labels)?;
            Ok((m.accuracy, m.macro_f1))
        })
        .collect::<Result<_>>()?;
    let acc: Vec<f64> = scores.iter().map(|s| s.0).collect();
    let f1: Vec<f64> = scores.iter().map(|s| s.1).collect();
    let (ma, sa) = mean_std(&acc);
    let (mf, sf) = mean_std(&f1);
    Ok(CvResult {
        fold_accuracy: acc,
        fold_macro_f1: f1,
        mean_accuracy: ma,
        std_accuracy: sa,
        mean_macro_f1: mf,
        std_macro_f1: sf,
    })
}

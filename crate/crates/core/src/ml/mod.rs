//! Classical classifiers over feature tables.
//!
//! Every learner sees rows of `f64` features without NaNs and class indices
//! in `SleepStage::ALL` order. [`train_classifier`] wraps the learners with
//! their hyperparameter validation and (for KNN and logistic regression) a
//! standardizer fitted on the training rows.

pub mod cv;
pub mod forest;
pub mod gbdt;
pub mod knn;
pub mod logistic;
pub mod preprocess;
pub mod serialize;
pub mod tree;
pub mod tune;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ingest::SleepStage;

pub use cv::{cross_validate, stratified_folds, CvResult};
pub use preprocess::{MedianImputer, Standardizer};
pub use tune::{tune_hyperparameters, ParamDomain, SearchSpace, TuneResult};

pub const N_CLASSES: usize = SleepStage::COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algo {
    Knn,
    LogisticRegression,
    DecisionTree,
    RandomForest,
    Gbdt,
}

impl Algo {
    pub const ALL: [Algo; 5] = [
        Algo::Knn,
        Algo::LogisticRegression,
        Algo::DecisionTree,
        Algo::RandomForest,
        Algo::Gbdt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Knn => "knn",
            Algo::LogisticRegression => "lr",
            Algo::DecisionTree => "dt",
            Algo::RandomForest => "rf",
            Algo::Gbdt => "gbdt",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        Algo::ALL.iter().position(|a| *a == self).expect("listed") as u8
    }

    pub(crate) fn from_tag(t: u8) -> Result<Algo> {
        Algo::ALL
            .get(t as usize)
            .copied()
            .ok_or_else(|| Error::Parse(format!("unknown algorithm tag {t}")))
    }

    /// Defaults used for any hyperparameter the spec leaves out.
    pub fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            Algo::Knn => &[("k", 5.0)],
            Algo::LogisticRegression => &[("learning_rate", 0.5), ("epochs", 300.0), ("l2", 1e-4)],
            Algo::DecisionTree => &[
                ("max_depth", 8.0),
                ("min_samples_split", 2.0),
                ("min_samples_leaf", 1.0),
            ],
            Algo::RandomForest => &[
                ("n_trees", 100.0),
                ("max_depth", 12.0),
                ("min_samples_split", 2.0),
                ("min_samples_leaf", 1.0),
                // fraction of features tried per split; 0 means sqrt(d)
                ("max_features", 0.0),
                ("bootstrap", 1.0),
            ],
            Algo::Gbdt => &[
                ("n_trees", 100.0),
                ("learning_rate", 0.1),
                ("max_depth", 3.0),
                ("min_samples_leaf", 1.0),
                ("subsample", 1.0),
            ],
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "knn" => Ok(Algo::Knn),
            "lr" | "logistic" | "logisticregression" => Ok(Algo::LogisticRegression),
            "dt" | "tree" | "decisiontree" => Ok(Algo::DecisionTree),
            "rf" | "forest" | "randomforest" => Ok(Algo::RandomForest),
            "gbdt" | "gb" => Ok(Algo::Gbdt),
            other => Err(Error::InvalidConfig(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSpec {
    pub algo: Algo,
    pub hyperparams: BTreeMap<String, f64>,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(algo: Algo, seed: u64) -> Self {
        Self {
            algo,
            hyperparams: BTreeMap::new(),
            seed,
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.hyperparams.insert(name.to_string(), value);
        self
    }

    /// Value of a hyperparameter, falling back to the algorithm default.
    pub fn get(&self, name: &str) -> f64 {
        self.hyperparams.get(name).copied().unwrap_or_else(|| {
            self.algo
                .defaults()
                .iter()
                .find(|(n, _)| *n == name)
                .map_or(f64::NAN, |(_, v)| *v)
        })
    }

    fn int(&self, name: &str, min: f64) -> Result<usize> {
        let v = self.get(name);
        if !(v >= min) || v.fract() != 0.0 {
            return Err(Error::InvalidConfig(format!(
                "{}: `{name}` must be an integer ≥ {min}, got {v}",
                self.algo
            )));
        }
        Ok(v as usize)
    }

    fn in_unit(&self, name: &str, allow_zero: bool) -> Result<f64> {
        let v = self.get(name);
        let ok = v <= 1.0 && if allow_zero { v >= 0.0 } else { v > 0.0 };
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "{}: `{name}` must lie in {}0, 1], got {v}",
                self.algo,
                if allow_zero { "[" } else { "(" }
            )));
        }
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        let known: Vec<&str> = self.algo.defaults().iter().map(|(n, _)| *n).collect();
        if let Some(k) = self
            .hyperparams
            .keys()
            .find(|k| !known.contains(&k.as_str()))
        {
            return Err(Error::InvalidConfig(format!(
                "{}: unknown hyperparameter `{k}`",
                self.algo
            )));
        }
        match self.algo {
            Algo::Knn => {
                self.int("k", 1.0)?;
            }
            Algo::LogisticRegression => {
                self.in_unit("learning_rate", false)?;
                self.int("epochs", 1.0)?;
                if !(self.get("l2") >= 0.0) {
                    return Err(Error::InvalidConfig("lr: `l2` must be ≥ 0".into()));
                }
            }
            Algo::DecisionTree => {
                self.tree_params()?;
            }
            Algo::RandomForest => {
                self.tree_params()?;
                self.int("n_trees", 1.0)?;
                self.in_unit("max_features", true)?;
                self.in_unit("bootstrap", true)?;
            }
            Algo::Gbdt => {
                self.int("n_trees", 1.0)?;
                self.in_unit("learning_rate", false)?;
                self.int("max_depth", 1.0)?;
                self.int("min_samples_leaf", 1.0)?;
                self.in_unit("subsample", false)?;
            }
        }
        Ok(())
    }

    pub(crate) fn tree_params(&self) -> Result<tree::TreeParams> {
        Ok(tree::TreeParams {
            max_depth: self.int("max_depth", 1.0)?,
            min_samples_split: self.int("min_samples_split", 2.0)?,
            min_samples_leaf: self.int("min_samples_leaf", 1.0)?,
            max_features: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Knn(knn::KnnModel),
    Logistic(logistic::LogisticModel),
    Tree(tree::Tree),
    Forest(forest::RandomForest),
    Gbdt(gbdt::Gbdt),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    pub feature_names: Vec<String>,
    pub class_order: [SleepStage; 4],
    /// Training medians substituted for NaN (undefined) features.
    pub imputer: MedianImputer,
    pub scaler: Option<Standardizer>,
    pub params: ModelParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<SleepStage>,
    /// One score row per sample, in `class_order`.
    pub scores: Vec<[f64; N_CLASSES]>,
}

/// Index of the highest score; ties go to the earlier class.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_matrix(x: &[Vec<f64>]) -> Result<usize> {
    let d = x.first().map_or(0, |r| r.len());
    for (i, r) in x.iter().enumerate() {
        if r.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "row {i} has {} columns, expected {d}",
                r.len()
            )));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "row {i} contains a non-finite value"
            )));
        }
    }
    Ok(d)
}

/// Shape check that lets NaN (an undefined feature) through for imputation.
fn check_raw(x: &[Vec<f64>], expect: Option<usize>) -> Result<()> {
    let d = expect.unwrap_or_else(|| x.first().map_or(0, |r| r.len()));
    for (i, r) in x.iter().enumerate() {
        if r.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "row {i} has {} columns, expected {d}",
                r.len()
            )));
        }
        if r.iter().any(|v| v.is_infinite()) {
            return Err(Error::NonFinite(format!(
                "row {i} contains an infinite value"
            )));
        }
    }
    Ok(())
}

pub fn train_classifier(
    spec: &ClassifierSpec,
    feature_names: &[String],
    x: &[Vec<f64>],
    y: &[SleepStage],
) -> Result<TrainedModel> {
    spec.validate()?;
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    check_raw(x, None)?;
    let imputer = MedianImputer::fit(x);
    let x = &imputer.transform(x);
    let d = check_matrix(x)?;
    if !x.is_empty() && d != feature_names.len() {
        return Err(Error::FeatureMismatch(format!(
            "{} feature names for {d} columns",
            feature_names.len()
        )));
    }
    let yi: Vec<usize> = y.iter().map(|s| s.index()).collect();
    let mut present = yi.clone();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::Degenerate(format!(
            "training data has {} distinct class(es), need at least 2",
            present.len()
        )));
    }
    let (scaler, xs) = match spec.algo {
        Algo::Knn | Algo::LogisticRegression => {
            let s = Standardizer::fit(x);
            let t = s.transform(x);
            (Some(s), t)
        }
        _ => (None, x.to_vec()),
    };
    let params = match spec.algo {
        Algo::Knn => ModelParams::Knn(knn::KnnModel::fit(&xs, &yi, spec.int("k", 1.0)?)),
        Algo::LogisticRegression => ModelParams::Logistic(logistic::LogisticModel::fit(
            &xs,
            &yi,
            spec.get("learning_rate"),
            spec.int("epochs", 1.0)?,
            spec.get("l2"),
        )),
        Algo::DecisionTree => ModelParams::Tree(tree::Tree::fit_classifier(
            &xs,
            &yi,
            &spec.tree_params()?,
            spec.seed,
        )),
        Algo::RandomForest => ModelParams::Forest(forest::RandomForest::fit(
            &xs,
            &yi,
            &forest::ForestParams::from_spec(spec, d)?,
            spec.seed,
        )),
        Algo::Gbdt => ModelParams::Gbdt(gbdt::Gbdt::fit(
            &xs,
            &yi,
            &gbdt::GbdtParams::from_spec(spec)?,
            spec.seed,
        )),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        feature_names: feature_names.to_vec(),
        class_order: SleepStage::ALL,
        imputer,
        scaler,
        params,
    })
}

impl TrainedModel {
    /// Predict after checking that the columns are the ones trained on.
    pub fn predict(&self, feature_names: &[String], x: &[Vec<f64>]) -> Result<Prediction> {
        if feature_names != self.feature_names.as_slice() {
            return Err(Error::FeatureMismatch(
                "feature names differ from the ones the model was trained on".into(),
            ));
        }
        self.predict_rows(x)
    }

    pub fn predict_rows(&self, x: &[Vec<f64>]) -> Result<Prediction> {
        check_raw(x, Some(self.imputer.medians.len()))?;
        let x = &self.imputer.transform(x);
        let d = check_matrix(x)?;
        if !x.is_empty() && d != self.feature_names.len() {
            return Err(Error::ShapeMismatch(format!(
                "{d} columns, model expects {}",
                self.feature_names.len()
            )));
        }
        let xs = match &self.scaler {
            Some(s) => s.transform(x),
            None => x.to_vec(),
        };
        let scores: Vec<[f64; N_CLASSES]> = xs
            .iter()
            .map(|r| match &self.params {
                ModelParams::Knn(m) => m.scores(r),
                ModelParams::Logistic(m) => m.proba(r),
                ModelParams::Tree(m) => m.proba(r),
                ModelParams::Forest(m) => m.scores(r),
                ModelParams::Gbdt(m) => m.proba(r),
            })
            .collect();
        let labels = scores.iter().map(|s| self.class_order[argmax(s)]).collect();
        Ok(Prediction { labels, scores })
    }
}

pub fn predict(
    model: &TrainedModel,
    feature_names: &[String],
    x: &[Vec<f64>],
) -> Result<Prediction> {
    model.predict(feature_names, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ClassifierSpec::new(Algo::Knn, 0)
            .with("k", 0.0)
            .validate()
            .is_err());
        assert!(ClassifierSpec::new(Algo::Gbdt, 0)
            .with("learning_rate", 1.5)
            .validate()
            .is_err());
        assert!(ClassifierSpec::new(Algo::Gbdt, 0)
            .with("learning_rate", 1.0)
            .validate()
            .is_ok());
        assert!(ClassifierSpec::new(Algo::DecisionTree, 0)
            .with("max_depth", 0.0)
            .validate()
            .is_err());
        assert!(ClassifierSpec::new(Algo::RandomForest, 0)
            .with("n_trees", 0.0)
            .validate()
            .is_err());
        assert!(ClassifierSpec::new(Algo::Knn, 0)
            .with("depth", 3.0)
            .validate()
            .is_err());
    }

    #[test]
    fn single_class_is_degenerate() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = [SleepStage::Wake, SleepStage::Wake];
        let r = train_classifier(&ClassifierSpec::new(Algo::Knn, 0), &["a".into()], &x, &y);
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn empty_prediction() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = [SleepStage::Wake, SleepStage::Deep];
        let m = train_classifier(
            &ClassifierSpec::new(Algo::Knn, 0).with("k", 1.0),
            &["a".into()],
            &x,
            &y,
        )
        .unwrap();
        let p = m.predict(&["a".into()], &[]).unwrap();
        assert!(p.labels.is_empty());
        assert!(m.predict(&["b".into()], &x).is_err());
    }

    #[test]
    fn algo_names_round_trip() {
        for a in Algo::ALL {
            assert_eq!(a.as_str().parse::<Algo>().unwrap(), a);
            assert_eq!(Algo::from_tag(a.tag()).unwrap(), a);
        }
    }
}

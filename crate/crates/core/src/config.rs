//! Plain `key = value` run configuration.
//!
//! Every tunable default of the pipeline has a key here; `Config::default()`
//! and `config/sleeplite.conf` hold the same values. Lines starting with `#`
//! are comments, unknown keys are errors, and pairs use `lo,hi`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::energy::EnergyTable;
use crate::error::{Error, Result};
use crate::features::rfe::RfeConfig;
use crate::features::FeatureConfig;
use crate::ml::{Algo, ClassifierSpec};
use crate::qnn::SleepLiteCnnConfig;
use crate::windowing::{SplitFractions, WindowMode, WindowingConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub seed: u64,
    /// EDF signal label; `None` picks the first ECG-like channel.
    pub channel: Option<String>,
    pub ml_window: WindowingConfig,
    pub dl_window: WindowingConfig,
    pub split: SplitFractions,
    pub features: FeatureConfig,
    pub rfe: RfeConfig,
    pub rfe_target: usize,
    pub algo: Algo,
    /// Hyperparameter overrides per algorithm (`hyper.<algo>.<name>`).
    pub hyper: BTreeMap<(Algo, String), f64>,
    pub tune_budget: usize,
    pub tune_folds: usize,
    pub cnn: SleepLiteCnnConfig,
    pub calibration_windows: usize,
    /// `None` uses the bundled 45 nm table.
    pub energy_table: Option<PathBuf>,
    pub target_node_nm: u32,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 42,
            channel: None,
            ml_window: WindowingConfig::ml(),
            dl_window: WindowingConfig::dl(),
            split: SplitFractions::default(),
            features: FeatureConfig::default(),
            rfe: RfeConfig::default(),
            rfe_target: 30,
            algo: Algo::Gbdt,
            hyper: BTreeMap::new(),
            tune_budget: 20,
            tune_folds: 5,
            cnn: SleepLiteCnnConfig::default(),
            calibration_windows: 32,
            energy_table: None,
            target_node_nm: 180,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::InvalidConfig(format!("`{key}`: cannot parse `{v}`")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|p| num(key, p.trim())).collect()
}

fn pair(key: &str, v: &str) -> Result<(f64, f64)> {
    match list::<f64>(key, v)?.as_slice() {
        [a, b] if a < b => Ok((*a, *b)),
        _ => Err(Error::InvalidConfig(format!(
            "`{key}` needs `lo,hi` with lo < hi, got `{v}`"
        ))),
    }
}

fn triple(key: &str, v: &str) -> Result<[usize; 3]> {
    list::<usize>(key, v)?
        .try_into()
        .map_err(|_| Error::InvalidConfig(format!("`{key}` needs three values, got `{v}`")))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Config::default();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key = value", ln + 1))
            })?;
            c.set(k.trim(), v.trim())?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Apply one `key = value` pair.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let f = &mut self.features;
        match key {
            "seed" => self.seed = num(key, v)?,
            "channel" => self.channel = (!v.is_empty()).then(|| v.to_string()),
            "window.ml" => {
                let [w, s]: [u32; 2] = list(key, v)?
                    .try_into()
                    .map_err(|_| Error::InvalidConfig(format!("`{key}` needs window,step")))?;
                self.ml_window = WindowingConfig::new(WindowMode::Ml, w, s)?;
            }
            "window.dl" => {
                let [w, s]: [u32; 2] = list(key, v)?
                    .try_into()
                    .map_err(|_| Error::InvalidConfig(format!("`{key}` needs window,step")))?;
                self.dl_window = WindowingConfig::new(WindowMode::Dl, w, s)?;
            }
            "split.test" => self.split.test = num(key, v)?,
            "split.validation" => self.split.validation = num(key, v)?,
            "features.step_s" => f.step_s = num(key, v)?,
            "freq.lf" => f.freq.lf = pair(key, v)?,
            "freq.hf" => f.freq.hf = pair(key, v)?,
            "freq.vhf" => f.freq.vhf = pair(key, v)?,
            "freq.resample_hz" => f.freq.resample_hz = num(key, v)?,
            "freq.welch_segment_s" => f.freq.welch_segment_s = num(key, v)?,
            "freq.min_reliable_span_s" => f.freq.min_reliable_span_s = num(key, v)?,
            "entropy.embedding_dim" => f.nonlinear.embedding_dim = num(key, v)?,
            "entropy.tolerance_sd" => f.nonlinear.tolerance_sd = num(key, v)?,
            "entropy.max_scale" => f.nonlinear.max_scale = num(key, v)?,
            "dfa.scales" => {
                let (lo, hi) = pair(key, v)?;
                f.nonlinear.dfa_scales = (lo as usize, hi as usize);
            }
            "higuchi.kmax" => f.nonlinear.higuchi_kmax = num(key, v)?,
            "rfe.target" => self.rfe_target = num(key, v)?,
            "rfe.n_trees" => self.rfe.n_trees = num(key, v)?,
            "rfe.max_depth" => self.rfe.max_depth = num(key, v)?,
            "rfe.drop_fraction" => self.rfe.drop_fraction = num(key, v)?,
            "train.algo" => self.algo = v.parse()?,
            "tune.budget" => self.tune_budget = num(key, v)?,
            "tune.folds" => self.tune_folds = num(key, v)?,
            "cnn.input_len" => self.cnn.input_len = num(key, v)?,
            "cnn.filters" => self.cnn.filters = triple(key, v)?,
            "cnn.kernels" => self.cnn.kernels = triple(key, v)?,
            "cnn.pool" => self.cnn.pool = num(key, v)?,
            "cnn.hidden" => self.cnn.hidden = num(key, v)?,
            "cnn.dropout" => self.cnn.dropout = num(key, v)?,
            "cnn.init_seed" => self.cnn.init_seed = num(key, v)?,
            "quant.calibration_windows" => self.calibration_windows = num(key, v)?,
            "energy.table" => self.energy_table = (!v.is_empty()).then(|| PathBuf::from(v)),
            "energy.target_node_nm" => self.target_node_nm = num(key, v)?,
            _ => {
                let Some(rest) = key.strip_prefix("hyper.") else {
                    return Err(Error::InvalidConfig(format!("unknown key `{key}`")));
                };
                let (algo, name) = rest.split_once('.').ok_or_else(|| {
                    Error::InvalidConfig(format!("`{key}`: expected hyper.<algo>.<name>"))
                })?;
                let algo: Algo = algo.parse()?;
                if !algo.defaults().iter().any(|(n, _)| *n == name) {
                    return Err(Error::InvalidConfig(format!(
                        "{algo} has no hyperparameter `{name}`"
                    )));
                }
                self.hyper.insert((algo, name.to_string()), num(key, v)?);
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.split;
        if !(0.0..1.0).contains(&s.test) || !(0.0..1.0).contains(&s.validation) {
            return Err(Error::InvalidConfig(
                "split fractions must lie in [0, 1)".into(),
            ));
        }
        if self.features.step_s == 0 || self.features.step_s > self.ml_window.window_s {
            return Err(Error::InvalidConfig(
                "features.step_s must lie in 1..=ML window".into(),
            ));
        }
        if self.tune_folds < 2 || self.tune_budget == 0 {
            return Err(Error::InvalidConfig(
                "tune.folds must be ≥ 2 and tune.budget ≥ 1".into(),
            ));
        }
        if self.calibration_windows == 0 {
            return Err(Error::InvalidConfig(
                "quant.calibration_windows must be ≥ 1".into(),
            ));
        }
        Ok(())
    }

    /// Classifier spec for `algo` with this config's overrides and seed.
    pub fn classifier(&self, algo: Algo) -> ClassifierSpec {
        self.hyper
            .iter()
            .filter(|((a, _), _)| *a == algo)
            .fold(ClassifierSpec::new(algo, self.seed), |s, ((_, n), v)| {
                s.with(n, *v)
            })
    }

    pub fn energy_table(&self) -> Result<EnergyTable> {
        match &self.energy_table {
            Some(p) => EnergyTable::load(p),
            None => Ok(EnergyTable::default()),
        }
    }

    /// The config as text that [`Config::parse`] reads back unchanged.
    pub fn to_text(&self) -> String {
        let f = &self.features;
        let n = &f.nonlinear;
        let c = &self.cnn;
        let join = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut s = String::new();
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "channel = {}", self.channel.as_deref().unwrap_or(""));
        let _ = writeln!(
            s,
            "window.ml = {},{}",
            self.ml_window.window_s, self.ml_window.step_s
        );
        let _ = writeln!(
            s,
            "window.dl = {},{}",
            self.dl_window.window_s, self.dl_window.step_s
        );
        let _ = writeln!(s, "split.test = {}", self.split.test);
        let _ = writeln!(s, "split.validation = {}", self.split.validation);
        let _ = writeln!(s, "features.step_s = {}", f.step_s);
        let _ = writeln!(s, "freq.lf = {},{}", f.freq.lf.0, f.freq.lf.1);
        let _ = writeln!(s, "freq.hf = {},{}", f.freq.hf.0, f.freq.hf.1);
        let _ = writeln!(s, "freq.vhf = {},{}", f.freq.vhf.0, f.freq.vhf.1);
        let _ = writeln!(s, "freq.resample_hz = {}", f.freq.resample_hz);
        let _ = writeln!(s, "freq.welch_segment_s = {}", f.freq.welch_segment_s);
        let _ = writeln!(
            s,
            "freq.min_reliable_span_s = {}",
            f.freq.min_reliable_span_s
        );
        let _ = writeln!(s, "entropy.embedding_dim = {}", n.embedding_dim);
        let _ = writeln!(s, "entropy.tolerance_sd = {}", n.tolerance_sd);
        let _ = writeln!(s, "entropy.max_scale = {}", n.max_scale);
        let _ = writeln!(s, "dfa.scales = {},{}", n.dfa_scales.0, n.dfa_scales.1);
        let _ = writeln!(s, "higuchi.kmax = {}", n.higuchi_kmax);
        let _ = writeln!(s, "rfe.target = {}", self.rfe_target);
        let _ = writeln!(s, "rfe.n_trees = {}", self.rfe.n_trees);
        let _ = writeln!(s, "rfe.max_depth = {}", self.rfe.max_depth);
        let _ = writeln!(s, "rfe.drop_fraction = {}", self.rfe.drop_fraction);
        let _ = writeln!(s, "train.algo = {}", self.algo);
        for ((a, name), v) in &self.hyper {
            let _ = writeln!(s, "hyper.{a}.{name} = {v}");
        }
        let _ = writeln!(s, "tune.budget = {}", self.tune_budget);
        let _ = writeln!(s, "tune.folds = {}", self.tune_folds);
        let _ = writeln!(s, "cnn.input_len = {}", c.input_len);
        let _ = writeln!(s, "cnn.filters = {}", join(&c.filters));
        let _ = writeln!(s, "cnn.kernels = {}", join(&c.kernels));
        let _ = writeln!(s, "cnn.pool = {}", c.pool);
        let _ = writeln!(s, "cnn.hidden = {}", c.hidden);
        let _ = writeln!(s, "cnn.dropout = {}", c.dropout);
        let _ = writeln!(s, "cnn.init_seed = {}", c.init_seed);
        let _ = writeln!(
            s,
            "quant.calibration_windows = {}",
            self.calibration_windows
        );
        let table = self
            .energy_table
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default();
        let _ = writeln!(s, "energy.table = {table}");
        let _ = writeln!(s, "energy.target_node_nm = {}", self.target_node_nm);
        s
    }
}

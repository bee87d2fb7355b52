//! `SEML` model container.
//!
//! Layout (little-endian): magic `SEML`, u16 version, u8 algorithm tag,
//! u64 seed, u32 hyperparameter count then `(str name, f64 value)` pairs in
//! name order, u32 feature count then names, 4 class bytes, imputer medians, u8 scaler flag
//! (+ means and scales), then the algorithm parameters. Strings are a u16
//! length plus UTF-8 bytes; float vectors a u32 length plus f64 values.

use std::path::Path;

use super::forest::RandomForest;
use super::gbdt::Gbdt;
use super::knn::KnnModel;
use super::logistic::LogisticModel;
use super::tree::{Node, Tree};
use super::{Algo, ClassifierSpec, MedianImputer, ModelParams, Standardizer, TrainedModel};
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::ingest::SleepStage;

pub const MAGIC: &[u8; 4] = b"SEML";
pub const VERSION: u16 = 1;

fn put_tree(w: &mut Writer, t: &Tree) {
    w.len(t.n_features);
    w.f64s(&t.importances);
    w.len(t.nodes.len());
    for n in &t.nodes {
        match n {
            Node::Leaf { value } => {
                w.u8(0);
                w.f64s(value);
            }
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                w.u8(1);
                w.len(*feature);
                w.f64(*threshold);
                w.len(*left);
                w.len(*right);
            }
        }
    }
}

fn get_tree(r: &mut Reader) -> Result<Tree> {
    let n_features = r.u32()? as usize;
    let importances = r.f64s()?;
    let n = r.len()?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        nodes.push(match r.u8()? {
            0 => Node::Leaf { value: r.f64s()? },
            1 => {
                let feature = r.u32()? as usize;
                let threshold = r.f64()?;
                let left = r.u32()? as usize;
                let right = r.u32()? as usize;
                if left >= n || right >= n || feature >= n_features {
                    return Err(Error::Parse("tree node index out of range".into()));
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                }
            }
            t => return Err(Error::Parse(format!("unknown tree node tag {t}"))),
        });
    }
    Ok(Tree {
        nodes,
        n_features,
        importances,
    })
}

fn put_trees(w: &mut Writer, ts: &[Tree]) {
    w.len(ts.len());
    ts.iter().for_each(|t| put_tree(w, t));
}

fn get_trees(r: &mut Reader) -> Result<Vec<Tree>> {
    let n = r.len()?;
    (0..n).map(|_| get_tree(r)).collect()
}

pub fn to_bytes(m: &TrainedModel) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u16(VERSION);
    w.u8(m.spec.algo.tag());
    w.u64(m.spec.seed);
    w.len(m.spec.hyperparams.len());
    for (k, v) in &m.spec.hyperparams {
        w.str(k);
        w.f64(*v);
    }
    w.len(m.feature_names.len());
    m.feature_names.iter().for_each(|n| w.str(n));
    m.class_order.iter().for_each(|c| w.u8(c.index() as u8));
    w.f64s(&m.imputer.medians);
    match &m.scaler {
        Some(s) => {
            w.u8(1);
            w.f64s(&s.means);
            w.f64s(&s.scales);
        }
        None => w.u8(0),
    }
    match &m.params {
        ModelParams::Knn(k) => {
            w.len(k.k);
            w.len(k.x.len());
            for (row, y) in k.x.iter().zip(&k.y) {
                w.u8(*y as u8);
                w.f64s(row);
            }
        }
        ModelParams::Logistic(l) => {
            w.len(l.weights.len());
            l.weights.iter().for_each(|r| w.f64s(r));
            w.f64s(&l.bias);
        }
        ModelParams::Tree(t) => put_tree(&mut w, t),
        ModelParams::Forest(f) => {
            w.f64(f.oob_accuracy);
            put_trees(&mut w, &f.trees);
        }
        ModelParams::Gbdt(g) => {
            w.f64s(&g.init);
            w.f64(g.learning_rate);
            w.len(g.stages.len());
            g.stages.iter().for_each(|s| put_trees(&mut w, s));
        }
    }
    w.buf
}

pub fn from_bytes(data: &[u8]) -> Result<TrainedModel> {
    let mut r = Reader::new(data);
    if r.take(4)? != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let algo = Algo::from_tag(r.u8()?)?;
    let mut spec = ClassifierSpec::new(algo, r.u64()?);
    for _ in 0..r.len()? {
        let k = r.str()?;
        spec.hyperparams.insert(k, r.f64()?);
    }
    let nf = r.len()?;
    let feature_names = (0..nf).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
    let mut class_order = SleepStage::ALL;
    for c in class_order.iter_mut() {
        *c = SleepStage::from_index(r.u8()? as usize)
            .ok_or_else(|| Error::Parse("bad class index".into()))?;
    }
    let imputer = MedianImputer { medians: r.f64s()? };
    if imputer.medians.len() != nf {
        return Err(Error::Parse(
            "imputer width differs from the feature count".into(),
        ));
    }
    let scaler = match r.u8()? {
        0 => None,
        _ => Some(Standardizer {
            means: r.f64s()?,
            scales: r.f64s()?,
        }),
    };
    let params = match algo {
        Algo::Knn => {
            let k = r.u32()? as usize;
            let n = r.len()?;
            let (mut x, mut y) = (Vec::with_capacity(n), Vec::with_capacity(n));
            for _ in 0..n {
                y.push(r.u8()? as usize);
                x.push(r.f64s()?);
            }
            ModelParams::Knn(KnnModel { k, x, y })
        }
        Algo::LogisticRegression => {
            let c = r.len()?;
            let weights = (0..c).map(|_| r.f64s()).collect::<Result<_>>()?;
            ModelParams::Logistic(LogisticModel {
                weights,
                bias: r.f64s()?,
            })
        }
        Algo::DecisionTree => ModelParams::Tree(get_tree(&mut r)?),
        Algo::RandomForest => {
            let oob_accuracy = r.f64()?;
            ModelParams::Forest(RandomForest {
                trees: get_trees(&mut r)?,
                oob_accuracy,
            })
        }
        Algo::Gbdt => {
            let init = r.f64s()?;
            let learning_rate = r.f64()?;
            let n = r.len()?;
            let stages = (0..n).map(|_| get_trees(&mut r)).collect::<Result<_>>()?;
            ModelParams::Gbdt(Gbdt {
                init,
                learning_rate,
                stages,
            })
        }
    };
    if !r.is_done() {
        return Err(Error::Parse("trailing bytes after model".into()));
    }
    Ok(TrainedModel {
        spec,
        feature_names,
        class_order,
        imputer,
        scaler,
        params,
    })
}

pub fn save_model(m: &TrainedModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(m))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    from_bytes(&std::fs::read(path)?)
}

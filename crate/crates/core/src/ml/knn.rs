//! k-nearest neighbours by Euclidean distance.

use super::{argmax, N_CLASSES};

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub k: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
}

impl KnnModel {
    pub fn fit(x: &[Vec<f64>], y: &[usize], k: usize) -> Self {
        Self {
            k,
            x: x.to_vec(),
            y: y.to_vec(),
        }
    }

    /// Training indices of the k nearest rows, nearest first; equal
    /// distances keep training order.
    pub fn neighbors(&self, row: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, t)| {
                (
                    t.iter()
                        .zip(row)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>(),
                    i,
                )
            })
            .collect();
        let k = self.k.min(d.len());
        if k < d.len() {
            d.select_nth_unstable_by(k, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.truncate(k);
        }
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.into_iter().map(|(_, i)| i).collect()
    }

    /// Vote fractions among the k neighbours.
    pub fn scores(&self, row: &[f64]) -> [f64; N_CLASSES] {
        let nb = self.neighbors(row);
        let mut s = [0.0; N_CLASSES];
        for &i in &nb {
            s[self.y[i]] += 1.0;
        }
        s.iter_mut().for_each(|v| *v /= nb.len() as f64);
        s
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        argmax(&self.scores(row))
    }
}

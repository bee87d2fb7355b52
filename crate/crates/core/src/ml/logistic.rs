//! Multinomial logistic regression by full-batch gradient descent.

use super::N_CLASSES;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    /// `weights[c][j]`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl LogisticModel {
    /// Minimises mean cross-entropy plus `l2/2 * |W|²` from a zero start.
    pub fn fit(x: &[Vec<f64>], y: &[usize], learning_rate: f64, epochs: usize, l2: f64) -> Self {
        let d = x.first().map_or(0, |r| r.len());
        let n = x.len() as f64;
        let mut m = LogisticModel {
            weights: vec![vec![0.0; d]; N_CLASSES],
            bias: vec![0.0; N_CLASSES],
        };
        for _ in 0..epochs {
            let mut gw = vec![vec![0.0; d]; N_CLASSES];
            let mut gb = vec![0.0; N_CLASSES];
            for (row, &t) in x.iter().zip(y) {
                let p = m.proba(row);
                for c in 0..N_CLASSES {
                    let e = p[c] - if c == t { 1.0 } else { 0.0 };
                    gb[c] += e;
                    for (g, v) in gw[c].iter_mut().zip(row) {
                        *g += e * v;
                    }
                }
            }
            for c in 0..N_CLASSES {
                m.bias[c] -= learning_rate * gb[c] / n;
                for j in 0..d {
                    m.weights[c][j] -= learning_rate * (gw[c][j] / n + l2 * m.weights[c][j]);
                }
            }
        }
        m
    }

    pub fn logits(&self, row: &[f64]) -> [f64; N_CLASSES] {
        let mut z = [0.0; N_CLASSES];
        for c in 0..N_CLASSES {
            z[c] = self.bias[c]
                + self.weights[c]
                    .iter()
                    .zip(row)
                    .map(|(w, v)| w * v)
                    .sum::<f64>();
        }
        z
    }

    pub fn proba(&self, row: &[f64]) -> [f64; N_CLASSES] {
        let p = softmax(&self.logits(row));
        [p[0], p[1], p[2], p[3]]
    }
}

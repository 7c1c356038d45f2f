use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-column affine map fitted on the training split.
///
/// Uses the population standard deviation. Columns whose spread is
/// numerically zero keep `std = 1`, so they are only centred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[f64], n_cols: usize) -> Result<Self> {
        if n_cols == 0 {
            return Ok(Standardizer {
                mean: Vec::new(),
                std: Vec::new(),
            });
        }
        if rows.is_empty() || rows.len() % n_cols != 0 {
            return Err(Error::Dimension(format!(
                "cannot fit standardizer on {} values with {n_cols} columns",
                rows.len()
            )));
        }
        let n = (rows.len() / n_cols) as f64;
        let mut mean = vec![0.0; n_cols];
        for row in rows.chunks_exact(n_cols) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);

        let mut var = vec![0.0; n_cols];
        for row in rows.chunks_exact(n_cols) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                let d = v - m;
                *s += d * d;
            }
        }
        let std = var
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n).sqrt();
                if sd <= 1e-12 * m.abs().max(1.0) {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn n_cols(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, rows: &[f64]) -> Vec<f64> {
        let d = self.n_cols();
        let mut out = rows.to_vec();
        if d == 0 {
            return out;
        }
        for row in out.chunks_exact_mut(d) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        out
    }

    pub fn inverse_transform(&self, rows: &[f64]) -> Vec<f64> {
        let d = self.n_cols();
        let mut out = rows.to_vec();
        if d == 0 {
            return out;
        }
        for row in out.chunks_exact_mut(d) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
        out
    }
}

/// Fits on `train` and applies the same map to every matrix in `others`.
pub fn standardize(
    train: &[f64],
    others: &[&[f64]],
    n_cols: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, Standardizer)> {
    let stats = Standardizer::fit(train, n_cols)?;
    let train_out = stats.transform(train);
    let others_out = others.iter().map(|m| stats.transform(m)).collect();
    Ok((train_out, others_out, stats))
}

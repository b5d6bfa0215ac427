use rayon::prelude::*;

use super::{CheckOptions, ValueTable};
use crate::abstraction::DiscreteDbn;
use crate::{Error, Result};

/// Explicit transition matrix `P(z̄ | z) = Π_j T_j(z̄_j | z_{Pa(j)})` over the
/// non-absorbing grid. Rows are substochastic; the deficit is the mass that
/// leaves the safe set.
pub struct DenseChecker {
    counts: Vec<usize>,
    size: usize,
    matrix: Vec<f64>,
}

impl DenseChecker {
    pub fn new(dbn: &DiscreteDbn, opts: &CheckOptions) -> Result<Self> {
        let counts = dbn.counts();
        let size_f: f64 = counts.iter().map(|&c| c as f64).product();
        if size_f * size_f > opts.max_dense_entries as f64 {
            return Err(Error::ResourceCap {
                what: "dense transition matrix".into(),
                required: size_f * size_f,
                cap: opts.max_dense_entries,
            });
        }
        let size = size_f as usize;
        let n = counts.len();
        let decode = |mut idx: usize| -> Vec<usize> {
            let mut z = vec![0; n];
            for k in (0..n).rev() {
                z[k] = idx % counts[k];
                idx /= counts[k];
            }
            z
        };
        let mut matrix = vec![0.0; size * size];
        matrix.par_chunks_mut(size).enumerate().for_each(|(r, row)| {
            let z = decode(r);
            let rows: Vec<&[f64]> = dbn
                .cpds()
                .iter()
                .map(|c| {
                    let pb: Vec<usize> = c.parents().iter().map(|&i| z[i]).collect();
                    c.row(c.row_index(&pb))
                })
                .collect();
            for (col, slot) in row.iter_mut().enumerate() {
                let zb = decode(col);
                *slot = rows.iter().zip(&zb).map(|(t, &k)| t[k]).product();
            }
        });
        Ok(DenseChecker { counts, size, matrix })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.matrix[r * self.size..(r + 1) * self.size]
    }

    pub fn step(&self, next: &ValueTable) -> Result<ValueTable> {
        if next.counts() != self.counts.as_slice() {
            return Err(Error::DimensionMismatch(
                "value table does not match the network grid".into(),
            ));
        }
        let v = next.values();
        let values: Vec<f64> = self
            .matrix
            .par_chunks(self.size)
            .map(|row| row.iter().zip(v).map(|(p, x)| p * x).sum())
            .collect();
        ValueTable::new(self.counts.clone(), values, next.time().saturating_sub(1))
    }
}

pub fn check_dense(dbn: &DiscreteDbn, horizon: usize, opts: &CheckOptions) -> Result<ValueTable> {
    let checker = DenseChecker::new(dbn, opts)?;
    let mut v = ValueTable::ones(dbn.counts(), horizon)?;
    for _ in 0..horizon {
        v = checker.step(&v)?;
    }
    Ok(v)
}

//! Finite-horizon probabilistic invariance on the abstraction, plus the
//! independent references it is validated against.

mod dense;
mod monte_carlo;
mod quadrature;
mod sum_product;
pub mod tensor;

pub use dense::{check_dense, DenseChecker};
pub use monte_carlo::{monte_carlo, McEstimate};
pub use quadrature::{QuadratureOptions, QuadratureReference};
pub use sum_product::{check_sum_product, SumProductEngine};

use serde::Serialize;

use crate::abstraction::DiscreteDbn;
use crate::bounds::ErrorReport;
use crate::partition::GridPartition;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub max_dense_entries: usize,
    pub max_intermediate_entries: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            max_dense_entries: 100_000_000,
            max_intermediate_entries: 100_000_000,
        }
    }
}

/// `V_k` over the grid `Π_i Z_i`, row-major with the last dimension fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    counts: Vec<usize>,
    values: Vec<f64>,
    time: usize,
}

impl ValueTable {
    pub fn new(counts: Vec<usize>, values: Vec<f64>, time: usize) -> Result<Self> {
        let len = counts
            .iter()
            .try_fold(1usize, |a, &c| a.checked_mul(c))
            .ok_or_else(|| Error::DimensionMismatch("grid too large".into()))?;
        if values.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a grid of {len} cells",
                values.len()
            )));
        }
        Ok(ValueTable { counts, values, time })
    }

    /// `V_N = 1` on the grid.
    pub fn ones(counts: Vec<usize>, time: usize) -> Result<Self> {
        let len = counts.iter().product();
        Self::new(counts, vec![1.0; len], time)
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn get(&self, cell: &[usize]) -> f64 {
        let idx = cell.iter().zip(&self.counts).fold(0, |acc, (&z, &c)| acc * c + z);
        self.values[idx]
    }

    pub fn max_abs_diff(&self, other: &ValueTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SumProduct,
    Dense,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone)]
pub struct InvarianceResult {
    pub values: ValueTable,
    pub partition: GridPartition,
    pub horizon: usize,
    pub error: Option<ErrorReport>,
    pub method: Method,
}

impl InvarianceResult {
    pub fn from_dbn(
        dbn: &DiscreteDbn,
        values: ValueTable,
        horizon: usize,
        error: Option<ErrorReport>,
        method: Method,
    ) -> Self {
        InvarianceResult {
            values,
            partition: dbn.partition().clone(),
            horizon,
            error,
            method,
        }
    }

    /// `V_0(ξ(s0))`: the abstract invariance probability of a concrete initial state.
    pub fn lookup(&self, s0: &[f64]) -> Result<f64> {
        Ok(self.values.values()[self.partition.flat_index(s0)?])
    }

    /// `Σ_z weight(z) V_0(z)` for a weighting of the initial cells.
    pub fn weighted(&self, weights: &[f64]) -> Result<f64> {
        if weights.len() != self.values.values().len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} cells",
                weights.len(),
                self.values.values().len()
            )));
        }
        if weights.iter().any(|&w| w.is_nan() || w < 0.0) {
            return Err(Error::InvalidParameter("initial weights must be non-negative".into()));
        }
        Ok(weights.iter().zip(self.values.values()).map(|(w, v)| w * v).sum())
    }
}

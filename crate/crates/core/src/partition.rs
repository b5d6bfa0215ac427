//! Per-dimension partitions of the projected safe set, the abstraction and
//! refinement maps, and grid sizing from an error budget.

use serde::Serialize;

use crate::bounds::LipschitzData;
use crate::model::SafeSet;
use crate::{Error, Result};

/// Cell of a one-dimensional partition: a bin index, or the absorbing outcome
/// for points outside the projected safe interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Bin(usize),
    Absorbed,
}

/// Partition of one interval `D_i` into consecutive bins `[e_k, e_{k+1})`,
/// the last one closed. Bin centers are the representative points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition1d {
    edges: Vec<f64>,
    reps: Vec<f64>,
    diameter: f64,
}

impl Partition1d {
    /// Equal-width bins over `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidParameter("a partition needs at least one bin".into()));
        }
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::InvalidParameter(format!("cannot partition [{lo}, {hi}]")));
        }
        let width = hi - lo;
        let mut edges: Vec<f64> = (0..=count).map(|k| lo + width * (k as f64 / count as f64)).collect();
        edges[count] = hi;
        Self::from_edges(edges)
    }

    /// Partition from explicit edges, which must be finite and strictly increasing.
    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::InvalidParameter("a partition needs at least two edges".into()));
        }
        if edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFinite("partition edges".into()));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "partition edges must be strictly increasing".into(),
            ));
        }
        let reps = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let diameter = edges.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        Ok(Partition1d { edges, reps, diameter })
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn representatives(&self) -> &[f64] {
        &self.reps
    }

    /// Largest bin width `δ_i`.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn lo(&self) -> f64 {
        self.edges[0]
    }

    pub fn hi(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    /// `ξ_i`: bin holding `s`, or [`Cell::Absorbed`] outside `[lo, hi]`.
    pub fn abstraction_map(&self, s: f64) -> Result<Cell> {
        if s.is_nan() {
            return Err(Error::NonFinite("abstraction map argument".into()));
        }
        if s < self.lo() || s > self.hi() {
            return Ok(Cell::Absorbed);
        }
        let k = self.edges.partition_point(|&e| e <= s);
        Ok(Cell::Bin((k - 1).min(self.len() - 1)))
    }

    /// `Ξ_i`: the closed interval of bin `j`.
    pub fn refinement_map(&self, j: usize) -> Result<(f64, f64)> {
        if j >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.len(),
            });
        }
        Ok((self.edges[j], self.edges[j + 1]))
    }
}

/// Product grid: one [`Partition1d`] per state dimension.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPartition {
    dims: Vec<Partition1d>,
}

impl GridPartition {
    pub fn new(dims: Vec<Partition1d>) -> Self {
        GridPartition { dims }
    }

    /// Uniform partitions of each projected interval of `safe`.
    pub fn uniform(safe: &SafeSet, counts: &[usize]) -> Result<Self> {
        if counts.len() != safe.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} bin counts for a {}-dimensional safe set",
                counts.len(),
                safe.dim()
            )));
        }
        let dims = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let (lo, hi) = project_safe_set(safe, i);
                Partition1d::uniform(lo, hi, c)
            })
            .collect::<Result<_>>()?;
        Ok(GridPartition { dims })
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn get(&self, i: usize) -> &Partition1d {
        &self.dims[i]
    }

    pub fn dims(&self) -> &[Partition1d] {
        &self.dims
    }

    pub fn counts(&self) -> Vec<usize> {
        self.dims.iter().map(Partition1d::len).collect()
    }

    pub fn diameters(&self) -> Vec<f64> {
        self.dims.iter().map(Partition1d::diameter).collect()
    }

    /// Number of grid cells `Π n_i`, saturating.
    pub fn cell_count(&self) -> usize {
        self.dims.iter().fold(1usize, |acc, d| acc.saturating_mul(d.len()))
    }

    /// Per-dimension cells of a continuous state.
    pub fn locate(&self, s: &[f64]) -> Result<Vec<Cell>> {
        if s.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state of length {} for a {}-dimensional grid",
                s.len(),
                self.dim()
            )));
        }
        self.dims.iter().zip(s).map(|(d, &x)| d.abstraction_map(x)).collect()
    }

    /// Row-major flat index of a state (last dimension fastest), or an error if
    /// any coordinate is absorbed.
    pub fn flat_index(&self, s: &[f64]) -> Result<usize> {
        let cells = self.locate(s)?;
        let mut idx = 0usize;
        for (i, c) in cells.iter().enumerate() {
            match c {
                Cell::Bin(k) => idx = idx * self.dims[i].len() + k,
                Cell::Absorbed => {
                    return Err(Error::OutsideSafeSet(format!(
                        "coordinate {i} = {} is outside [{}, {}]",
                        s[i],
                        self.dims[i].lo(),
                        self.dims[i].hi()
                    )))
                }
            }
        }
        Ok(idx)
    }
}

/// `D_i`: projection of the safe box on dimension `i`.
pub fn project_safe_set(safe: &SafeSet, i: usize) -> (f64, f64) {
    safe.project(i)
}

/// Smallest uniform-width bin counts whose grid term `N * Σ O_i δ_i` stays
/// within `eps`, with a common target width `h* = eps / (N Σ O_i)`.
///
/// Dimensions with zero out-weight, or a zero horizon, still get one bin.
pub fn size_from_budget(lip: &LipschitzData, safe: &SafeSet, horizon: usize, eps: f64) -> Result<Vec<usize>> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "error budget must be positive, got {eps}"
        )));
    }
    if lip.dim() != safe.dim() {
        return Err(Error::DimensionMismatch(
            "Lipschitz data and safe set dimensions differ".into(),
        ));
    }
    let n = safe.dim();
    let total_out: f64 = lip.out_weights().iter().sum();
    let nn = horizon as f64;
    if total_out == 0.0 || horizon == 0 {
        return Ok(vec![1; n]);
    }
    let h = eps / (nn * total_out);
    let mut counts: Vec<usize> = (0..n)
        .map(|i| {
            let c = (safe.width(i) / h).ceil();
            if !c.is_finite() || c > usize::MAX as f64 / 4.0 {
                Err(Error::ResourceCap {
                    what: format!("partition of dimension {i}"),
                    required: c,
                    cap: usize::MAX,
                })
            } else {
                Ok((c as usize).max(1))
            }
        })
        .collect::<Result<_>>()?;
    // guard the budget against rounding in the width computation
    loop {
        let term: f64 = (0..n)
            .map(|i| lip.out_weights()[i] * (safe.width(i) / counts[i] as f64))
            .sum::<f64>()
            * nn;
        if term <= eps {
            break;
        }
        for (i, c) in counts.iter_mut().enumerate() {
            if lip.out_weights()[i] > 0.0 {
                *c += 1;
            }
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn four_uniform_bins() {
        let p = Partition1d::uniform(-1.0, 1.0, 4).unwrap();
        assert_eq!(p.edges(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(p.representatives(), &[-0.75, -0.25, 0.25, 0.75]);
        assert_eq!(p.diameter(), 0.5);
    }

    #[test]
    fn single_bin() {
        let p = Partition1d::uniform(-1.0, 1.0, 1).unwrap();
        assert_eq!(p.representatives(), &[0.0]);
        assert_eq!(p.diameter(), 2.0);
        assert!(Partition1d::uniform(-1.0, 1.0, 0).is_err());
    }

    #[test]
    fn fine_partition_diameter() {
        let p = Partition1d::uniform(-1.0, 1.0, 8467).unwrap();
        assert!((p.diameter() - 2.0 / 8467.0).abs() < 1e-15);
        assert_eq!(p.len(), 8467);
    }

    #[test]
    fn projection() {
        let a = SafeSet::symmetric_box(4, 1.0).unwrap();
        assert_eq!(project_safe_set(&a, 2), (-1.0, 1.0));
        let b = SafeSet::new(vec![0.0, -2.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(project_safe_set(&b, 1), (-2.0, 2.0));
    }

    #[test]
    fn abstraction_map_conventions() {
        let p = Partition1d::from_edges(vec![-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(p.abstraction_map(-0.5).unwrap(), Cell::Bin(0));
        assert_eq!(p.abstraction_map(0.0).unwrap(), Cell::Bin(1));
        assert_eq!(p.abstraction_map(1.0).unwrap(), Cell::Bin(1));
        assert_eq!(p.abstraction_map(-1.0).unwrap(), Cell::Bin(0));
        assert_eq!(p.abstraction_map(1.5).unwrap(), Cell::Absorbed);
        assert_eq!(p.abstraction_map(-1.0 - 1e-12).unwrap(), Cell::Absorbed);
        assert!(p.abstraction_map(f64::NAN).is_err());
    }

    #[test]
    fn refinement_map_bounds() {
        let p = Partition1d::from_edges(vec![-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(p.refinement_map(0).unwrap(), (-1.0, 0.0));
        assert_eq!(p.refinement_map(1).unwrap(), (0.0, 1.0));
        assert!(matches!(
            p.refinement_map(2),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn flat_index_is_row_major() {
        let a = SafeSet::symmetric_box(2, 1.0).unwrap();
        let g = GridPartition::uniform(&a, &[2, 3]).unwrap();
        assert_eq!(g.flat_index(&[0.5, -0.9]).unwrap(), 3);
        assert_eq!(g.flat_index(&[-0.5, 0.9]).unwrap(), 2);
        assert!(matches!(g.flat_index(&[0.0, 1.2]), Err(Error::OutsideSafeSet(_))));
    }

    proptest! {
        #[test]
        fn round_trip(count in 1usize..200, lo in -5.0f64..5.0, width in 0.01f64..10.0, t in 0.0f64..=1.0) {
            let p = Partition1d::uniform(lo, lo + width, count).unwrap();
            let s = lo + t * width;
            let s = s.min(p.hi());
            match p.abstraction_map(s).unwrap() {
                Cell::Bin(j) => {
                    let (a, b) = p.refinement_map(j).unwrap();
                    prop_assert!(a <= s && s <= b);
                    prop_assert!(a <= p.representatives()[j] && p.representatives()[j] <= b);
                }
                Cell::Absorbed => prop_assert!(false, "point inside D_i was absorbed"),
            }
            let recomputed = p.edges().windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
            prop_assert_eq!(recomputed, p.diameter());
            prop_assert_eq!(p.lo(), lo);
            prop_assert_eq!(p.hi(), lo + width);
        }
    }
}

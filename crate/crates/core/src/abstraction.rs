//! Finite DBN abstraction: one conditional probability table per dimension,
//! with an absorbing outcome collecting the mass that leaves the projected
//! safe interval.

use rayon::prelude::*;

use crate::gaussian;
use crate::model::{ProcessModel, SafeSet};
use crate::partition::{Cell, GridPartition};
use crate::{Error, Result};

/// Default cap on stored table entries.
pub const DEFAULT_MAX_ENTRIES: usize = 100_000_000;

/// Absorbing mass more negative than this means the bin masses are broken.
const NEGATIVE_MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub max_entries: usize,
    pub parallel: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            max_entries: DEFAULT_MAX_ENTRIES,
            parallel: true,
        }
    }
}

/// Conditional table `T_j(X̄_j | Pa(X̄_j))`.
///
/// Stored dense and row-major: one row per instantiation of the parents by
/// bin index (parents in ascending dimension order, the last one fastest),
/// each row holding `n_j` bin probabilities followed by the absorbing one.
/// Rows where some parent is absorbed are implicit: all mass on the absorbing
/// outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpd {
    dim: usize,
    parents: Vec<usize>,
    parent_bins: Vec<usize>,
    child_bins: usize,
    table: Vec<f64>,
}

impl Cpd {
    pub fn from_parts(
        dim: usize,
        parents: Vec<usize>,
        parent_bins: Vec<usize>,
        child_bins: usize,
        table: Vec<f64>,
    ) -> Result<Self> {
        if parents.len() != parent_bins.len() {
            return Err(Error::DimensionMismatch(
                "parent list and parent bin counts differ".into(),
            ));
        }
        let rows = parent_bins.iter().product::<usize>();
        if table.len() != rows * (child_bins + 1) {
            return Err(Error::DimensionMismatch(format!(
                "table of dimension {dim} has {} entries, expected {}",
                table.len(),
                rows * (child_bins + 1)
            )));
        }
        Ok(Cpd {
            dim,
            parents,
            parent_bins,
            child_bins,
            table,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn parent_bins(&self) -> &[usize] {
        &self.parent_bins
    }

    pub fn child_bins(&self) -> usize {
        self.child_bins
    }

    /// Entries per row, including the absorbing outcome.
    pub fn row_len(&self) -> usize {
        self.child_bins + 1
    }

    pub fn rows(&self) -> usize {
        self.parent_bins.iter().product()
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let len = self.row_len();
        &self.table[r * len..(r + 1) * len]
    }

    /// Row index of a parent instantiation given as bin indices.
    pub fn row_index(&self, parent_bins: &[usize]) -> usize {
        parent_bins
            .iter()
            .zip(&self.parent_bins)
            .fold(0, |acc, (&b, &n)| acc * n + b)
    }

    /// `T_j(child | parents)` including the absorbing rules.
    pub fn prob(&self, parents: &[Cell], child: Cell) -> f64 {
        let mut bins = Vec::with_capacity(parents.len());
        for p in parents {
            match p {
                Cell::Bin(b) => bins.push(*b),
                Cell::Absorbed => return if child == Cell::Absorbed { 1.0 } else { 0.0 },
            }
        }
        let row = self.row(self.row_index(&bins));
        match child {
            Cell::Bin(k) => row[k],
            Cell::Absorbed => row[self.child_bins],
        }
    }

    /// Entries with a non-absorbing child and non-absorbing parents.
    pub fn marginals(&self) -> usize {
        self.rows() * self.child_bins
    }
}

/// The abstraction output: partitions plus one table per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDbn {
    parents: Vec<Vec<usize>>,
    partition: GridPartition,
    cpds: Vec<Cpd>,
}

impl DiscreteDbn {
    pub fn from_parts(partition: GridPartition, cpds: Vec<Cpd>) -> Result<Self> {
        let n = partition.dim();
        if cpds.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} tables for {n} dimensions",
                cpds.len()
            )));
        }
        let counts = partition.counts();
        for (j, c) in cpds.iter().enumerate() {
            if c.dim != j || c.child_bins != counts[j] {
                return Err(Error::DimensionMismatch(format!(
                    "table {j} does not match the partition"
                )));
            }
            if c.parents.windows(2).any(|w| w[0] >= w[1]) || c.parents.iter().any(|&p| p >= n) {
                return Err(Error::InvalidParameter(format!("table {j} has an invalid parent list")));
            }
            if c.parents.iter().zip(&c.parent_bins).any(|(&p, &b)| counts[p] != b) {
                return Err(Error::DimensionMismatch(format!(
                    "table {j} parent bins do not match the partition"
                )));
            }
        }
        Ok(DiscreteDbn {
            parents: cpds.iter().map(|c| c.parents.clone()).collect(),
            partition,
            cpds,
        })
    }

    pub fn dim(&self) -> usize {
        self.cpds.len()
    }

    pub fn parents(&self, j: usize) -> &[usize] {
        &self.parents[j]
    }

    pub fn parent_sets(&self) -> &[Vec<usize>] {
        &self.parents
    }

    pub fn partition(&self) -> &GridPartition {
        &self.partition
    }

    pub fn cpds(&self) -> &[Cpd] {
        &self.cpds
    }

    pub fn cpd(&self, j: usize) -> &Cpd {
        &self.cpds[j]
    }

    pub fn counts(&self) -> Vec<usize> {
        self.partition.counts()
    }

    /// `Σ_j (n_j + a) Π_{i ∈ Pa(j)} (n_i + a)` with `a = 1` when absorbing
    /// outcomes are counted.
    pub fn marginal_count(&self, include_absorbing: bool) -> u128 {
        let counts = self.counts();
        let extra = u128::from(include_absorbing);
        self.parents
            .iter()
            .enumerate()
            .map(|(j, ps)| {
                ps.iter()
                    .fold(counts[j] as u128 + extra, |acc, &i| acc * (counts[i] as u128 + extra))
            })
            .sum()
    }
}

/// Marginal count from parent sets and bin counts alone, in floating point so
/// it covers grids far too large to build.
pub fn marginal_count_for(parents: &[Vec<usize>], counts: &[f64], include_absorbing: bool) -> f64 {
    let extra = if include_absorbing { 1.0 } else { 0.0 };
    parents
        .iter()
        .enumerate()
        .map(|(j, ps)| ps.iter().fold(counts[j] + extra, |acc, &i| acc * (counts[i] + extra)))
        .sum()
}

/// Builds `T_j` by integrating kernel `j` over each child bin with the parents
/// fixed at their representative points.
pub fn build_cpd(model: &ProcessModel, partition: &GridPartition, j: usize, opts: BuildOptions) -> Result<Cpd> {
    let n = model.dim();
    if partition.dim() != n || j >= n {
        return Err(Error::DimensionMismatch("partition does not match the model".into()));
    }
    let parents = model.parents(j).to_vec();
    let parent_bins: Vec<usize> = parents.iter().map(|&i| partition.get(i).len()).collect();
    let child = partition.get(j);
    let child_bins = child.len();
    let rows = parent_bins
        .iter()
        .try_fold(1usize, |acc, &b| acc.checked_mul(b))
        .ok_or_else(|| cap_error(j, f64::INFINITY, opts.max_entries))?;
    let entries = rows
        .checked_mul(child_bins + 1)
        .ok_or_else(|| cap_error(j, f64::INFINITY, opts.max_entries))?;
    if entries > opts.max_entries {
        return Err(cap_error(j, entries as f64, opts.max_entries));
    }

    let edges = child.edges();
    let fill_row = |r: usize, row: &mut [f64]| -> Result<()> {
        let mut rem = r;
        let mut pv = vec![0.0; parents.len()];
        for k in (0..parents.len()).rev() {
            let b = parent_bins[k];
            pv[k] = partition.get(parents[k]).representatives()[rem % b];
            rem /= b;
        }
        let (bins, absorbed) = row.split_at_mut(child_bins);
        match model.gaussian_mean(j, &pv) {
            Some((mean, sd)) => {
                let mut prev = gaussian::tails(edges[0], mean, sd);
                for (k, slot) in bins.iter_mut().enumerate() {
                    let next = gaussian::tails(edges[k + 1], mean, sd);
                    *slot = gaussian::mass_from_tails(edges[k], edges[k + 1], mean, prev, next);
                    prev = next;
                }
            }
            None => {
                for (k, slot) in bins.iter_mut().enumerate() {
                    *slot = model.mass_with_parents(j, edges[k], edges[k + 1], &pv)?;
                }
            }
        }
        let inside: f64 = bins.iter().sum();
        let rest = 1.0 - inside;
        if rest < -NEGATIVE_MASS_TOLERANCE {
            return Err(Error::MassDefect(format!(
                "dimension {j} row {r}: bin masses sum to {inside}"
            )));
        }
        if rest < 0.0 {
            bins.iter_mut().for_each(|m| *m /= inside);
            absorbed[0] = 0.0;
        } else {
            absorbed[0] = rest.min(1.0);
        }
        Ok(())
    };

    let mut table = vec![0.0; entries];
    let len = child_bins + 1;
    if opts.parallel {
        table
            .par_chunks_mut(len)
            .enumerate()
            .try_for_each(|(r, row)| fill_row(r, row))?;
    } else {
        for (r, row) in table.chunks_mut(len).enumerate() {
            fill_row(r, row)?;
        }
    }
    Ok(Cpd {
        dim: j,
        parents,
        parent_bins,
        child_bins,
        table,
    })
}

fn cap_error(j: usize, required: f64, cap: usize) -> Error {
    Error::ResourceCap {
        what: format!("conditional table of dimension {j}"),
        required,
        cap,
    }
}

/// Partitions `safe` uniformly with `counts` bins per dimension and builds all tables.
pub fn build_dbn(model: &ProcessModel, safe: &SafeSet, counts: &[usize], opts: BuildOptions) -> Result<DiscreteDbn> {
    if model.dim() != safe.dim() {
        return Err(Error::DimensionMismatch("model and safe set dimensions differ".into()));
    }
    let partition = GridPartition::uniform(safe, counts)?;
    build_dbn_on(model, partition, opts)
}

pub fn build_dbn_on(model: &ProcessModel, partition: GridPartition, opts: BuildOptions) -> Result<DiscreteDbn> {
    let n = model.dim();
    let counts: Vec<f64> = partition.counts().iter().map(|&c| c as f64).collect();
    let total = marginal_count_for(model.parent_sets(), &counts, false)
        + (0..n)
            .map(|j| model.parents(j).iter().map(|&i| counts[i]).product::<f64>())
            .sum::<f64>();
    if total > opts.max_entries as f64 {
        return Err(Error::ResourceCap {
            what: "conditional tables".into(),
            required: total,
            cap: opts.max_entries,
        });
    }
    let cpds = if opts.parallel {
        (0..n)
            .into_par_iter()
            .map(|j| build_cpd(model, &partition, j, opts))
            .collect::<Result<Vec<_>>>()?
    } else {
        (0..n)
            .map(|j| build_cpd(model, &partition, j, opts))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(DiscreteDbn {
        parents: model.parent_sets().to_vec(),
        partition,
        cpds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SparseMatrix;
    use crate::partition::Partition1d;
    use proptest::prelude::*;

    fn lg(phi: Vec<Vec<f64>>, sigma: Vec<f64>) -> ProcessModel {
        ProcessModel::linear_gaussian(SparseMatrix::from_dense(&phi).unwrap(), sigma).unwrap()
    }

    #[test]
    fn single_bin_row() {
        let m = lg(vec![vec![0.0]], vec![0.2]);
        let a = SafeSet::symmetric_box(1, 1.0).unwrap();
        let dbn = build_dbn(&m, &a, &[1], BuildOptions::default()).unwrap();
        let row = dbn.cpd(0).row(0);
        assert!((row[0] - 0.999_999_426_696_856_3).abs() < 1e-14);
        assert!((row[1] - (1.0 - 0.999_999_426_696_856_3)).abs() < 1e-14);
        assert_eq!(dbn.marginal_count(false), 1);
    }

    #[test]
    fn absorbed_parent_rows() {
        let m = lg(vec![vec![1.0, 0.0], vec![1.0, 1.0]], vec![0.2, 0.2]);
        let a = SafeSet::symmetric_box(2, 1.0).unwrap();
        let dbn = build_dbn(&m, &a, &[3, 3], BuildOptions::default()).unwrap();
        let t = dbn.cpd(1);
        for k in 0..3 {
            assert_eq!(t.prob(&[Cell::Absorbed, Cell::Bin(1)], Cell::Bin(k)), 0.0);
        }
        assert_eq!(t.prob(&[Cell::Bin(0), Cell::Absorbed], Cell::Absorbed), 1.0);
    }

    #[test]
    fn two_bin_masses_match_quadrature() {
        let m = lg(vec![vec![1.0]], vec![0.2]);
        let a = SafeSet::symmetric_box(1, 1.0).unwrap();
        let dbn = build_dbn(&m, &a, &[2], BuildOptions::default()).unwrap();
        let row = dbn.cpd(0).row(1);
        // parent at 0.5; mass of [0, 1] under N(0.5, 0.2^2)
        assert!((row[1] - 0.987_580_669_348_447_7).abs() < 1e-14);
        let oracle =
            crate::integrate::adaptive_simpson(|x| crate::gaussian::pdf(x, 0.5, 0.2), 0.0, 1.0, 1e-13, 50).unwrap();
        assert!((row[1] - oracle).abs() < 1e-11);
    }

    #[test]
    fn zero_matrix_single_rows() {
        let m = lg(vec![vec![0.0; 3]; 3], vec![0.2; 3]);
        let a = SafeSet::symmetric_box(3, 1.0).unwrap();
        let dbn = build_dbn(&m, &a, &[1, 1, 1], BuildOptions::default()).unwrap();
        for c in dbn.cpds() {
            assert_eq!(c.rows(), 1);
        }
        assert_eq!(dbn.marginal_count(false), 3);
    }

    #[test]
    fn dense_table_shapes() {
        let m = lg(vec![vec![0.5, 0.1], vec![0.2, 0.5]], vec![0.3, 0.3]);
        let a = SafeSet::symmetric_box(2, 1.0).unwrap();
        let dbn = build_dbn(&m, &a, &[3, 4], BuildOptions::default()).unwrap();
        assert_eq!(dbn.cpd(0).table().len(), 3 * 4 * (3 + 1));
        assert_eq!(dbn.cpd(1).table().len(), 3 * 4 * (4 + 1));
        assert_eq!(dbn.marginal_count(false), (3 * 12 + 4 * 12) as u128);
        assert_eq!(dbn.marginal_count(true), (4 * 20 + 5 * 20) as u128);
    }

    #[test]
    fn table_one_marginal_counts() {
        let parents = vec![vec![0], vec![0, 1], vec![1, 2], vec![2, 3]];
        let m = 8469.0;
        let c = marginal_count_for(&parents, &[m; 4], false);
        assert!((c - (m * m + 3.0 * m * m * m)).abs() < 1.0);
        assert!((1.75e12..1.85e12).contains(&c));
        let one = marginal_count_for(&[vec![0]], &[1210.0], false);
        assert_eq!(one, 1_464_100.0);
    }

    #[test]
    fn cap_is_enforced() {
        let m = lg(vec![vec![1.0, 0.0], vec![1.0, 1.0]], vec![0.2, 0.2]);
        let a = SafeSet::symmetric_box(2, 1.0).unwrap();
        let opts = BuildOptions {
            max_entries: 1000,
            parallel: true,
        };
        let err = build_dbn(&m, &a, &[20, 20], opts).unwrap_err();
        assert!(err.is_resource_cap());
    }

    #[test]
    fn parallel_and_serial_are_identical() {
        let m = lg(vec![vec![0.9, 0.2], vec![-0.4, 0.7]], vec![0.25, 0.15]);
        let a = SafeSet::new(vec![-1.0, -0.5], vec![1.0, 1.5]).unwrap();
        let p = build_dbn(&m, &a, &[17, 11], BuildOptions::default()).unwrap();
        let s = build_dbn(
            &m,
            &a,
            &[17, 11],
            BuildOptions {
                parallel: false,
                ..Default::default()
            },
        )
        .unwrap();
        for (x, y) in p.cpds().iter().zip(s.cpds()) {
            assert!(x.table().iter().zip(y.table()).all(|(u, v)| u.to_bits() == v.to_bits()));
        }
    }

    #[test]
    fn symmetric_rows_are_palindromic() {
        let m = lg(vec![vec![0.0]], vec![0.3]);
        let a = SafeSet::symmetric_box(1, 1.0).unwrap();
        let dbn = build_dbn(&m, &a, &[9], BuildOptions::default()).unwrap();
        let row = dbn.cpd(0).row(0);
        for k in 0..9 {
            assert!((row[k] - row[8 - k]).abs() < 1e-12);
        }
    }

    #[test]
    fn merging_bins_adds_masses() {
        let m = lg(vec![vec![0.8]], vec![0.2]);
        let fine = GridPartition::new(vec![Partition1d::from_edges(vec![-1.0, -0.2, 0.1, 0.4, 1.0]).unwrap()]);
        let coarse = GridPartition::new(vec![Partition1d::from_edges(vec![-1.0, -0.2, 0.4, 1.0]).unwrap()]);
        let f = build_dbn_on(&m, fine, BuildOptions::default()).unwrap();
        let c = build_dbn_on(&m, coarse, BuildOptions::default()).unwrap();
        // parents differ only where the merged bin's representative moves, so compare row 0
        let fr = f.cpd(0).row(0);
        let cr = c.cpd(0).row(0);
        assert!((cr[1] - (fr[1] + fr[2])).abs() < 1e-12);
        assert!((cr[0] - fr[0]).abs() < 1e-12);
        assert!((cr[2] - fr[3]).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn rows_are_stochastic(
            a00 in -1.5f64..1.5, a10 in -1.5f64..1.5, a11 in -1.5f64..1.5,
            s0 in 0.05f64..1.0, s1 in 0.05f64..1.0,
            n0 in 1usize..12, n1 in 1usize..12,
        ) {
            let m = lg(vec![vec![a00, 0.0], vec![a10, a11]], vec![s0, s1]);
            let a = SafeSet::symmetric_box(2, 1.0).unwrap();
            let dbn = build_dbn(&m, &a, &[n0, n1], BuildOptions::default()).unwrap();
            for c in dbn.cpds() {
                for r in 0..c.rows() {
                    let row = c.row(r);
                    prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
                    prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}

//! Continuous Markov processes whose one-step density factorizes per dimension,
//! the safe box, and the two-layer dependency DAG of one time step.

use std::fmt;
use std::sync::Arc;

use crate::gaussian;
use crate::integrate::{adaptive_simpson, DEFAULT_MAX_DEPTH, DEFAULT_TOLERANCE};
use crate::{Error, Result};

/// Square sparse matrix stored as coordinate triplets, sorted by `(row, col)`,
/// with explicit zeros dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch(format!(
                    "triplet ({i}, {j}) outside a {n}x{n} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("matrix entry ({i}, {j})")));
            }
            entries.push((i, j, v));
        }
        entries.sort_by_key(|e| (e.0, e.1));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::InvalidParameter(format!(
                "duplicate triplet for entry ({}, {})",
                w[0].0, w[0].1
            )));
        }
        entries.retain(|e| e.2 != 0.0);
        Ok(SparseMatrix { n, entries })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has {} entries, expected {n}",
                r.len()
            )));
        }
        Self::from_triplets(
            n,
            rows.iter()
                .enumerate()
                .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &v)| (i, j, v))),
        )
    }

    pub fn zeros(n: usize) -> Self {
        SparseMatrix { n, entries: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n,
            entries: (0..n).map(|i| (i, i, 1.0)).collect(),
        }
    }

    /// Lower bidiagonal matrix with every non-zero entry equal to `value`.
    pub fn lower_bidiagonal(n: usize, value: f64) -> Self {
        let mut t = Vec::with_capacity(2 * n);
        for i in 0..n {
            if i > 0 {
                t.push((i, i - 1, value));
            }
            t.push((i, i, value));
        }
        Self::from_triplets(n, t).expect("bidiagonal pattern is well formed")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&(i, j)))
            .map(|k| self.entries[k].2)
            .unwrap_or(0.0)
    }

    /// Non-zero `(col, value)` pairs of row `i`, in column order.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let start = self.entries.partition_point(|e| e.0 < i);
        self.entries[start..]
            .iter()
            .take_while(move |e| e.0 == i)
            .map(|e| (e.1, e.2))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for &(i, j, v) in &self.entries {
            d[i][j] = v;
        }
        d
    }
}

/// A conditional density `t_j(x | parents)` for one dimension of a generic model.
pub trait ConditionalKernel: Send + Sync {
    /// State dimensions this density depends on.
    fn parents(&self) -> &[usize];

    /// Density value; `parent_values` follows the order of [`parents`](Self::parents).
    fn density(&self, x: f64, parent_values: &[f64]) -> f64;

    /// Interval carrying all but a negligible tail of the mass.
    fn support(&self, parent_values: &[f64]) -> (f64, f64);

    /// Inverse-CDF draw from a uniform variate in `(0, 1)`.
    fn sample(&self, parent_values: &[f64], u: f64) -> f64 {
        let (lo, hi) = self.support(parent_values);
        let mass = |b: f64| {
            adaptive_simpson(|x| self.density(x, parent_values), lo, b, 1e-12, DEFAULT_MAX_DEPTH).unwrap_or(f64::NAN)
        };
        let (mut a, mut b) = (lo, hi);
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if mass(m) < u {
                a = m;
            } else {
                b = m;
            }
            if b - a <= 1e-12 * (1.0 + m.abs()) {
                break;
            }
        }
        0.5 * (a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    LinearGaussian,
    GenericKernels,
}

#[derive(Clone)]
enum Dynamics {
    LinearGaussian {
        phi: SparseMatrix,
        sigma: Vec<f64>,
    },
    Generic {
        kernels: Vec<Arc<dyn ConditionalKernel>>,
        lipschitz: Vec<Vec<f64>>,
    },
}

/// A discrete-time Markov process on `R^n` whose transition density is the
/// product of one conditional density per dimension.
#[derive(Clone)]
pub struct ProcessModel {
    n: usize,
    dynamics: Dynamics,
    parents: Vec<Vec<usize>>,
}

impl fmt::Debug for ProcessModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("ProcessModel");
        d.field("n", &self.n).field("kind", &self.kind());
        if let Dynamics::LinearGaussian { phi, sigma } = &self.dynamics {
            d.field("phi", phi).field("sigma", sigma);
        }
        d.field("parents", &self.parents).finish()
    }
}

/// Values for some state dimensions, as `(dimension, value)` pairs.
pub type Assignment<'a> = &'a [(usize, f64)];

impl ProcessModel {
    /// `s(t+1) = phi * s(t) + diag(sigma) * w(t)` with i.i.d. standard normal `w`.
    pub fn linear_gaussian(phi: SparseMatrix, sigma: Vec<f64>) -> Result<Self> {
        let n = phi.dim();
        if n == 0 {
            return Err(Error::InvalidParameter("state dimension must be at least 1".into()));
        }
        if sigma.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "sigma has {} entries for a {n}-dimensional matrix",
                sigma.len()
            )));
        }
        for (i, &s) in sigma.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::NonFinite(format!("sigma[{i}]")));
            }
            if s <= 0.0 {
                return Err(Error::InvalidParameter(format!("sigma[{i}] = {s} must be positive")));
            }
        }
        let parents = (0..n).map(|j| phi.row(j).map(|(i, _)| i).collect()).collect();
        Ok(ProcessModel {
            n,
            dynamics: Dynamics::LinearGaussian { phi, sigma },
            parents,
        })
    }

    /// A model from opaque per-dimension kernels.
    ///
    /// `lipschitz[i][j]` bounds the sensitivity of kernel `j` to state `i`; it must
    /// be non-negative and zero exactly off the declared parent sets.
    /// Normalization of every kernel is checked to `1e-6` at each of
    /// `sample_states`.
    pub fn generic(
        kernels: Vec<Arc<dyn ConditionalKernel>>,
        lipschitz: Vec<Vec<f64>>,
        sample_states: &[Vec<f64>],
    ) -> Result<Self> {
        let n = kernels.len();
        if n == 0 {
            return Err(Error::InvalidParameter("state dimension must be at least 1".into()));
        }
        let mut parents = Vec::with_capacity(n);
        for (j, k) in kernels.iter().enumerate() {
            let p = k.parents().to_vec();
            if p.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParameter(format!(
                    "kernel {j} parents must be strictly increasing"
                )));
            }
            if let Some(&bad) = p.iter().find(|&&i| i >= n) {
                return Err(Error::DimensionMismatch(format!(
                    "kernel {j} parent {bad} out of range"
                )));
            }
            parents.push(p);
        }
        if lipschitz.len() != n || lipschitz.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("lipschitz matrix must be n x n".into()));
        }
        for (i, row) in lipschitz.iter().enumerate() {
            for (j, &d) in row.iter().enumerate() {
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::InvalidParameter(format!("lipschitz[{i}][{j}] = {d}")));
                }
                if (d > 0.0) != parents[j].contains(&i) {
                    return Err(Error::InvalidParameter(format!(
                        "lipschitz[{i}][{j}] must be positive iff {i} is a parent of {j}"
                    )));
                }
            }
        }
        let model = ProcessModel {
            n,
            dynamics: Dynamics::Generic { kernels, lipschitz },
            parents,
        };
        for s in sample_states {
            if s.len() != n {
                return Err(Error::DimensionMismatch("sample state length".into()));
            }
            for j in 0..n {
                let pv = model.parent_values(j, s);
                let (lo, hi) = model.support(j, &pv);
                let total = model.mass_with_parents(j, lo, hi, &pv)?;
                if (total - 1.0).abs() > 1e-6 {
                    return Err(Error::MassDefect(format!(
                        "kernel {j} integrates to {total} at state {s:?}"
                    )));
                }
            }
        }
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> ModelKind {
        match self.dynamics {
            Dynamics::LinearGaussian { .. } => ModelKind::LinearGaussian,
            Dynamics::Generic { .. } => ModelKind::GenericKernels,
        }
    }

    /// Declared parent dimensions of kernel `j`, ascending.
    pub fn parents(&self, j: usize) -> &[usize] {
        &self.parents[j]
    }

    pub fn parent_sets(&self) -> &[Vec<usize>] {
        &self.parents
    }

    pub fn phi(&self) -> Option<&SparseMatrix> {
        match &self.dynamics {
            Dynamics::LinearGaussian { phi, .. } => Some(phi),
            Dynamics::Generic { .. } => None,
        }
    }

    pub fn sigma(&self) -> Option<&[f64]> {
        match &self.dynamics {
            Dynamics::LinearGaussian { sigma, .. } => Some(sigma),
            Dynamics::Generic { .. } => None,
        }
    }

    pub(crate) fn declared_lipschitz(&self) -> Option<&[Vec<f64>]> {
        match &self.dynamics {
            Dynamics::Generic { lipschitz, .. } => Some(lipschitz),
            Dynamics::LinearGaussian { .. } => None,
        }
    }

    /// Picks the parent values of kernel `j` out of a full state vector.
    pub fn parent_values(&self, j: usize, state: &[f64]) -> Vec<f64> {
        self.parents[j].iter().map(|&i| state[i]).collect()
    }

    fn gather(&self, j: usize, assignment: Assignment<'_>) -> Result<Vec<f64>> {
        self.parents[j]
            .iter()
            .map(|&p| {
                let v = assignment
                    .iter()
                    .find(|(d, _)| *d == p)
                    .map(|&(_, v)| v)
                    .ok_or(Error::MissingParent { dim: j, parent: p })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite(format!("value of parent {p}")))
                }
            })
            .collect()
    }

    fn check_dim(&self, j: usize) -> Result<()> {
        if j >= self.n {
            return Err(Error::DimensionMismatch(format!(
                "dimension {j} of a {}-dimensional model",
                self.n
            )));
        }
        Ok(())
    }

    /// Mean of the Gaussian kernel `j`; `None` for generic models.
    pub(crate) fn gaussian_mean(&self, j: usize, parent_values: &[f64]) -> Option<(f64, f64)> {
        match &self.dynamics {
            Dynamics::LinearGaussian { phi, sigma } => {
                let mean = phi.row(j).zip(parent_values).map(|((_, a), &v)| a * v).sum();
                Some((mean, sigma[j]))
            }
            Dynamics::Generic { .. } => None,
        }
    }

    /// `t_j(x | parents)` evaluated against a partial assignment of the state.
    pub fn density_eval(&self, j: usize, x: f64, parents: Assignment<'_>) -> Result<f64> {
        self.check_dim(j)?;
        if x.is_nan() {
            return Err(Error::NonFinite("density argument".into()));
        }
        let pv = self.gather(j, parents)?;
        Ok(self.density_with_parents(j, x, &pv))
    }

    /// `t_j(x | parents)` with parent values ordered as [`parents`](Self::parents).
    pub fn density_with_parents(&self, j: usize, x: f64, parent_values: &[f64]) -> f64 {
        match &self.dynamics {
            Dynamics::LinearGaussian { .. } => {
                let (mean, sd) = self.gaussian_mean(j, parent_values).unwrap();
                if x.is_infinite() {
                    0.0
                } else {
                    gaussian::pdf(x, mean, sd)
                }
            }
            Dynamics::Generic { kernels, .. } => kernels[j].density(x, parent_values).max(0.0),
        }
    }

    /// `t_j(x | s)` for a full state vector `s`.
    pub fn density_at_state(&self, j: usize, x: f64, state: &[f64]) -> f64 {
        match &self.dynamics {
            Dynamics::LinearGaussian { phi, sigma } => {
                let mean: f64 = phi.row(j).map(|(i, a)| a * state[i]).sum();
                gaussian::pdf(x, mean, sigma[j])
            }
            Dynamics::Generic { kernels, .. } => kernels[j].density(x, &self.parent_values(j, state)).max(0.0),
        }
    }

    /// `P[s_j(t+1) in [a, b] | parents]` against a partial assignment.
    pub fn kernel_mass(&self, j: usize, a: f64, b: f64, parents: Assignment<'_>) -> Result<f64> {
        self.check_dim(j)?;
        if a.is_nan() || b.is_nan() {
            return Err(Error::NonFinite("interval endpoint".into()));
        }
        let pv = self.gather(j, parents)?;
        self.mass_with_parents(j, a, b, &pv)
    }

    pub fn mass_with_parents(&self, j: usize, a: f64, b: f64, parent_values: &[f64]) -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        match &self.dynamics {
            Dynamics::LinearGaussian { .. } => {
                let (mean, sd) = self.gaussian_mean(j, parent_values).unwrap();
                Ok(gaussian::interval_mass(a, b, mean, sd))
            }
            Dynamics::Generic { kernels, .. } => {
                let k = &kernels[j];
                let (slo, shi) = k.support(parent_values);
                let (lo, hi) = (a.max(slo), b.min(shi));
                if hi <= lo {
                    return Ok(0.0);
                }
                adaptive_simpson(
                    |x| k.density(x, parent_values),
                    lo,
                    hi,
                    DEFAULT_TOLERANCE,
                    DEFAULT_MAX_DEPTH,
                )
            }
        }
    }

    /// Interval holding essentially all of kernel `j`'s mass (±40 sd for Gaussians).
    pub fn support(&self, j: usize, parent_values: &[f64]) -> (f64, f64) {
        match &self.dynamics {
            Dynamics::LinearGaussian { .. } => {
                let (mean, sd) = self.gaussian_mean(j, parent_values).unwrap();
                (mean - 40.0 * sd, mean + 40.0 * sd)
            }
            Dynamics::Generic { kernels, .. } => kernels[j].support(parent_values),
        }
    }

    /// Draws `s_j(t+1)` given the current state. `normal` is a standard normal
    /// variate and `uniform` a uniform one in `(0, 1)`; Gaussian kernels use the
    /// former, generic kernels the latter.
    pub(crate) fn draw(&self, j: usize, state: &[f64], normal: f64, uniform: f64) -> f64 {
        match &self.dynamics {
            Dynamics::LinearGaussian { phi, sigma } => {
                let mean: f64 = phi.row(j).map(|(i, a)| a * state[i]).sum();
                mean + sigma[j] * normal
            }
            Dynamics::Generic { kernels, .. } => kernels[j].sample(&self.parent_values(j, state), uniform),
        }
    }

    pub fn dependency_dag(&self) -> DependencyDag {
        let mut arcs: Vec<(usize, usize)> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(j, ps)| ps.iter().map(move |&i| (i, j)))
            .collect();
        arcs.sort_by_key(|&(i, j)| (j, i));
        DependencyDag { n: self.n, arcs }
    }
}

/// Axis-aligned safe set `A = [lo_1, hi_1] x ... x [lo_n, hi_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SafeSet {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl SafeSet {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "safe set bounds have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(Error::NonFinite(format!("safe set bound {i}")));
            }
            if l >= h {
                return Err(Error::InvalidParameter(format!("safe interval {i} is [{l}, {h}]")));
            }
        }
        Ok(SafeSet { lo, hi })
    }

    /// `[-alpha, alpha]^n`.
    pub fn symmetric_box(n: usize, alpha: f64) -> Result<Self> {
        Self::new(vec![-alpha; n], vec![alpha; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// Projection of the box on dimension `i`.
    pub fn project(&self, i: usize) -> (f64, f64) {
        (self.lo[i], self.hi[i])
    }

    /// Length `L(D_i)` of the projected interval.
    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).product()
    }

    pub fn contains(&self, s: &[f64]) -> bool {
        s.len() == self.dim()
            && s.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&x, (&l, &h))| x >= l && x <= h)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }
}

/// Arcs `(i, j)` of the two-layer network: current `X_i` feeds next `X̄_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyDag {
    n: usize,
    arcs: Vec<(usize, usize)>,
}

impl DependencyDag {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Arcs sorted by `(j, i)`.
    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.arcs.binary_search_by_key(&(j, i), |&(a, b)| (b, a)).is_ok()
    }

    pub fn parents(&self, j: usize) -> Vec<usize> {
        self.arcs.iter().filter(|a| a.1 == j).map(|a| a.0).collect()
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        self.arcs.iter().filter(|a| a.0 == i).map(|a| a.1).collect()
    }
}

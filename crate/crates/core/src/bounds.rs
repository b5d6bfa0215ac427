//! Lipschitz data of the dependency DAG and the abstraction error bounds built
//! from it, plus the explicit-grid (AKLP) baseline bound and matrix-norm
//! utilities used to compare the two.

use serde::Serialize;

use crate::gaussian::sqrt_two_pi_e;
use crate::model::{ModelKind, ProcessModel, SafeSet};
use crate::{Error, Result};

/// Arc weights of the dependency DAG.
///
/// `d[i][j]` bounds how fast kernel `j` changes with state `i`;
/// `w[i][j] = d[i][j] * L(D_j)`; `O_i` and `I_j` are row and column sums of
/// `w`; `κ = Σ_j I_j` is the Lipschitz constant of every value function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzData {
    d: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
    out_weights: Vec<f64>,
    in_weights: Vec<f64>,
    kappa: f64,
}

impl LipschitzData {
    pub fn new(d: Vec<Vec<f64>>, safe: &SafeSet) -> Result<Self> {
        let n = safe.dim();
        if d.len() != n || d.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(format!("Lipschitz matrix must be {n}x{n}")));
        }
        if d.iter().flatten().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(Error::InvalidParameter(
                "Lipschitz constants must be finite and non-negative".into(),
            ));
        }
        let w: Vec<Vec<f64>> = d
            .iter()
            .map(|row| row.iter().enumerate().map(|(j, &x)| x * safe.width(j)).collect())
            .collect();
        let out_weights: Vec<f64> = w.iter().map(|r| r.iter().sum()).collect();
        let in_weights: Vec<f64> = (0..n).map(|j| w.iter().map(|r| r[j]).sum()).collect();
        let kappa = in_weights.iter().sum();
        Ok(LipschitzData {
            d,
            w,
            out_weights,
            in_weights,
            kappa,
        })
    }

    /// Lipschitz data of a model over a safe box: closed form for linear
    /// Gaussian models, declared constants otherwise.
    pub fn for_model(model: &ProcessModel, safe: &SafeSet) -> Result<Self> {
        if model.dim() != safe.dim() {
            return Err(Error::DimensionMismatch("model and safe set dimensions differ".into()));
        }
        let d = match model.kind() {
            ModelKind::LinearGaussian => lipschitz_linear_gaussian(model)?,
            ModelKind::GenericKernels => model.declared_lipschitz().unwrap().to_vec(),
        };
        Self::new(d, safe)
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn d(&self) -> &[Vec<f64>] {
        &self.d
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.w
    }

    pub fn out_weights(&self) -> &[f64] {
        &self.out_weights
    }

    pub fn in_weights(&self) -> &[f64] {
        &self.in_weights
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

/// `d[i][j] = |a_ji| / (σ_j² √(2πe))`, the sup of the derivative of a Gaussian
/// density with respect to one of its mean's inputs.
pub fn lipschitz_linear_gaussian(model: &ProcessModel) -> Result<Vec<Vec<f64>>> {
    let (phi, sigma) = match (model.phi(), model.sigma()) {
        (Some(p), Some(s)) => (p, s),
        _ => {
            return Err(Error::InvalidParameter(
                "closed-form Lipschitz constants need a linear Gaussian model".into(),
            ))
        }
    };
    let n = model.dim();
    let c = sqrt_two_pi_e();
    let mut d = vec![vec![0.0; n]; n];
    for &(j, i, a) in phi.entries() {
        d[i][j] = a.abs() / (sigma[j] * sigma[j] * c);
    }
    Ok(d)
}

/// Inputs of the safe-set replacement term `M · N · L(A Δ Ā)`. Both are zero
/// for box safe sets, where the grid covers `A` exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SetTerm {
    /// Supremum of the transition density over `A Δ Ā`.
    pub sup_density: f64,
    /// Lebesgue measure of `A Δ Ā`.
    pub symmetric_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub set_term: f64,
    /// `N Σ_i O_i δ_i`.
    pub grid_term: f64,
    /// `N κ δ` with `δ = √(Σ δ_i²)`.
    pub global_grid_term: f64,
    pub total: f64,
    pub per_dimension: Vec<f64>,
}

/// Dimension-dependent abstraction error `M N L(AΔĀ) + N Σ_i O_i δ_i`.
pub fn dbn_error(lip: &LipschitzData, horizon: usize, deltas: &[f64], set: SetTerm) -> Result<ErrorReport> {
    if deltas.len() != lip.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} diameters for {} dimensions",
            deltas.len(),
            lip.dim()
        )));
    }
    if deltas.iter().any(|&d| !d.is_finite() || d < 0.0) {
        return Err(Error::InvalidParameter(
            "partition diameters must be non-negative".into(),
        ));
    }
    if set.sup_density.is_nan()
        || set.sup_density < 0.0
        || set.symmetric_difference.is_nan()
        || set.symmetric_difference < 0.0
    {
        return Err(Error::InvalidParameter("set-term inputs must be non-negative".into()));
    }
    let nn = horizon as f64;
    let set_term = if set.symmetric_difference == 0.0 {
        0.0
    } else {
        set.sup_density * nn * set.symmetric_difference
    };
    let per_dimension: Vec<f64> = lip.out_weights().iter().zip(deltas).map(|(o, d)| nn * o * d).collect();
    let grid_term = per_dimension.iter().sum();
    let delta = deltas.iter().map(|d| d * d).sum::<f64>().sqrt();
    Ok(ErrorReport {
        set_term,
        grid_term,
        global_grid_term: nn * lip.kappa() * delta,
        total: set_term + grid_term,
        per_dimension,
    })
}

/// Coefficient `c` of the explicit-grid bound `c · δ`, where `δ` is the
/// Euclidean diameter of a grid cell:
/// `N e^{-1/2} / ((2π)^{n/2} σ_1⋯σ_n) · ‖Σ^{-1/2} Φ‖₂ · L(A)`.
pub fn aklp_coefficient(model: &ProcessModel, safe: &SafeSet, horizon: usize) -> Result<f64> {
    let (phi, sigma) = match (model.phi(), model.sigma()) {
        (Some(p), Some(s)) => (p, s),
        _ => {
            return Err(Error::InvalidParameter(
                "the explicit-grid bound needs a linear Gaussian model".into(),
            ))
        }
    };
    let n = model.dim();
    if safe.dim() != n {
        return Err(Error::DimensionMismatch("model and safe set dimensions differ".into()));
    }
    let mut scaled = phi.to_dense();
    for (row, s) in scaled.iter_mut().zip(sigma) {
        row.iter_mut().for_each(|a| *a /= s);
    }
    let two_norm = induced_two_norm(&scaled)?;
    let sigma_prod: f64 = sigma.iter().product();
    let gauss = (2.0 * std::f64::consts::PI).powf(n as f64 / 2.0);
    Ok(horizon as f64 * (-0.5f64).exp() / (gauss * sigma_prod) * two_norm * safe.volume())
}

/// Explicit-grid abstraction error for cells of Euclidean diameter `delta`.
pub fn aklp_error(model: &ProcessModel, safe: &SafeSet, horizon: usize, delta: f64, set: SetTerm) -> Result<f64> {
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::InvalidParameter("cell diameter must be non-negative".into()));
    }
    let set_term = if set.symmetric_difference == 0.0 {
        0.0
    } else {
        set.sup_density * horizon as f64 * set.symmetric_difference
    };
    Ok(set_term + aklp_coefficient(model, safe, horizon)? * delta)
}

/// Bins per dimension of the uniform hypercube grid meeting `eps` under the
/// explicit-grid bound.
pub fn aklp_bins(model: &ProcessModel, safe: &SafeSet, horizon: usize, eps: f64) -> Result<Vec<usize>> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "error budget must be positive, got {eps}"
        )));
    }
    let n = model.dim();
    let coef = aklp_coefficient(model, safe, horizon)?;
    if coef == 0.0 {
        return Ok(vec![1; n]);
    }
    let h = eps / coef / (n as f64).sqrt();
    Ok((0..n).map(|i| ((safe.width(i) / h).ceil() as usize).max(1)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AklpCosts {
    /// Transition-matrix entries, `m^{2n}`.
    pub marginals: f64,
    /// `2 N m^{2n}`: one multiply and one add per entry per step.
    pub operations: f64,
}

pub fn aklp_costs(bins_per_dim: f64, n: usize, horizon: usize) -> AklpCosts {
    let marginals = bins_per_dim.powi(2 * n as i32);
    AklpCosts {
        marginals,
        operations: 2.0 * horizon as f64 * marginals,
    }
}

const POWER_TOLERANCE: f64 = 1e-10;
const POWER_MAX_ITERATIONS: usize = 100_000;

/// Largest singular value by power iteration on `AᵀA`, started from the
/// all-ones vector.
pub fn induced_two_norm(a: &[Vec<f64>]) -> Result<f64> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    if a.iter().any(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch("ragged matrix".into()));
    }
    let max_col = (0..cols)
        .map(|j| (0..rows).map(|i| a[i][j] * a[i][j]).sum::<f64>())
        .enumerate()
        .fold((0, 0.0), |best, (j, s)| if s > best.1 { (j, s) } else { best });
    if max_col.1 == 0.0 {
        return Ok(0.0);
    }
    let run = |start: Vec<f64>| -> Result<f64> {
        let mut x = start;
        let mut prev = 0.0;
        for _ in 0..POWER_MAX_ITERATIONS {
            let ax: Vec<f64> = a.iter().map(|r| r.iter().zip(&x).map(|(p, q)| p * q).sum()).collect();
            let mut y = vec![0.0; cols];
            for (r, v) in a.iter().zip(&ax) {
                for (yj, aij) in y.iter_mut().zip(r) {
                    *yj += aij * v;
                }
            }
            let xx: f64 = x.iter().map(|v| v * v).sum();
            let lambda = y.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() / xx;
            let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if ny == 0.0 {
                return Ok(0.0);
            }
            x = y.into_iter().map(|v| v / ny).collect();
            if (lambda - prev).abs() <= POWER_TOLERANCE * lambda.abs() {
                return Ok(lambda.max(0.0).sqrt());
            }
            prev = lambda;
        }
        Err(Error::PowerIteration(POWER_MAX_ITERATIONS))
    };
    let norm = run(vec![1.0; cols])?;
    // the ones vector can be orthogonal to the top singular vector; the largest
    // column norm is a lower bound that exposes this
    if norm * norm < max_col.1 * (1.0 - 1e-9) {
        let mut e = vec![0.0; cols];
        e[max_col.0] = 1.0;
        return run(e);
    }
    Ok(norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormBounds {
    /// `Σ |a_ij|`.
    pub entrywise_one_norm: f64,
    pub induced_two_norm: f64,
    pub frobenius_norm: f64,
    /// `n ‖Φ‖₂ ≤ ‖Φ‖₁`.
    pub lower_holds: bool,
    /// `‖Φ‖₁ ≤ n √n ‖Φ‖₂`.
    pub upper_holds: bool,
    /// Both of the above.
    pub equivalence_holds: bool,
    /// `max over a_ij ≠ 0 of √(r_i c_j)` with absolute row and column sums.
    pub sparsity_bound: f64,
}

pub fn norm_bounds(phi: &[Vec<f64>]) -> Result<NormBounds> {
    let n = phi.len();
    if phi.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch("norm bounds need a square matrix".into()));
    }
    let one: f64 = phi.iter().flatten().map(|a| a.abs()).sum();
    let fro = phi.iter().flatten().map(|a| a * a).sum::<f64>().sqrt();
    let two = induced_two_norm(phi)?;
    let row: Vec<f64> = phi.iter().map(|r| r.iter().map(|a| a.abs()).sum()).collect();
    let col: Vec<f64> = (0..n).map(|j| phi.iter().map(|r| r[j].abs()).sum()).collect();
    let mut sparsity: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if phi[i][j] != 0.0 {
                sparsity = sparsity.max((row[i] * col[j]).sqrt());
            }
        }
    }
    let nf = n as f64;
    // relative slack absorbs the power iteration's tolerance
    let slack = 1e-9;
    let lower_holds = nf * two <= one * (1.0 + slack);
    let upper_holds = one <= nf * nf.sqrt() * two * (1.0 + slack);
    Ok(NormBounds {
        entrywise_one_norm: one,
        induced_two_norm: two,
        frobenius_norm: fro,
        lower_holds,
        upper_holds,
        equivalence_holds: lower_holds && upper_holds,
        sparsity_bound: sparsity,
    })
}

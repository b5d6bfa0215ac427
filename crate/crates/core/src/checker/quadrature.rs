//! Continuous reference solution of the invariance recursion
//! `W_k(s) = 1_A(s) ∫_A W_{k+1}(s̄) t(s̄ | s) ds̄` for one- and two-dimensional
//! models, by trapezoidal Nyström iteration with Richardson extrapolation
//! between successive grid doublings.

use rayon::prelude::*;

use crate::model::{ProcessModel, SafeSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    /// Nodes per dimension on the coarsest grid.
    pub initial_points: usize,
    /// Largest nodes per dimension tried before giving up.
    pub max_points: usize,
    /// Required agreement of successive extrapolated answers.
    pub tolerance: f64,
}

impl QuadratureOptions {
    pub fn for_dim(n: usize) -> Self {
        QuadratureOptions {
            initial_points: 101,
            max_points: if n == 1 { 6401 } else { 401 },
            tolerance: 1e-6,
        }
    }
}

/// Kernel tensors above this many entries are recomputed every iteration.
const CACHE_ENTRIES: usize = 70_000_000;
/// Cap on `G^4` work per iteration for fully coupled two-dimensional kernels.
const COUPLED_WORK: f64 = 5e10;

#[derive(Debug, Clone)]
struct Level {
    nodes: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    /// `tables[k]` holds `W_k` on the node grid, last dimension fastest.
    tables: Vec<Vec<f64>>,
}

fn trapezoid(lo: f64, hi: f64, g: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (hi - lo) / (g - 1) as f64;
    let nodes: Vec<f64> = (0..g)
        .map(|p| {
            if p + 1 == g {
                hi
            } else {
                lo + (hi - lo) * (p as f64 / (g - 1) as f64)
            }
        })
        .collect();
    let mut w = vec![h; g];
    w[0] *= 0.5;
    w[g - 1] *= 0.5;
    (nodes, w)
}

fn build_level(model: &ProcessModel, safe: &SafeSet, horizon: usize, g: usize) -> Result<Level> {
    let n = model.dim();
    let (nodes, weights): (Vec<Vec<f64>>, Vec<Vec<f64>>) =
        (0..n).map(|i| trapezoid(safe.lo()[i], safe.hi()[i], g)).unzip();
    let cells = g.pow(n as u32);
    let mut tables = vec![vec![1.0; cells]];
    match n {
        1 => {
            let (x, w) = (&nodes[0], &weights[0]);
            let cached: Option<Vec<f64>> = (g * g <= CACHE_ENTRIES).then(|| {
                let mut k = vec![0.0; g * g];
                k.par_chunks_mut(g).enumerate().for_each(|(p, row)| {
                    for q in 0..g {
                        row[q] = w[q] * model.density_at_state(0, x[q], &[x[p]]);
                    }
                });
                k
            });
            for _ in 0..horizon {
                let next = tables.last().unwrap();
                let cur: Vec<f64> = (0..g)
                    .into_par_iter()
                    .map(|p| match &cached {
                        Some(k) => k[p * g..(p + 1) * g].iter().zip(next).map(|(a, b)| a * b).sum(),
                        None => (0..g)
                            .map(|q| w[q] * model.density_at_state(0, x[q], &[x[p]]) * next[q])
                            .sum(),
                    })
                    .collect();
                tables.push(cur);
            }
        }
        2 => {
            let first = if model.parents(0).iter().all(|&i| i == 0) {
                0
            } else if model.parents(1).iter().all(|&i| i == 1) {
                1
            } else {
                let work = (g as f64).powi(4) * horizon as f64;
                if work > COUPLED_WORK {
                    return Err(Error::ResourceCap {
                        what: "coupled two-dimensional quadrature".into(),
                        required: work,
                        cap: COUPLED_WORK as usize,
                    });
                }
                for _ in 0..horizon {
                    let next = tables.last().unwrap().clone();
                    tables.push(coupled_step(model, &nodes, &weights, &next));
                }
                tables.reverse();
                return Ok(Level { nodes, weights, tables });
            };
            for _ in 0..horizon {
                let next = tables.last().unwrap().clone();
                tables.push(separable_step(model, &nodes, &weights, &next, first));
            }
        }
        _ => {
            return Err(Error::InvalidParameter(format!(
                "quadrature reference supports n <= 2, got n = {n}"
            )))
        }
    }
    tables.reverse();
    Ok(Level { nodes, weights, tables })
}

/// Index into a `g x g` table stored with dimension 1 fastest.
#[inline]
fn at(g: usize, i0: usize, i1: usize) -> usize {
    i0 * g + i1
}

/// One backward step when kernel `first` depends only on its own coordinate:
/// integrate that coordinate out first, then the other.
fn separable_step(
    model: &ProcessModel,
    nodes: &[Vec<f64>],
    weights: &[Vec<f64>],
    next: &[f64],
    first: usize,
) -> Vec<f64> {
    let g = nodes[0].len();
    let second = 1 - first;
    let state = |a: f64, b: f64| -> [f64; 2] {
        let mut s = [0.0; 2];
        s[first] = a;
        s[second] = b;
        s
    };
    // F[x_first][q_second] = Σ_{q_first} w t_first(y | x_first) W[q]
    let kf: Vec<f64> = (0..g * g)
        .into_par_iter()
        .map(|e| {
            let (p, q) = (e / g, e % g);
            weights[first][q] * model.density_at_state(first, nodes[first][q], &state(nodes[first][p], 0.0))
        })
        .collect();
    let mut f = vec![0.0; g * g];
    f.par_chunks_mut(g).enumerate().for_each(|(p, row)| {
        for (q2, slot) in row.iter_mut().enumerate() {
            *slot = (0..g)
                .map(|q1| {
                    let w_idx = if first == 0 { at(g, q1, q2) } else { at(g, q2, q1) };
                    kf[p * g + q1] * next[w_idx]
                })
                .sum();
        }
    });
    // W'[x] = Σ_{q_second} w t_second(y | x) F[x_first][q_second]
    let mut out = vec![0.0; g * g];
    out.par_chunks_mut(g).enumerate().for_each(|(i0, row)| {
        let mut k = vec![0.0; g];
        for (i1, slot) in row.iter_mut().enumerate() {
            let x = [nodes[0][i0], nodes[1][i1]];
            let pf = if first == 0 { i0 } else { i1 };
            for (q, kq) in k.iter_mut().enumerate() {
                *kq = weights[second][q] * model.density_at_state(second, nodes[second][q], &x);
            }
            *slot = k.iter().zip(&f[pf * g..(pf + 1) * g]).map(|(a, b)| a * b).sum();
        }
    });
    out
}

fn coupled_step(model: &ProcessModel, nodes: &[Vec<f64>], weights: &[Vec<f64>], next: &[f64]) -> Vec<f64> {
    let g = nodes[0].len();
    let mut out = vec![0.0; g * g];
    out.par_chunks_mut(g).enumerate().for_each(|(i0, row)| {
        for (i1, slot) in row.iter_mut().enumerate() {
            let x = [nodes[0][i0], nodes[1][i1]];
            *slot = nystrom_2d(model, nodes, weights, next, &x);
        }
    });
    out
}

fn nystrom_2d(model: &ProcessModel, nodes: &[Vec<f64>], weights: &[Vec<f64>], table: &[f64], s: &[f64]) -> f64 {
    let g = nodes[0].len();
    let k0: Vec<f64> = (0..g)
        .map(|q| weights[0][q] * model.density_at_state(0, nodes[0][q], s))
        .collect();
    let k1: Vec<f64> = (0..g)
        .map(|q| weights[1][q] * model.density_at_state(1, nodes[1][q], s))
        .collect();
    (0..g)
        .map(|q0| {
            k0[q0]
                * table[q0 * g..(q0 + 1) * g]
                    .iter()
                    .zip(&k1)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
        })
        .sum()
}

impl Level {
    fn points(&self) -> usize {
        self.nodes[0].len()
    }

    fn value_at(&self, model: &ProcessModel, k: usize, s: &[f64]) -> f64 {
        let next = &self.tables[k + 1];
        match s.len() {
            1 => (0..self.points())
                .map(|q| self.weights[0][q] * model.density_at_state(0, self.nodes[0][q], s) * next[q])
                .sum(),
            _ => nystrom_2d(model, &self.nodes, &self.weights, next, s),
        }
    }
}

/// Value functions `W_0 … W_N` of the continuous problem, queryable anywhere
/// in the safe set.
#[derive(Debug, Clone)]
pub struct QuadratureReference {
    model: ProcessModel,
    safe: SafeSet,
    horizon: usize,
    coarse: Level,
    fine: Level,
    /// Largest change of the extrapolated probe answers at the last doubling.
    pub last_change: f64,
}

impl QuadratureReference {
    pub fn build(model: &ProcessModel, safe: &SafeSet, horizon: usize, opts: QuadratureOptions) -> Result<Self> {
        let n = model.dim();
        if n > 2 {
            return Err(Error::InvalidParameter(format!(
                "quadrature reference supports n <= 2, got n = {n}"
            )));
        }
        if safe.dim() != n {
            return Err(Error::DimensionMismatch("model and safe set dimensions differ".into()));
        }
        if opts.initial_points < 101 {
            return Err(Error::InvalidParameter(
                "quadrature needs at least 101 points per dimension".into(),
            ));
        }
        let probes = probe_points(safe);
        let mut g = opts.initial_points;
        let mut coarse = build_level(model, safe, horizon, g)?;
        let mut previous: Option<Vec<f64>> = None;
        loop {
            let next_g = (g - 1) * 2 + 1;
            if next_g > opts.max_points {
                return Err(Error::Quadrature(format!(
                    "no convergence to {:.1e} with {g} points per dimension",
                    opts.tolerance
                )));
            }
            let fine = build_level(model, safe, horizon, next_g)?;
            let mut candidate = QuadratureReference {
                model: model.clone(),
                safe: safe.clone(),
                horizon,
                coarse,
                fine,
                last_change: f64::INFINITY,
            };
            let answers: Vec<f64> = probes.iter().map(|p| candidate.value_at(0, p)).collect();
            if let Some(prev) = &previous {
                let change = answers.iter().zip(prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                candidate.last_change = change;
                if change < opts.tolerance || horizon == 0 {
                    return Ok(candidate);
                }
            }
            previous = Some(answers);
            coarse = candidate.fine;
            g = next_g;
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Nodes per dimension of the finest grid used.
    pub fn points(&self) -> usize {
        self.fine.points()
    }

    /// `W_k(s)`; zero outside the safe set.
    pub fn value_at(&self, k: usize, s: &[f64]) -> f64 {
        assert!(k <= self.horizon, "time index {k} beyond horizon {}", self.horizon);
        if !self.safe.contains(s) {
            return 0.0;
        }
        if k == self.horizon {
            return 1.0;
        }
        let f = self.fine.value_at(&self.model, k, s);
        let c = self.coarse.value_at(&self.model, k, s);
        (4.0 * f - c) / 3.0
    }

    /// Invariance probability `W_0(s)`.
    pub fn value(&self, s: &[f64]) -> f64 {
        self.value_at(0, s)
    }
}

fn probe_points(safe: &SafeSet) -> Vec<Vec<f64>> {
    let n = safe.dim();
    let at = |t: f64| -> Vec<f64> { (0..n).map(|i| safe.lo()[i] + t * safe.width(i)).collect() };
    vec![at(0.5), at(0.2), at(0.85)]
}

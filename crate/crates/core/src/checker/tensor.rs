//! Dense strided tables over factor-graph variables and the contraction kernel
//! used by the sum-product executor.

use rayon::prelude::*;

use crate::factor_graph::Var;

/// A borrowed or owned dense table with explicit strides. Variables are in
/// canonical order; strides need not be contiguous (transition tables skip
/// their absorbing column).
#[derive(Debug, Clone)]
pub struct View<'a> {
    pub vars: Vec<Var>,
    pub dims: Vec<usize>,
    pub strides: Vec<usize>,
    pub data: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub vars: Vec<Var>,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

pub(crate) fn row_major_strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

impl Table {
    pub fn view(&self) -> View<'_> {
        View {
            vars: self.vars.clone(),
            dims: self.dims.clone(),
            strides: row_major_strides(&self.dims),
            data: &self.data,
        }
    }
}

/// Entries of the output processed by one parallel task.
const CHUNK: usize = 1 << 12;

/// `out[r] = Σ_e Π_k operand_k[r, e]` over the output variables `out_vars`
/// (with sizes `out_dims`) and the summed variables `sum_vars`.
pub fn contract(
    operands: &[View<'_>],
    out_vars: &[Var],
    out_dims: &[usize],
    sum_vars: &[Var],
    sum_dims: &[usize],
) -> Table {
    let locate = |op: &View<'_>, vars: &[Var]| -> Vec<usize> {
        vars.iter()
            .map(|v| op.vars.iter().position(|w| w == v).map_or(0, |k| op.strides[k]))
            .collect()
    };
    let out_strides: Vec<Vec<usize>> = operands.iter().map(|op| locate(op, out_vars)).collect();
    let sum_strides: Vec<Vec<usize>> = operands.iter().map(|op| locate(op, sum_vars)).collect();
    let total: usize = out_dims.iter().product();
    let mut data = vec![0.0; total];

    // The innermost summed variable is handled as a strided dot product.
    let (inner_dim, inner_strides): (usize, Vec<usize>) = match sum_dims.last() {
        Some(&d) => (d, sum_strides.iter().map(|s| *s.last().unwrap()).collect()),
        None => (1, vec![0; operands.len()]),
    };
    let outer_sum_dims: Vec<usize> = sum_dims
        .iter()
        .take(sum_dims.len().saturating_sub(1))
        .copied()
        .collect();
    let outer_sum_count: usize = outer_sum_dims.iter().product();

    data.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let start = c * CHUNK;
        let mut idx = vec![0usize; out_dims.len()];
        let mut rem = start;
        for k in (0..out_dims.len()).rev() {
            idx[k] = rem % out_dims[k];
            rem /= out_dims[k];
        }
        let mut base: Vec<usize> = out_strides
            .iter()
            .map(|s| s.iter().zip(&idx).map(|(a, b)| a * b).sum())
            .collect();
        let mut sidx = vec![0usize; outer_sum_dims.len()];
        let mut offs = vec![0usize; operands.len()];
        for slot in chunk.iter_mut() {
            let mut acc = 0.0;
            sidx.iter_mut().for_each(|x| *x = 0);
            offs.copy_from_slice(&base);
            for _ in 0..outer_sum_count {
                for e in 0..inner_dim {
                    let mut p = 1.0;
                    for (k, op) in operands.iter().enumerate() {
                        p *= op.data[offs[k] + e * inner_strides[k]];
                    }
                    acc += p;
                }
                // advance the outer summation odometer
                for d in (0..sidx.len()).rev() {
                    sidx[d] += 1;
                    for (k, s) in sum_strides.iter().enumerate() {
                        offs[k] += s[d];
                    }
                    if sidx[d] < outer_sum_dims[d] {
                        break;
                    }
                    for (k, s) in sum_strides.iter().enumerate() {
                        offs[k] -= s[d] * outer_sum_dims[d];
                    }
                    sidx[d] = 0;
                }
            }
            *slot = acc;
            // advance the output odometer
            for d in (0..idx.len()).rev() {
                idx[d] += 1;
                for (k, s) in out_strides.iter().enumerate() {
                    base[k] += s[d];
                }
                if idx[d] < out_dims[d] {
                    break;
                }
                for (k, s) in out_strides.iter().enumerate() {
                    base[k] -= s[d] * out_dims[d];
                }
                idx[d] = 0;
            }
        }
    });
    Table {
        vars: out_vars.to_vec(),
        dims: out_dims.to_vec(),
        data,
    }
}

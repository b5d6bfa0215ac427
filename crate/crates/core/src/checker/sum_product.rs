use super::tensor::{contract, Table, View};
use super::{CheckOptions, ValueTable};
use crate::abstraction::DiscreteDbn;
use crate::factor_graph::{compile_plan, greedy_ordering, EliminationPlan, FactorGraph, Var};
use crate::{Error, Result};

/// Bellman iteration through a compiled elimination plan. Transition tables
/// are read in place, skipping their absorbing column.
pub struct SumProductEngine<'a> {
    dbn: &'a DiscreteDbn,
    plan: EliminationPlan,
}

impl<'a> SumProductEngine<'a> {
    /// Engine using the greedy ordering of the network's factor graph.
    pub fn new(dbn: &'a DiscreteDbn, opts: &CheckOptions) -> Result<Self> {
        let fg = FactorGraph::from_dbn(dbn);
        let plan = compile_plan(&fg, &greedy_ordering(&fg), &dbn.counts())?;
        Self::with_plan(dbn, plan, opts)
    }

    pub fn with_plan(dbn: &'a DiscreteDbn, plan: EliminationPlan, opts: &CheckOptions) -> Result<Self> {
        if plan.bins != dbn.counts() {
            return Err(Error::DimensionMismatch(
                "plan bin counts differ from the network".into(),
            ));
        }
        for s in &plan.steps {
            for &j in &s.cluster {
                if j >= dbn.dim() {
                    return Err(Error::DimensionMismatch(format!(
                        "plan refers to missing table T{}",
                        j + 1
                    )));
                }
            }
        }
        if plan.peak_memory > opts.max_intermediate_entries as f64 {
            return Err(Error::ResourceCap {
                what: "sum-product intermediates".into(),
                required: plan.peak_memory,
                cap: opts.max_intermediate_entries,
            });
        }
        Ok(SumProductEngine { dbn, plan })
    }

    pub fn plan(&self) -> &EliminationPlan {
        &self.plan
    }

    fn transition_view(&self, j: usize) -> View<'a> {
        let cpd = self.dbn.cpd(j);
        let mut vars: Vec<Var> = cpd.parents().iter().map(|&i| Var::Current(i)).collect();
        vars.push(Var::Next(j));
        let mut dims = cpd.parent_bins().to_vec();
        dims.push(cpd.child_bins());
        let mut strides = vec![0; dims.len()];
        let mut s = cpd.row_len();
        strides[dims.len() - 1] = 1;
        for k in (0..dims.len() - 1).rev() {
            strides[k] = s;
            s *= dims[k];
        }
        View {
            vars,
            dims,
            strides,
            data: cpd.table(),
        }
    }

    /// `V_k` from `V_{k+1}`.
    pub fn step(&self, next: &ValueTable) -> Result<ValueTable> {
        let counts = self.dbn.counts();
        if next.counts() != counts.as_slice() {
            return Err(Error::DimensionMismatch(
                "value table does not match the network grid".into(),
            ));
        }
        let n = counts.len();
        let dim_of = |v: &Var| counts[v.index()];
        let mut current = Table {
            vars: (0..n).map(Var::Next).collect(),
            dims: counts.clone(),
            data: next.values().to_vec(),
        };
        for step in &self.plan.steps {
            let mut operands = vec![current.view()];
            operands.extend(step.cluster.iter().map(|&j| self.transition_view(j)));
            let sum_vars: Vec<Var> = step.eliminated.iter().map(|&j| Var::Next(j)).collect();
            let sum_dims: Vec<usize> = sum_vars.iter().map(dim_of).collect();
            let out_dims: Vec<usize> = step.scope.iter().map(dim_of).collect();
            current = contract(&operands, &step.scope, &out_dims, &sum_vars, &sum_dims);
        }
        // Indicator of the grid: broadcast over current-state variables the
        // intermediates never picked up.
        let final_vars: Vec<Var> = (0..n).map(Var::Current).collect();
        let values = if current.vars == final_vars {
            current.data
        } else {
            contract(&[current.view()], &final_vars, &counts, &[], &[]).data
        };
        ValueTable::new(counts, values, next.time().saturating_sub(1))
    }
}

/// `V_0` over every initial cell after `horizon` iterations from `V_N = 1`.
pub fn check_sum_product(dbn: &DiscreteDbn, horizon: usize, opts: &CheckOptions) -> Result<ValueTable> {
    let engine = SumProductEngine::new(dbn, opts)?;
    let mut v = ValueTable::ones(dbn.counts(), horizon)?;
    for _ in 0..horizon {
        v = engine.step(&v)?;
    }
    Ok(v)
}

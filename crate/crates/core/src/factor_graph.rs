//! Factor graph of the Bellman summand
//! `g(z, z̄) = 1_{Z_a}(z) V_{k+1}(z̄) Π_j T_j(z̄_j | z_{Pa(j)})`,
//! the greedy clustering/stretching order over it, and compiled elimination
//! plans with operation and memory predictions.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::{Error, Result};

/// Variable node: `z_i` (current state) or `z̄_i` (next state).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Var {
    Current(usize),
    Next(usize),
}

impl Var {
    pub fn index(self) -> usize {
        match self {
            Var::Current(i) | Var::Next(i) => i,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Current(i) => write!(f, "z{}", i + 1),
            Var::Next(i) => write!(f, "z̄{}", i + 1),
        }
    }
}

/// Function node: a transition table `T_j`, the next value function, or the
/// safe-set indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Func {
    Transition(usize),
    NextValue,
    Indicator,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorGraph {
    n: usize,
    parents: Vec<BTreeSet<usize>>,
    arcs: Vec<(Func, Var)>,
}

impl FactorGraph {
    /// Graph for a network with the given per-dimension parent sets.
    pub fn new(parents: &[Vec<usize>]) -> Result<Self> {
        let n = parents.len();
        if n == 0 {
            return Err(Error::InvalidParameter(
                "factor graph needs at least one dimension".into(),
            ));
        }
        let parents: Vec<BTreeSet<usize>> = parents.iter().map(|p| p.iter().copied().collect()).collect();
        if parents.iter().flatten().any(|&i| i >= n) {
            return Err(Error::DimensionMismatch("parent index out of range".into()));
        }
        let mut arcs = Vec::new();
        for (j, ps) in parents.iter().enumerate() {
            arcs.extend(ps.iter().map(|&i| (Func::Transition(j), Var::Current(i))));
            arcs.push((Func::Transition(j), Var::Next(j)));
        }
        arcs.extend((0..n).map(|i| (Func::NextValue, Var::Next(i))));
        arcs.extend((0..n).map(|i| (Func::Indicator, Var::Current(i))));
        arcs.sort();
        Ok(FactorGraph { n, parents, arcs })
    }

    pub fn from_dbn(dbn: &crate::abstraction::DiscreteDbn) -> Self {
        Self::new(dbn.parent_sets()).expect("network parent sets are valid")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn variables(&self) -> Vec<Var> {
        (0..self.n)
            .map(Var::Current)
            .chain((0..self.n).map(Var::Next))
            .collect()
    }

    pub fn functions(&self) -> Vec<Func> {
        (0..self.n)
            .map(Func::Transition)
            .chain([Func::NextValue, Func::Indicator])
            .collect()
    }

    /// All arcs, sorted.
    pub fn arcs(&self) -> &[(Func, Var)] {
        &self.arcs
    }

    pub fn neighbors(&self, f: Func) -> Vec<Var> {
        self.arcs.iter().filter(|a| a.0 == f).map(|a| a.1).collect()
    }

    /// Current-state variables feeding `T_j`.
    pub fn transition_parents(&self, j: usize) -> &BTreeSet<usize> {
        &self.parents[j]
    }
}

/// Variable and function orders, outermost sum first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Ordering {
    /// Clusters of transition tables (`e_f`).
    pub functions: Vec<Vec<usize>>,
    /// Next-state variables summed together with each cluster (`κ_f`).
    pub variables: Vec<Vec<usize>>,
}

/// Greedy clustering/stretching order.
///
/// Each round computes, for every live cluster, its live current-state
/// neighbours `Pa_f` and next-state neighbours `Ch_f`, merges clusters with
/// equal `Pa_f`, and takes the cluster with fewest `Pa_f` (ties: smallest
/// member index) as the next innermost sum. Its `Pa_f` variables leave the
/// live set and become stretched arguments of later intermediates.
pub fn greedy_ordering(fg: &FactorGraph) -> Ordering {
    let n = fg.dim();
    let mut live_current: BTreeSet<usize> = (0..n).collect();
    let mut live_next: BTreeSet<usize> = (0..n).collect();
    let mut clusters: Vec<BTreeSet<usize>> = (0..n).map(|j| BTreeSet::from([j])).collect();
    let mut functions = Vec::new();
    let mut variables = Vec::new();

    // Runs until every table is placed; a round whose clusters all have
    // empty Pa_f leaves the live current-state set unchanged.
    while !clusters.is_empty() {
        let pa_f = |c: &BTreeSet<usize>| -> BTreeSet<usize> {
            c.iter()
                .flat_map(|&j| fg.transition_parents(j).iter().copied())
                .filter(|i| live_current.contains(i))
                .collect()
        };
        let mut merged: Vec<(BTreeSet<usize>, BTreeSet<usize>)> = Vec::new();
        for c in clusters.drain(..) {
            let p = pa_f(&c);
            match merged.iter_mut().find(|(q, _)| *q == p) {
                Some((_, members)) => members.extend(c),
                None => merged.push((p, c)),
            }
        }
        let pick = merged
            .iter()
            .enumerate()
            .min_by_key(|(_, (p, members))| (p.len(), *members.iter().next().unwrap()))
            .map(|(k, _)| k)
            .unwrap();
        let (pa, members) = merged.swap_remove(pick);
        let children: Vec<usize> = members.iter().copied().filter(|j| live_next.contains(j)).collect();
        for i in &pa {
            live_current.remove(i);
        }
        for j in &children {
            live_next.remove(j);
        }
        functions.insert(0, members.iter().copied().collect());
        variables.insert(0, children);
        clusters = merged.into_iter().map(|(_, m)| m).collect();
        clusters.sort_by_key(|c| *c.iter().next().unwrap());
    }
    Ordering { functions, variables }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanStep {
    /// Transition tables multiplied in this step.
    pub cluster: Vec<usize>,
    /// Next-state variables summed out.
    pub eliminated: Vec<usize>,
    /// Arguments of the intermediate produced, in canonical order.
    pub scope: Vec<Var>,
    pub table_size: f64,
    /// `2 · table_size · Π bins(eliminated)`.
    pub operations: f64,
}

/// Contraction schedule for one Bellman iteration, innermost step first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EliminationPlan {
    pub bins: Vec<usize>,
    pub steps: Vec<PlanStep>,
    /// Current-state variables the indicator adds to the last intermediate.
    pub broadcast: Vec<usize>,
    pub final_scope: Vec<Var>,
    pub operations_per_iteration: f64,
    /// Largest `input + output` intermediate size over all steps.
    pub peak_memory: f64,
    /// Non-absorbing table entries of the network.
    pub marginals: f64,
}

fn scope_size(scope: &BTreeSet<Var>, bins: &[f64]) -> f64 {
    scope.iter().map(|v| bins[v.index()]).product()
}

/// Compiles `ordering` into a step list. The next value function is the
/// innermost operand; clusters run from innermost (last listed) to outermost.
pub fn compile_plan(fg: &FactorGraph, ordering: &Ordering, bins: &[usize]) -> Result<EliminationPlan> {
    let binsf: Vec<f64> = bins.iter().map(|&b| b as f64).collect();
    compile_plan_f64(fg, ordering, &binsf).map(|mut p| {
        p.bins = bins.to_vec();
        p
    })
}

/// As [`compile_plan`] with real-valued bin counts, for cost predictions at
/// sizes that do not fit in memory.
pub fn compile_plan_f64(fg: &FactorGraph, ordering: &Ordering, bins: &[f64]) -> Result<EliminationPlan> {
    let n = fg.dim();
    if bins.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} bin counts for {n} dimensions",
            bins.len()
        )));
    }
    if ordering.functions.len() != ordering.variables.len() {
        return Err(Error::Ordering("function and variable orders differ in length".into()));
    }
    let mut used_t = vec![false; n];
    let mut used_v = vec![false; n];
    let mut scope: BTreeSet<Var> = (0..n).map(Var::Next).collect();
    let mut steps = Vec::with_capacity(ordering.functions.len());
    let mut peak = 0.0f64;
    let mut in_size = scope_size(&scope, bins);

    for (cluster, group) in ordering.functions.iter().zip(&ordering.variables).rev() {
        for &j in cluster {
            if j >= n || std::mem::replace(&mut used_t[j], true) {
                return Err(Error::Ordering(format!("table T{} missing or used twice", j + 1)));
            }
            scope.extend(fg.transition_parents(j).iter().map(|&i| Var::Current(i)));
            if !scope.contains(&Var::Next(j)) {
                return Err(Error::Ordering(format!(
                    "z̄{} summed before T{} is applied",
                    j + 1,
                    j + 1
                )));
            }
        }
        let mut eliminated_domain = 1.0;
        for &j in group {
            if j >= n || std::mem::replace(&mut used_v[j], true) {
                return Err(Error::Ordering(format!("variable z̄{} missing or summed twice", j + 1)));
            }
            if !cluster.contains(&j) {
                return Err(Error::Ordering(format!(
                    "z̄{} is summed without its table T{}",
                    j + 1,
                    j + 1
                )));
            }
            scope.remove(&Var::Next(j));
            eliminated_domain *= bins[j];
        }
        let size = scope_size(&scope, bins);
        peak = peak.max(in_size + size);
        in_size = size;
        steps.push(PlanStep {
            cluster: cluster.clone(),
            eliminated: group.clone(),
            scope: scope.iter().copied().collect(),
            table_size: size,
            operations: 2.0 * size * eliminated_domain,
        });
    }
    if let Some(j) = used_t.iter().position(|u| !u) {
        return Err(Error::Ordering(format!("table T{} never applied", j + 1)));
    }
    if let Some(j) = used_v.iter().position(|u| !u) {
        return Err(Error::Ordering(format!("variable z̄{} never summed", j + 1)));
    }
    let broadcast: Vec<usize> = (0..n).filter(|&i| !scope.contains(&Var::Current(i))).collect();
    scope.extend((0..n).map(Var::Current));
    let final_size = scope_size(&scope, bins);
    if !broadcast.is_empty() {
        peak = peak.max(in_size + final_size);
    }
    let parents: Vec<Vec<usize>> = (0..n)
        .map(|j| fg.transition_parents(j).iter().copied().collect())
        .collect();
    Ok(EliminationPlan {
        bins: bins.iter().map(|&b| b as usize).collect(),
        operations_per_iteration: steps.iter().map(|s| s.operations).sum(),
        steps,
        broadcast,
        final_scope: scope.into_iter().collect(),
        peak_memory: peak,
        marginals: crate::abstraction::marginal_count_for(&parents, bins, false),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanCost {
    pub operations: f64,
    pub peak_memory: f64,
    pub marginals: f64,
}

/// Costs of `horizon` Bellman iterations. The indicator restriction is free
/// for box safe sets and is not counted.
pub fn plan_cost(plan: &EliminationPlan, horizon: usize) -> PlanCost {
    PlanCost {
        operations: plan.operations_per_iteration * horizon as f64,
        peak_memory: plan.peak_memory,
        marginals: plan.marginals,
    }
}

fn join<T: fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for EliminationPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, s) in self.steps.iter().enumerate() {
            writeln!(
                f,
                "step {:>2}  cluster {{{}}}  sum {{{}}}  scope ({})  size {:.3e}  ops {:.3e}",
                k + 1,
                join(s.cluster.iter().map(|j| format!("T{}", j + 1))),
                join(s.eliminated.iter().map(|&j| Var::Next(j))),
                join(s.scope.iter()),
                s.table_size,
                s.operations,
            )?;
        }
        if !self.broadcast.is_empty() {
            writeln!(
                f,
                "indicator broadcasts over {{{}}}",
                join(self.broadcast.iter().map(|&i| Var::Current(i)))
            )?;
        }
        write!(
            f,
            "total ops/iteration {:.3e}  peak intermediate entries {:.3e}",
            self.operations_per_iteration, self.peak_memory
        )
    }
}

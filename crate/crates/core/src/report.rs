//! Cost comparison between the factored abstraction and the explicit
//! hypercube grid, and the serializable reports behind the CLI.

use std::fmt::Write as _;

use serde::Serialize;

use crate::abstraction::marginal_count_for;
use crate::bounds::{aklp_bins, aklp_costs, ErrorReport, LipschitzData};
use crate::checker::McEstimate;
use crate::factor_graph::{compile_plan_f64, greedy_ordering, plan_cost, EliminationPlan, FactorGraph};
use crate::model::{ProcessModel, SafeSet, SparseMatrix};
use crate::partition::size_from_budget;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MethodCost {
    pub bins_per_dim: f64,
    pub marginals: f64,
    pub operations: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostRow {
    pub n: usize,
    pub dbn: MethodCost,
    pub aklp: MethodCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareConfig {
    pub family: &'static str,
    pub alpha: f64,
    pub sigma: f64,
    pub horizon: usize,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub config: CompareConfig,
    pub rows: Vec<CostRow>,
}

/// `Φ` lower bidiagonal with unit entries, `σ` on every dimension, safe set
/// `[-α, α]^n`.
pub fn bidiagonal_instance(n: usize, alpha: f64, sigma: f64) -> Result<(ProcessModel, SafeSet)> {
    let model = ProcessModel::linear_gaussian(SparseMatrix::lower_bidiagonal(n, 1.0), vec![sigma; n])?;
    Ok((model, SafeSet::symmetric_box(n, alpha)?))
}

/// Predicted costs of both methods on one model at error budget `eps`.
pub fn method_costs(
    model: &ProcessModel,
    safe: &SafeSet,
    horizon: usize,
    eps: f64,
) -> Result<(MethodCost, MethodCost)> {
    let n = model.dim();
    let counts = size_from_budget(&LipschitzData::for_model(model, safe)?, safe, horizon, eps)?;
    let countsf: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let fg = FactorGraph::new(model.parent_sets())?;
    let plan = compile_plan_f64(&fg, &greedy_ordering(&fg), &countsf)?;
    let cost = plan_cost(&plan, horizon);
    let dbn = MethodCost {
        bins_per_dim: countsf.iter().copied().fold(0.0, f64::max),
        marginals: marginal_count_for(model.parent_sets(), &countsf, false),
        operations: cost.operations,
    };
    let m = aklp_bins(model, safe, horizon, eps)?.into_iter().max().unwrap_or(1) as f64;
    let a = aklp_costs(m, n, horizon);
    let aklp = MethodCost {
        bins_per_dim: m,
        marginals: a.marginals,
        operations: a.operations,
    };
    Ok((dbn, aklp))
}

pub fn compare_bidiagonal(
    ns: impl IntoIterator<Item = usize>,
    alpha: f64,
    sigma: f64,
    horizon: usize,
    eps: f64,
) -> Result<CostReport> {
    let rows = ns
        .into_iter()
        .map(|n| {
            if n == 0 {
                return Err(Error::InvalidParameter("dimension must be at least 1".into()));
            }
            let (model, safe) = bidiagonal_instance(n, alpha, sigma)?;
            let (dbn, aklp) = method_costs(&model, &safe, horizon, eps)?;
            Ok(CostRow { n, dbn, aklp })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CostReport {
        config: CompareConfig {
            family: "bidiagonal",
            alpha,
            sigma,
            horizon,
            epsilon: eps,
        },
        rows,
    })
}

/// Two significant digits, as in the published tables: `8.5e3`.
pub fn sci2(x: f64) -> String {
    format!("{x:.1e}")
}

type Pick = fn(&CostRow) -> MethodCost;
type Quantity = fn(&MethodCost) -> f64;

impl CostReport {
    /// One column per dimension, one row per method and quantity.
    pub fn text_table(&self) -> String {
        let mut cells: Vec<Vec<String>> = Vec::new();
        let mut head = vec!["".to_string(), "n".to_string()];
        head.extend(self.rows.iter().map(|r| r.n.to_string()));
        cells.push(head);
        let methods: [(&str, Pick); 2] = [("AKLP", |r| r.aklp), ("DBN", |r| r.dbn)];
        for (name, pick) in methods {
            let quantities: [(&str, Quantity); 3] = [
                ("# bins/dim", |c| c.bins_per_dim),
                ("# marginals", |c| c.marginals),
                ("# operations", |c| c.operations),
            ];
            for (label, q) in quantities {
                let mut line = vec![name.to_string(), label.to_string()];
                line.extend(self.rows.iter().map(|r| sci2(q(&pick(r)))));
                cells.push(line);
            }
        }
        let widths: Vec<usize> = (0..cells[0].len())
            .map(|c| cells.iter().map(|row| row[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &cells {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, &w))| if c < 2 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanStats {
    pub marginals: f64,
    pub operations_per_iteration: f64,
    pub operations: f64,
    pub peak_memory: f64,
    pub steps: usize,
}

impl PlanStats {
    pub fn new(plan: &EliminationPlan, horizon: usize) -> Self {
        let c = plan_cost(plan, horizon);
        PlanStats {
            marginals: c.marginals,
            operations_per_iteration: plan.operations_per_iteration,
            operations: c.operations,
            peak_memory: c.peak_memory,
            steps: plan.steps.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub abstraction_seconds: f64,
    pub check_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub n: usize,
    pub horizon: usize,
    pub bins_per_dim: Vec<usize>,
    pub method: crate::checker::Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<Vec<f64>>,
}

/// Output of `check`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub config: RunConfig,
    pub bounds: ErrorReport,
    pub costs: PlanStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbstractionCosts {
    pub marginals: u128,
    pub marginals_with_absorbing: u128,
    pub stored_entries: usize,
}

/// Sidecar of `abstract`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbstractReport {
    pub config: RunConfig,
    pub bounds: ErrorReport,
    pub costs: AbstractionCosts,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McConfig {
    pub n: usize,
    pub horizon: usize,
    pub init: Vec<f64>,
    pub samples: u64,
    pub seed: u64,
}

/// Output of `mc`. Carries no timing so equal seeds give equal bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub config: McConfig,
    pub estimate: McEstimate,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_rows_of_the_comparison() {
        let r = compare_bidiagonal(1..=2, 1.0, 0.2, 10, 0.2).unwrap();
        let one = r.rows[0];
        assert_eq!(one.dbn.bins_per_dim, one.aklp.bins_per_dim);
        assert_eq!(one.dbn.bins_per_dim, 1210.0);
        assert_eq!(one.dbn.marginals, 1210.0 * 1210.0);
        assert_eq!(r.rows[1].dbn.bins_per_dim, 3630.0);
    }

    #[test]
    fn table_layout() {
        let r = compare_bidiagonal(1..=3, 1.0, 0.2, 10, 0.2).unwrap();
        let t = r.text_table();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 7);
        assert!(lines[1].starts_with("AKLP  # bins/dim"));
        assert!(lines[4].contains("1.2e3"));
        let widths: Vec<usize> = lines.iter().map(|l| l.chars().count()).collect();
        assert!(widths.windows(2).all(|w| w[0] == w[1]), "{t}");
    }

    #[test]
    fn sci2_rounds_to_two_digits() {
        assert_eq!(sci2(8469.0), "8.5e3");
        assert_eq!(sci2(3.54e21), "3.5e21");
        assert_eq!(sci2(1.0), "1.0e0");
    }

    #[test]
    fn rejects_empty_dimension() {
        assert!(compare_bidiagonal([0], 1.0, 0.2, 10, 0.2).is_err());
    }
}

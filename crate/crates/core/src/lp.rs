//! Feasibility programs `A x = b` with box bounds on `x`, solved with the
//! `microlp` simplex and a zero objective.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

/// Outcome of a feasibility solve.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible(Vec<f64>),
    Infeasible { reason: String },
}

/// One equality row in sparse form: `Σ coeff · x[var] = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Finds `x` with `bounds[j].0 <= x[j] <= bounds[j].1` satisfying every row.
pub fn solve_sparse(bounds: &[(f64, f64)], rows: &[Row]) -> Feasibility {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = bounds.iter().map(|&b| problem.add_var(0.0, b)).collect();
    for row in rows {
        let expr: Vec<_> = row.terms.iter().filter(|(_, c)| *c != 0.0).map(|&(j, c)| (vars[j], c)).collect();
        problem.add_constraint(expr.as_slice(), ComparisonOp::Eq, row.rhs);
    }
    match problem.solve() {
        Ok(outcome) => match outcome.into_solution() {
            Ok(sol) => Feasibility::Feasible(vars.iter().map(|&v| sol.var_value(v)).collect()),
            Err(_) => Feasibility::Infeasible { reason: "solve interrupted".into() },
        },
        Err(e) => Feasibility::Infeasible { reason: e.to_string() },
    }
}

/// Dense convenience form: nonnegative `x` with `rows · x = rhs`.
pub fn find_feasible(rows: &[Vec<f64>], rhs: &[f64], cols: usize) -> Feasibility {
    assert_eq!(rows.len(), rhs.len(), "row/rhs count mismatch");
    let sparse: Vec<Row> = rows
        .iter()
        .zip(rhs)
        .map(|(r, &b)| {
            assert_eq!(r.len(), cols, "row has wrong length");
            Row { terms: r.iter().copied().enumerate().collect(), rhs: b }
        })
        .collect();
    solve_sparse(&vec![(0.0, f64::INFINITY); cols], &sparse)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_feasible_system() {
        // x + y = 1, x - y = 0.5  => x = 0.75, y = 0.25
        let rows = vec![vec![1.0, 1.0], vec![1.0, -1.0]];
        match find_feasible(&rows, &[1.0, 0.5], 2) {
            Feasibility::Feasible(x) => {
                assert!((x[0] - 0.75).abs() < 1e-12 && (x[1] - 0.25).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_system() {
        let rows = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(matches!(find_feasible(&rows, &[1.0, 2.0], 2), Feasibility::Infeasible { .. }));
        assert!(matches!(find_feasible(&[vec![1.0]], &[-1.0], 1), Feasibility::Infeasible { .. }));
    }

    #[test]
    fn redundant_rows_are_fine() {
        let rows = vec![vec![1.0, 1.0, 1.0], vec![2.0, 2.0, 2.0], vec![1.0, 0.0, -1.0]];
        match find_feasible(&rows, &[1.0, 2.0, 0.0], 3) {
            Feasibility::Feasible(x) => {
                assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!((x[0] - x[2]).abs() < 1e-12);
                assert!(x.iter().all(|&v| v >= 0.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn free_variables() {
        // x free, y >= 0: x + y = -3, y = 1
        let rows = [Row { terms: vec![(0, 1.0), (1, 1.0)], rhs: -3.0 }, Row { terms: vec![(1, 1.0)], rhs: 1.0 }];
        match solve_sparse(&[(f64::NEG_INFINITY, f64::INFINITY), (0.0, f64::INFINITY)], &rows) {
            Feasibility::Feasible(x) => assert!((x[0] + 4.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}

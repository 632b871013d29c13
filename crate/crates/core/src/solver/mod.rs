//! Linear programming core shared by every dispatch mode.
//!
//! Programs are stated as `minimize c·x` subject to rows tagged `≤` or `=`
//! and per-variable bounds. [`solve_lp`] runs a bounded-variable revised
//! simplex; [`segments`] holds the chord linearization of the resistive
//! line loss that lets the convex link constraint live inside an LP.

mod format;
pub mod segments;
mod simplex;

pub use segments::{build_loss_segments, embed_link, LinkEmbedding, LossSegments};
pub use simplex::solve_lp_with;

use thiserror::Error;

/// Index of a column in a [`LinearProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// Index of a row in a [`LinearProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// `a·x ≤ b`
    Le,
    /// `a·x = b`
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(VarId, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
}

/// Sparse linear expression `Σ coef·x_var + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinearExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(v: VarId) -> Self {
        Self { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn add(&mut self, v: VarId, coef: f64) -> &mut Self {
        self.terms.push((v, coef));
        self
    }

    pub fn add_expr(&mut self, other: &LinearExpr, scale: f64) -> &mut Self {
        self.terms.extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += other.constant * scale;
        self
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }
}

/// A minimization program in the form accepted by [`solve_lp`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
    names: Vec<Option<String>>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Adds a column with the given cost and bounds. Use `f64::INFINITY` /
    /// `f64::NEG_INFINITY` for absent bounds.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> VarId {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.names.push(None);
        VarId(self.objective.len() - 1)
    }

    /// Adds a non-negative column `0 ≤ x < ∞`.
    pub fn add_nonneg(&mut self, cost: f64) -> VarId {
        self.add_var(cost, 0.0, f64::INFINITY)
    }

    pub fn set_bounds(&mut self, v: VarId, lower: f64, upper: f64) {
        self.lower[v.0] = lower;
        self.upper[v.0] = upper;
    }

    pub fn set_name(&mut self, v: VarId, name: impl Into<String>) {
        self.names[v.0] = Some(name.into());
    }

    pub fn name(&self, v: VarId) -> String {
        self.names[v.0].clone().unwrap_or_else(|| format!("x{}", v.0))
    }

    pub fn add_row(&mut self, coeffs: Vec<(VarId, f64)>, kind: RowKind, rhs: f64) -> RowId {
        self.rows.push(Row { coeffs, kind, rhs });
        RowId(self.rows.len() - 1)
    }

    pub fn add_le(&mut self, coeffs: Vec<(VarId, f64)>, rhs: f64) -> RowId {
        self.add_row(coeffs, RowKind::Le, rhs)
    }

    /// `a·x ≥ b`, stored negated as `−a·x ≤ −b`.
    pub fn add_ge(&mut self, coeffs: Vec<(VarId, f64)>, rhs: f64) -> RowId {
        let neg = coeffs.into_iter().map(|(v, c)| (v, -c)).collect();
        self.add_row(neg, RowKind::Le, -rhs)
    }

    pub fn add_eq(&mut self, coeffs: Vec<(VarId, f64)>, rhs: f64) -> RowId {
        self.add_row(coeffs, RowKind::Eq, rhs)
    }

    /// Adds `expr (kind) rhs`, folding the expression constant into the rhs.
    pub fn add_expr_row(&mut self, expr: &LinearExpr, kind: RowKind, rhs: f64) -> RowId {
        self.add_row(expr.terms.clone(), kind, rhs - expr.constant)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, x)| c * x).sum()
    }

    /// Largest violation of any row or bound at `values`, before scaling.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().map(|&(v, c)| c * values[v.0]).sum();
            let viol = match row.kind {
                RowKind::Le => (lhs - row.rhs).max(0.0),
                RowKind::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        for (j, &x) in values.iter().enumerate() {
            worst = worst.max(self.lower[j] - x).max(x - self.upper[j]);
        }
        worst
    }

    pub fn rhs_norm_inf(&self) -> f64 {
        self.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<(), SolverError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(SolverError::Malformed("bound vectors do not match objective length".into()));
        }
        for j in 0..n {
            if !self.objective[j].is_finite() {
                return Err(SolverError::Malformed(format!("objective coefficient {j} is not finite")));
            }
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(SolverError::Malformed(format!("variable {j} has invalid bounds")));
            }
            if self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(SolverError::Malformed(format!("variable {j} has an unattainable bound")));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(SolverError::Malformed(format!("row {i} has a non-finite rhs")));
            }
            for &(v, c) in &row.coeffs {
                if v.0 >= n {
                    return Err(SolverError::Malformed(format!("row {i} references unknown variable {}", v.0)));
                }
                if !c.is_finite() {
                    return Err(SolverError::Malformed(format!("row {i} has a non-finite coefficient")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    /// Primal values (meaningful only when `Optimal`).
    pub values: Vec<f64>,
    pub objective: f64,
    /// Row multipliers `y` with reduced costs `c − Aᵀy`; `≤` rows carry `y ≤ 0`.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    pub fn eval(&self, expr: &LinearExpr) -> f64 {
        expr.eval(&self.values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { feasibility_tol: 1e-9, optimality_tol: 1e-9, pivot_tol: 1e-9, max_iterations: 1_000_000 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
}

/// Solves `program` with default tolerances.
pub fn solve_lp(program: &LinearProgram) -> Result<Solution, SolverError> {
    solve_lp_with(program, &SolverOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable_upper_limit() {
        let mut lp = LinearProgram::new();
        let x = lp.add_nonneg(-1.0);
        lp.add_le(vec![(x, 1.0)], 5.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.value(x) - 5.0).abs() < 1e-12);
        assert!((sol.objective + 5.0).abs() < 1e-12);
    }

    #[test]
    fn two_variable_equality_mix() {
        let mut lp = LinearProgram::new();
        let a = lp.add_nonneg(0.8);
        let b = lp.add_nonneg(0.2);
        lp.add_eq(vec![(a, 1.0), (b, 1.0)], 100.0);
        lp.add_le(vec![(b, 1.0)], 30.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.value(a) - 70.0).abs() < 1e-9);
        assert!((sol.value(b) - 30.0).abs() < 1e-9);
        assert!((sol.objective - 62.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut lp = LinearProgram::new();
        let x = lp.add_nonneg(1.0);
        lp.add_le(vec![(x, 1.0)], -1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn unbounded_ray_detected() {
        let mut lp = LinearProgram::new();
        let x = lp.add_nonneg(-1.0);
        let y = lp.add_nonneg(0.0);
        lp.add_le(vec![(x, 1.0), (y, -1.0)], 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, Status::Unbounded);
    }

    #[test]
    fn free_variable_and_bound_flip() {
        // min x − 2y, x free, 0 ≤ y ≤ 3, x + y ≥ 4, x ≥ −10
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY);
        let y = lp.add_var(-2.0, 0.0, 3.0);
        lp.add_ge(vec![(x, 1.0), (y, 1.0)], 4.0);
        lp.add_ge(vec![(x, 1.0)], -10.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.value(y) - 3.0).abs() < 1e-12);
        assert!((sol.value(x) - 1.0).abs() < 1e-12);
        assert!((sol.objective + 5.0).abs() < 1e-12);
    }

    #[test]
    fn duals_price_rhs_changes() {
        // min 3a + 2b s.t. a + b = 10, a ≥ 2 → (2, 8), y_eq = 2
        let mut lp = LinearProgram::new();
        let a = lp.add_nonneg(3.0);
        let b = lp.add_nonneg(2.0);
        lp.add_eq(vec![(a, 1.0), (b, 1.0)], 10.0);
        lp.add_ge(vec![(a, 1.0)], 2.0);
        let sol = solve_lp(&lp).unwrap();
        assert!((sol.objective - 22.0).abs() < 1e-12);
        assert!((sol.duals[0] - 2.0).abs() < 1e-12);
        // ≥ row stored as −a ≤ −2 with multiplier −1
        assert!((sol.duals[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_bits() {
        let mut lp = LinearProgram::new();
        let vars: Vec<_> = (0..6).map(|j| lp.add_var(-(j as f64 % 3.0) - 1.0, 0.0, 4.0)).collect();
        for i in 0..4 {
            let coeffs = vars.iter().enumerate().map(|(j, &v)| (v, ((i * 7 + j * 3) % 5) as f64 + 0.5)).collect();
            lp.add_le(coeffs, 10.0 + i as f64);
        }
        let a = solve_lp(&lp).unwrap();
        let b = solve_lp(&lp).unwrap();
        assert_eq!(a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new();
        let x = lp.add_nonneg(1.0);
        let y = lp.add_nonneg(1.0);
        lp.add_eq(vec![(x, 1.0), (y, 1.0)], 2.0);
        lp.add_eq(vec![(x, 2.0), (y, 2.0)], 4.0);
        lp.add_ge(vec![(x, 1.0)], 0.5);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_program_rejected() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 2.0, 1.0);
        lp.add_le(vec![(x, 1.0)], 1.0);
        assert!(matches!(solve_lp(&lp), Err(SolverError::Malformed(_))));
    }
}

//! Dense linear-programming kernel.
//!
//! Problems are stated as
//!
//! ```text
//! min  c'x
//! s.t. A x  = b      (equality rows)
//!      G x <= h      (inequality rows)
//!      x_j >= 0 or x_j free
//! ```
//!
//! and solved by a two-phase primal simplex method with Bland's
//! smallest-index rule, so every optimal answer is a basic (vertex)
//! solution and identical inputs give identical outputs.
//!
//! Dual sign convention (minimization): multipliers of equality rows are
//! unrestricted, multipliers of `<=` rows are nonpositive, and at an
//! optimum `c'x = b'y_eq + h'y_ineq`. A multiplier is the derivative of
//! the optimal value with respect to its row's right-hand side.

mod simplex;
mod standard;

pub use standard::{to_standard_form, BackMap, StandardForm};

use thiserror::Error;

/// Feasibility and optimality tolerance used throughout the kernel.
pub const TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("{what}: expected {expected} columns, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("simplex iteration limit ({0}) reached")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarBound {
    /// `x_j >= 0`
    NonNegative,
    /// `x_j` unrestricted in sign.
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        dot(&self.coeffs, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub eq_rows: Vec<Row>,
    pub ineq_rows: Vec<Row>,
    pub bounds: Vec<VarBound>,
}

impl LinearProgram {
    /// A program over `objective.len()` nonnegative variables with no rows.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            eq_rows: Vec::new(),
            ineq_rows: Vec::new(),
            bounds: vec![VarBound::NonNegative; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_free(&mut self, var: usize) {
        self.bounds[var] = VarBound::Free;
    }

    /// Appends `coeffs . x = rhs`, returning the equality-row index.
    pub fn add_eq(&mut self, coeffs: Vec<f64>, rhs: f64) -> usize {
        self.eq_rows.push(Row::new(coeffs, rhs));
        self.eq_rows.len() - 1
    }

    /// Appends `coeffs . x <= rhs`, returning the inequality-row index.
    pub fn add_le(&mut self, coeffs: Vec<f64>, rhs: f64) -> usize {
        self.ineq_rows.push(Row::new(coeffs, rhs));
        self.ineq_rows.len() - 1
    }

    pub fn check(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(LpError::DimensionMismatch {
                what: "variable bounds".into(),
                expected: n,
                found: self.bounds.len(),
            });
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("objective".into()));
        }
        let rows = self
            .eq_rows
            .iter()
            .enumerate()
            .map(|(i, r)| (format!("equality row {i}"), r))
            .chain(
                self.ineq_rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| (format!("inequality row {i}"), r)),
            );
        for (name, row) in rows {
            if row.coeffs.len() != n {
                return Err(LpError::DimensionMismatch {
                    what: name,
                    expected: n,
                    found: row.coeffs.len(),
                });
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(LpError::NonFinite(name));
            }
        }
        Ok(())
    }

    /// Largest absolute row violation of `x` (bounds included).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let eq = self
            .eq_rows
            .iter()
            .map(|r| (r.activity(x) - r.rhs).abs());
        let le = self
            .ineq_rows
            .iter()
            .map(|r| (r.activity(x) - r.rhs).max(0.0));
        let bnd = x
            .iter()
            .zip(&self.bounds)
            .filter(|(_, b)| **b == VarBound::NonNegative)
            .map(|(v, _)| (-v).max(0.0));
        eq.chain(le).chain(bnd).fold(0.0, f64::max)
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    /// `b'y_eq + h'y_ineq`.
    pub fn dual_objective(&self, duals_eq: &[f64], duals_ineq: &[f64]) -> f64 {
        let eq: f64 = self.eq_rows.iter().zip(duals_eq).map(|(r, y)| r.rhs * y).sum();
        let le: f64 = self
            .ineq_rows
            .iter()
            .zip(duals_ineq)
            .map(|(r, y)| r.rhs * y)
            .sum();
        eq + le
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point in the original coordinates (empty unless optimal).
    pub primal: Vec<f64>,
    /// `+inf` when infeasible, `-inf` when unbounded.
    pub objective_value: f64,
    pub duals_eq: Vec<f64>,
    /// Nonpositive multipliers of the `<=` rows.
    pub duals_ineq: Vec<f64>,
    /// Standard-form column index basic in each row, in row order.
    /// Indices `>= StandardForm::cols` denote an artificial column kept
    /// basic at zero on a redundant equality row.
    pub basis: Vec<usize>,
    pub pivots: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn without_point(status: LpStatus, pivots: usize) -> Self {
        let objective_value = match status {
            LpStatus::Infeasible => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        };
        Self {
            status,
            primal: Vec::new(),
            objective_value,
            duals_eq: Vec::new(),
            duals_ineq: Vec::new(),
            basis: Vec::new(),
            pivots,
        }
    }
}

/// Solves `lp` to a vertex optimum, or reports infeasibility/unboundedness.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.check()?;
    let (sf, map) = to_standard_form(lp);
    let out = simplex::run(&sf)?;
    match out.status {
        LpStatus::Optimal => {
            let primal = map.primal(&out.x);
            let (duals_eq, duals_ineq) = map.duals(&out.y);
            let objective_value = lp.objective_at(&primal);
            Ok(LpSolution {
                status: LpStatus::Optimal,
                primal,
                objective_value,
                duals_eq,
                duals_ineq,
                basis: out.basis,
                pivots: out.pivots,
            })
        }
        status => Ok(LpSolution::without_point(status, out.pivots)),
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

//! Dense linear programming.
//!
//! Every subproblem in the toolkit is expressed as a [`LinearProgram`] in
//! equality form `min c'x + offset  s.t.  Ax = b,  l <= x <= u` and handed
//! to [`solve`], a two-phase revised simplex method with Bland's
//! smallest-index pivoting. [`enumerate_vertices`] is a brute-force basis
//! enumerator used as a test oracle for small programs.

mod builder;
mod simplex;
mod vertices;

pub use builder::LpBuilder;
pub use simplex::{solve, solve_with, PivotRule, SolverOptions};
pub use vertices::{enumerate_vertices, MAX_ORACLE_ROWS, MAX_ORACLE_VARS};

use crate::error::{Error, Result};

/// A linear program in equality form with simple variable bounds.
///
/// Variables default to `0 <= x < +inf`. A variable flagged in `free_mask`
/// is unrestricted regardless of its bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    /// Row-major constraint matrix, one inner vector per equality row.
    pub eq_matrix: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub var_lower: Vec<f64>,
    pub var_upper: Vec<f64>,
    pub free_mask: Vec<bool>,
    /// Constant added to the objective value.
    pub objective_offset: f64,
}

impl LinearProgram {
    /// Program with nonnegative variables and no offset.
    pub fn new(objective: Vec<f64>, eq_matrix: Vec<Vec<f64>>, eq_rhs: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            eq_matrix,
            eq_rhs,
            var_lower: vec![0.0; n],
            var_upper: vec![f64::INFINITY; n],
            free_mask: vec![false; n],
            objective_offset: 0.0,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.eq_rhs.len()
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.eq_matrix.len() != self.eq_rhs.len() {
            return Err(Error::Dimension(format!(
                "{} constraint rows but {} right-hand sides",
                self.eq_matrix.len(),
                self.eq_rhs.len()
            )));
        }
        if let Some((i, row)) = self.eq_matrix.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Dimension(format!(
                "row {i} has {} columns, objective has {n}",
                row.len()
            )));
        }
        if self.var_lower.len() != n || self.var_upper.len() != n || self.free_mask.len() != n {
            return Err(Error::Dimension("bound vectors differ from objective length".into()));
        }
        for j in 0..n {
            if self.free_mask[j] {
                continue;
            }
            let (l, u) = (self.var_lower[j], self.var_upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::Malformed(format!("variable {j} has bounds [{l}, {u}]")));
            }
        }
        let finite = self
            .objective
            .iter()
            .chain(self.eq_rhs.iter())
            .chain(self.eq_matrix.iter().flatten())
            .all(|v| v.is_finite());
        if !finite || !self.objective_offset.is_finite() {
            return Err(Error::Malformed("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// Objective value `c'x + offset`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x) + self.objective_offset
    }

    /// Infinity norm of `Ax - b`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.eq_matrix
            .iter()
            .zip(&self.eq_rhs)
            .map(|(row, b)| (dot(row, x) - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of a simplex solve.
///
/// `primal`, `duals` and `objective_value` are only meaningful when the
/// status is [`LpStatus::Optimal`]; otherwise the vectors are empty and the
/// value is `+inf` (infeasible) or `-inf` (unbounded).
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    /// One multiplier per equality row, signed so that `d(value)/d(b_i) = duals[i]`.
    pub duals: Vec<f64>,
    pub objective_value: f64,
    /// Sorted indices of the basic columns of the internal standard form.
    pub basis: Vec<usize>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub(crate) fn failed(status: LpStatus, iterations: usize) -> Self {
        let objective_value = match status {
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
            LpStatus::Optimal => f64::NAN,
        };
        Self {
            status,
            primal: Vec::new(),
            duals: Vec::new(),
            objective_value,
            basis: Vec::new(),
            iterations,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_ragged_rows() {
        let lp = LinearProgram::new(vec![1.0, 1.0], vec![vec![1.0]], vec![1.0]);
        assert!(matches!(lp.validate(), Err(Error::Dimension(_))));
    }

    #[test]
    fn validate_rejects_crossed_bounds() {
        let mut lp = LinearProgram::new(vec![1.0], vec![vec![1.0]], vec![1.0]);
        lp.var_lower[0] = 2.0;
        lp.var_upper[0] = 1.0;
        assert!(matches!(lp.validate(), Err(Error::Malformed(_))));
    }

    #[test]
    fn validate_rejects_missing_rhs() {
        let lp = LinearProgram::new(vec![1.0], vec![vec![1.0], vec![2.0]], vec![1.0]);
        assert!(lp.validate().is_err());
    }
}

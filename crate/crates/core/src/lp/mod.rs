//! Linear programs with bounded variables and an exact simplex kernel.
//!
//! Every program minimises its objective. Maximisation is expressed by negating
//! coefficients. Programs are immutable once handed to the solver and can be
//! shared freely between threads.

mod mps;
mod simplex;

pub use mps::write_mps;
pub use simplex::{solve, solve_with, Basis, SolverOptions};

use std::fmt;
use thiserror::Error;

/// Index of a declared variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> Self {
        Self {
            name: name.into(),
            terms,
            relation,
            rhs,
        }
    }
}

/// Linear objective `offset + Σ c_j x_j`, always minimised.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Objective {
    pub terms: Vec<(VarId, f64)>,
    pub offset: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("constraint `{constraint}` references undeclared variable {var}")]
    UnknownVariable { constraint: String, var: VarId },
    #[error("variable `{name}` has invalid bounds [{lower}, {upper}]")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("non-finite coefficient in `{0}`")]
    NonFinite(String),
    #[error("warm-start basis does not match the program ({0})")]
    BasisMismatch(String),
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("numerical instability: residual {residual:e} exceeds tolerance after refinement")]
    NumericalInstability { residual: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of a solve. `values` is indexed by [`VarId`].
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Final basis, present for optimal solves whose basis is free of artificials.
    pub basis: Option<Basis>,
}

impl LpSolution {
    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Objective,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
    ) -> Result<VarId, LpError> {
        let name = name.into();
        if lower.is_nan()
            || upper.is_nan()
            || lower > upper
            || lower == f64::INFINITY
            || upper == f64::NEG_INFINITY
        {
            return Err(LpError::InvalidBounds { name, lower, upper });
        }
        self.variables.push(Variable { name, lower, upper });
        Ok(VarId(self.variables.len() - 1))
    }

    /// Appends a constraint in place.
    pub fn push_constraint(&mut self, constraint: Constraint) -> Result<(), LpError> {
        self.check_terms(&constraint.name, &constraint.terms)?;
        if !constraint.rhs.is_finite() {
            return Err(LpError::NonFinite(constraint.name));
        }
        self.constraints.push(constraint);
        Ok(())
    }

    /// Returns a copy of this program with one more constraint; `self` is untouched.
    pub fn add_constraint(&self, constraint: Constraint) -> Result<LinearProgram, LpError> {
        let mut next = self.clone();
        next.push_constraint(constraint)?;
        Ok(next)
    }

    pub fn set_objective(&mut self, objective: Objective) -> Result<(), LpError> {
        self.check_terms("objective", &objective.terms)?;
        if !objective.offset.is_finite() {
            return Err(LpError::NonFinite("objective".into()));
        }
        self.objective = objective;
        Ok(())
    }

    /// Returns a copy of this program with its objective replaced.
    pub fn with_objective(&self, objective: Objective) -> Result<LinearProgram, LpError> {
        let mut next = self.clone();
        next.set_objective(objective)?;
        Ok(next)
    }

    fn check_terms(&self, owner: &str, terms: &[(VarId, f64)]) -> Result<(), LpError> {
        for &(var, coef) in terms {
            if var.0 >= self.variables.len() {
                return Err(LpError::UnknownVariable {
                    constraint: owner.to_string(),
                    var,
                });
            }
            if !coef.is_finite() {
                return Err(LpError::NonFinite(owner.to_string()));
            }
        }
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Evaluates `offset + Σ c_j x_j` at the given point.
    pub fn evaluate_objective(&self, values: &[f64]) -> f64 {
        self.objective.offset
            + self
                .objective
                .terms
                .iter()
                .map(|&(v, c)| c * values[v.0])
                .sum::<f64>()
    }

    /// Largest constraint violation at `values`, scaled by `1 + |rhs|`.
    pub fn max_relative_violation(&self, values: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| {
                let lhs: f64 = c.terms.iter().map(|&(v, a)| a * values[v.0]).sum();
                let gap = match c.relation {
                    Relation::Le => (lhs - c.rhs).max(0.0),
                    Relation::Ge => (c.rhs - lhs).max(0.0),
                    Relation::Eq => (lhs - c.rhs).abs(),
                };
                gap / (1.0 + c.rhs.abs())
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_var() -> (LinearProgram, VarId, VarId) {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", 0.0, f64::INFINITY).unwrap();
        let y = lp.add_variable("y", 0.0, f64::INFINITY).unwrap();
        lp.push_constraint(Constraint::new("c0", vec![(x, 1.0), (y, 1.0)], Relation::Le, 1.0))
            .unwrap();
        lp.push_constraint(Constraint::new("c1", vec![(x, 1.0)], Relation::Le, 0.6))
            .unwrap();
        (lp, x, y)
    }

    #[test]
    fn add_constraint_leaves_original_untouched() {
        let (lp, x, _) = two_var();
        let next = lp
            .add_constraint(Constraint::new("c2", vec![(x, 1.0)], Relation::Le, 5.0))
            .unwrap();
        assert_eq!(lp.num_constraints(), 2);
        assert_eq!(next.num_constraints(), 3);
        assert_eq!(&next.constraints()[..2], lp.constraints());
    }

    #[test]
    fn undeclared_variable_rejected() {
        let (lp, _, _) = two_var();
        let err = lp
            .add_constraint(Constraint::new("bad", vec![(VarId(7), 1.0)], Relation::Le, 1.0))
            .unwrap_err();
        assert!(matches!(err, LpError::UnknownVariable { var: VarId(7), .. }));
    }

    #[test]
    fn inverted_bounds_rejected() {
        let mut lp = LinearProgram::new();
        assert!(lp.add_variable("z", 2.0, 1.0).is_err());
        assert!(lp.add_variable("w", f64::INFINITY, f64::INFINITY).is_err());
        assert!(lp.add_variable("free", f64::NEG_INFINITY, f64::INFINITY).is_ok());
    }
}

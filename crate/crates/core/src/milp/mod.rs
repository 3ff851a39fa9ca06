//! Mixed-integer linear programming.
//!
//! A small, auditable exact solver: two-phase primal simplex on the LP
//! relaxation, wrapped in best-first branch-and-bound on the most fractional
//! variable. No cutting planes; the only presolve is folding singleton rows
//! into variable bounds. Every optimal answer is re-checked against the full
//! constraint set before it is returned.

mod branch_bound;
mod lp_format;
mod simplex;

pub use branch_bound::{solve_milp, solve_milp_opts, MilpOptions};
pub use lp_format::write_lp_format;
pub use simplex::{solve_lp, solve_lp_reference};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Absolute feasibility tolerance used in verification.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// A variable is treated as integral when within this distance of an integer.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Variable<S> {
    pub name: String,
    pub lower: S,
    pub upper: S,
    pub integer: bool,
}

/// One linear constraint with a sparse coefficient row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Constraint<S> {
    pub name: String,
    pub terms: Vec<(usize, S)>,
    pub relation: Relation,
    pub rhs: S,
}

/// Minimisation problem over bounded variables.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LinearProgram<S> {
    pub variables: Vec<Variable<S>>,
    /// Dense objective coefficients, one per variable.
    pub objective: Vec<S>,
    pub constraints: Vec<Constraint<S>>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("objective length {objective} does not match variable count {variables}")]
    ObjectiveShape { objective: usize, variables: usize },
    #[error("variable {0}: lower bound exceeds upper bound")]
    BoundOrder(String),
    #[error("variable {0}: lower bound must be finite")]
    InfiniteLower(String),
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("constraint {constraint} references variable index {index} out of range")]
    BadIndex { constraint: String, index: usize },
    #[error("integer variable {0} must have finite bounds")]
    UnboundedInteger(String),
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("fixed value {value} for {variable} is outside its bounds")]
    FixOutOfBounds { variable: String, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult<S> {
    pub status: SolveStatus,
    pub objective: S,
    /// One value per variable; meaningful only when `status` is optimal.
    pub assignment: Vec<S>,
    pub node_count: u64,
    pub wall_time_secs: f64,
    /// Line-oriented solve log (empty unless logging was requested).
    pub log: Vec<String>,
}

impl<S: Scalar> SolveResult<S> {
    pub fn value_of(&self, lp: &LinearProgram<S>, name: &str) -> Option<S> {
        let idx = lp.variables.iter().position(|v| v.name == name)?;
        self.assignment.get(idx).copied()
    }
}

impl<S: Scalar> LinearProgram<S> {
    pub fn new() -> Self {
        Self { variables: Vec::new(), objective: Vec::new(), constraints: Vec::new() }
    }

    /// Adds a variable and returns its index.
    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        lower: S,
        upper: S,
        integer: bool,
        cost: S,
    ) -> usize {
        self.variables.push(Variable { name: name.into(), lower, upper, integer });
        self.objective.push(cost);
        self.variables.len() - 1
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, S)>,
        relation: Relation,
        rhs: S,
    ) {
        self.constraints.push(Constraint { name: name.into(), terms, relation, rhs });
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.objective.len() != self.variables.len() {
            return Err(ModelError::ObjectiveShape {
                objective: self.objective.len(),
                variables: self.variables.len(),
            });
        }
        for (var, &cost) in self.variables.iter().zip(&self.objective) {
            if !cost.is_finite() {
                return Err(ModelError::NonFinite(format!("objective of {}", var.name)));
            }
            if !var.lower.is_finite() {
                return Err(ModelError::InfiniteLower(var.name.clone()));
            }
            if var.upper.is_nan() || var.lower > var.upper {
                return Err(ModelError::BoundOrder(var.name.clone()));
            }
        }
        for con in &self.constraints {
            if !con.rhs.is_finite() {
                return Err(ModelError::NonFinite(format!("rhs of {}", con.name)));
            }
            for &(index, coeff) in &con.terms {
                if index >= self.variables.len() {
                    return Err(ModelError::BadIndex { constraint: con.name.clone(), index });
                }
                if !coeff.is_finite() {
                    return Err(ModelError::NonFinite(format!("coefficient in {}", con.name)));
                }
            }
        }
        Ok(())
    }

    /// Copy of the model with each listed variable clamped to a single value.
    pub fn fix_variables(&self, assignment: &[(String, S)]) -> Result<Self, ModelError> {
        let mut fixed = self.clone();
        for (name, value) in assignment {
            let idx = fixed
                .variables
                .iter()
                .position(|v| &v.name == name)
                .ok_or_else(|| ModelError::UnknownVariable(name.clone()))?;
            let var = &mut fixed.variables[idx];
            let tol = S::from_f64(FEASIBILITY_TOL);
            if *value < var.lower - tol || *value > var.upper + tol {
                return Err(ModelError::FixOutOfBounds {
                    variable: name.clone(),
                    value: value.as_f64(),
                });
            }
            var.lower = *value;
            var.upper = *value;
        }
        Ok(fixed)
    }

    /// Signed violation of a single constraint at `point` (positive = violated).
    fn violation(&self, con: &Constraint<S>, point: &[S]) -> S {
        let mut lhs = S::zero();
        for &(index, coeff) in &con.terms {
            lhs = lhs + coeff * point[index];
        }
        match con.relation {
            Relation::Le => lhs - con.rhs,
            Relation::Ge => con.rhs - lhs,
            Relation::Eq => (lhs - con.rhs).abs(),
        }
    }

    /// Checks a candidate point against every constraint and bound.
    pub fn is_feasible(&self, point: &[S], tol: S) -> bool {
        if point.len() != self.variables.len() {
            return false;
        }
        for (var, &value) in self.variables.iter().zip(point) {
            if value < var.lower - tol || value > var.upper + tol {
                return false;
            }
        }
        self.constraints.iter().all(|c| self.violation(c, point) <= tol)
    }

    pub fn objective_value(&self, point: &[S]) -> S {
        self.objective.iter().zip(point).fold(S::zero(), |acc, (&c, &x)| acc + c * x)
    }
}

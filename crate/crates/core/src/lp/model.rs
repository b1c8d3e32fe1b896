use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub name: String,
    pub terms: Vec<(usize, T)>,
    pub relation: Relation,
    pub rhs: T,
}

/// A minimization LP over nonnegative variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LpModel<T> {
    variables: Vec<String>,
    constraints: Vec<Constraint<T>>,
    objective: Vec<(usize, T)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// Objective value; zero when infeasible.
    pub objective: T,
    /// One value per variable; empty when infeasible.
    pub values: Vec<T>,
}

impl<T: Scalar> LpSolution<T> {
    pub fn infeasible() -> Self {
        LpSolution {
            status: LpStatus::Infeasible,
            objective: T::zero(),
            values: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

impl<T: Scalar> Default for LpModel<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> LpModel<T> {
    pub fn new() -> Self {
        LpModel {
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
        }
    }

    pub fn add_variable(&mut self, name: impl Into<String>) -> usize {
        self.variables.push(name.into());
        self.variables.len() - 1
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, T)>,
        relation: Relation,
        rhs: T,
    ) -> Result<()> {
        let name = name.into();
        if let Some((j, _)) = terms.iter().find(|(j, _)| *j >= self.variables.len()) {
            return Err(Error::Lp(format!("constraint {name} references unknown variable {j}")));
        }
        self.constraints.push(Constraint {
            name,
            terms,
            relation,
            rhs,
        });
        Ok(())
    }

    pub fn set_objective(&mut self, terms: Vec<(usize, T)>) -> Result<()> {
        if let Some((j, _)) = terms.iter().find(|(j, _)| *j >= self.variables.len()) {
            return Err(Error::Lp(format!("objective references unknown variable {j}")));
        }
        self.objective = terms;
        Ok(())
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn variable_name(&self, j: usize) -> &str {
        &self.variables[j]
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn constraints(&self) -> &[Constraint<T>] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(usize, T)] {
        &self.objective
    }

    pub fn objective_value(&self, values: &[T]) -> T {
        dot(&self.objective, values)
    }

    /// Name of the first constraint violated by more than `tol`, if any.
    pub fn violated_constraint(&self, values: &[T], tol: &T) -> Option<&str> {
        if values.iter().any(|x| *x < -tol.clone()) {
            return Some("nonnegativity");
        }
        self.constraints
            .iter()
            .find(|c| {
                let lhs = dot(&c.terms, values);
                let excess = lhs - c.rhs.clone();
                match c.relation {
                    Relation::Le => excess > *tol,
                    Relation::Ge => excess < -tol.clone(),
                    Relation::Eq => excess.abs() > *tol,
                }
            })
            .map(|c| c.name.as_str())
    }

    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> LpModel<U> {
        let map_terms = |terms: &[(usize, T)]| terms.iter().map(|(j, v)| (*j, f(v))).collect();
        LpModel {
            variables: self.variables.clone(),
            constraints: self
                .constraints
                .iter()
                .map(|c| Constraint {
                    name: c.name.clone(),
                    terms: map_terms(&c.terms),
                    relation: c.relation,
                    rhs: f(&c.rhs),
                })
                .collect(),
            objective: map_terms(&self.objective),
        }
    }

    /// CPLEX LP text. Coefficients are written as shortest round-trip
    /// decimals of their `f64` value, since the format has no fractions.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::from("\\ written by cvar\nMinimize\n obj:");
        if self.objective.is_empty() {
            if !self.variables.is_empty() {
                let _ = write!(out, " 0 {}", self.variables[0]);
            }
        } else {
            self.write_terms(&mut out, &self.objective);
        }
        out.push_str("\nSubject To\n");
        for c in &self.constraints {
            let _ = write!(out, " {}:", c.name);
            if c.terms.is_empty() {
                let _ = write!(out, " 0 {}", self.variables.first().map_or("x", |v| v));
            }
            self.write_terms(&mut out, &c.terms);
            let _ = writeln!(out, " {} {}", c.relation.symbol(), number(&c.rhs));
        }
        out.push_str("Bounds\n");
        for v in &self.variables {
            let _ = writeln!(out, " {v} >= 0");
        }
        out.push_str("End\n");
        out
    }

    fn write_terms(&self, out: &mut String, terms: &[(usize, T)]) {
        for (k, (j, coef)) in terms.iter().enumerate() {
            if k > 0 && k % 6 == 0 {
                out.push_str("\n   ");
            }
            let value = coef.to_f64();
            let sign = if value < 0.0 { '-' } else { '+' };
            if k == 0 && sign == '+' {
                let _ = write!(out, " {} {}", value, self.variables[*j]);
            } else {
                let _ = write!(out, " {sign} {} {}", value.abs(), self.variables[*j]);
            }
        }
    }
}

fn number<T: Scalar>(v: &T) -> String {
    format!("{}", v.to_f64())
}

pub(crate) fn dot<T: Scalar>(terms: &[(usize, T)], values: &[T]) -> T {
    terms
        .iter()
        .fold(T::zero(), |acc, (j, c)| acc + c.clone() * values[*j].clone())
}

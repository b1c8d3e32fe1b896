//! Row-based presolve: fixes singleton and forced-zero rows and substitutes
//! out variables whose defining equality keeps them nonnegative
//! automatically (`x_j = (b - sum a_k x_k) / a_j` with `b / a_j >= 0` and
//! every `-a_k / a_j >= 0`). Flow-conservation LPs collapse to a fraction of
//! their size this way.

use std::collections::{BTreeMap, BTreeSet};

use super::model::{LpModel, Relation};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub(crate) struct Row<T> {
    pub terms: BTreeMap<usize, T>,
    pub relation: Relation,
    pub rhs: T,
}

#[derive(Debug, Clone)]
enum Step<T> {
    Fixed(usize, T),
    /// `x_j = (rhs - sum terms) / pivot`.
    Substituted {
        var: usize,
        pivot: T,
        terms: Vec<(usize, T)>,
        rhs: T,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct Reduced<T> {
    pub rows: Vec<Row<T>>,
    pub objective: BTreeMap<usize, T>,
    /// Surviving original variable indices, in column order.
    pub columns: Vec<usize>,
    num_original: usize,
    steps: Vec<Step<T>>,
}

pub(crate) enum Presolved<T> {
    Infeasible,
    Reduced(Reduced<T>),
}

struct State<T> {
    rows: Vec<Option<Row<T>>>,
    occurs: Vec<BTreeSet<usize>>,
    objective: BTreeMap<usize, T>,
    objective_constant: T,
    removed: Vec<bool>,
    steps: Vec<Step<T>>,
    tol: T,
}

pub(crate) fn presolve<T: Scalar>(lp: &LpModel<T>) -> Presolved<T> {
    let n = lp.num_variables();
    let mut state = State {
        rows: Vec::new(),
        occurs: vec![BTreeSet::new(); n],
        objective: BTreeMap::new(),
        objective_constant: T::zero(),
        removed: vec![false; n],
        steps: Vec::new(),
        tol: T::default_tolerance(),
    };
    for (j, c) in lp.objective() {
        add_to(&mut state.objective, *j, c.clone(), &state.tol);
    }
    for c in lp.constraints() {
        let mut terms = BTreeMap::new();
        for (j, a) in &c.terms {
            add_to(&mut terms, *j, a.clone(), &state.tol);
        }
        let r = state.rows.len();
        for j in terms.keys() {
            state.occurs[*j].insert(r);
        }
        state.rows.push(Some(Row {
            terms,
            relation: c.relation,
            rhs: c.rhs.clone(),
        }));
    }
    if state.run().is_err() {
        return Presolved::Infeasible;
    }
    let columns: Vec<usize> = (0..n).filter(|j| !state.removed[*j]).collect();
    Presolved::Reduced(Reduced {
        rows: state.rows.into_iter().flatten().collect(),
        objective: state.objective,
        columns,
        num_original: n,
        steps: state.steps,
    })
}

impl<T: Scalar> Reduced<T> {
    /// Expands values of the surviving columns to all original variables.
    pub fn postsolve(&self, reduced_values: &[T]) -> Vec<T> {
        let mut values = vec![T::zero(); self.num_original];
        for (col, j) in self.columns.iter().enumerate() {
            values[*j] = reduced_values[col].clone();
        }
        for step in self.steps.iter().rev() {
            match step {
                Step::Fixed(j, v) => values[*j] = v.clone(),
                Step::Substituted {
                    var,
                    pivot,
                    terms,
                    rhs,
                } => {
                    let rest = terms
                        .iter()
                        .fold(T::zero(), |acc, (k, a)| acc + a.clone() * values[*k].clone());
                    let mut v = (rhs.clone() - rest) / pivot.clone();
                    if !T::EXACT && v < T::zero() {
                        v = T::zero();
                    }
                    values[*var] = v;
                }
            }
        }
        values
    }
}

fn add_to<T: Scalar>(map: &mut BTreeMap<usize, T>, j: usize, v: T, tol: &T) {
    let entry = map.entry(j).or_insert_with(T::zero);
    *entry = entry.clone() + v;
    if is_negligible(entry, tol) {
        map.remove(&j);
    }
}

fn is_negligible<T: Scalar>(v: &T, tol: &T) -> bool {
    if T::EXACT {
        v.is_zero()
    } else {
        v.to_f64().abs() <= tol.to_f64() * 1e-3
    }
}

struct Infeasible;

impl<T: Scalar> State<T> {
    fn run(&mut self) -> Result<(), Infeasible> {
        loop {
            let mut changed = false;
            for r in 0..self.rows.len() {
                if self.rows[r].is_some() {
                    changed |= self.simplify_row(r)?;
                }
            }
            if !changed {
                for r in 0..self.rows.len() {
                    if self.rows[r].is_some() && self.try_substitute(r) {
                        changed = true;
                    }
                }
            }
            if !changed {
                return Ok(());
            }
        }
    }

    /// Empty, singleton-equality and forced-zero rows.
    fn simplify_row(&mut self, r: usize) -> Result<bool, Infeasible> {
        let row = self.rows[r].as_ref().unwrap();
        let tol = self.tol.clone();
        if row.terms.is_empty() {
            let ok = match row.relation {
                Relation::Le => row.rhs >= -tol,
                Relation::Ge => row.rhs <= tol,
                Relation::Eq => row.rhs.abs() <= tol,
            };
            if !ok {
                return Err(Infeasible);
            }
            self.rows[r] = None;
            return Ok(true);
        }
        if row.relation == Relation::Eq && row.terms.len() == 1 {
            let (&j, a) = row.terms.iter().next().unwrap();
            let mut v = row.rhs.clone() / a.clone();
            if v < -tol.clone() {
                return Err(Infeasible);
            }
            if v < T::zero() {
                v = T::zero();
            }
            self.drop_row(r);
            self.fix(j, v);
            return Ok(true);
        }
        // sum a_k x_k = 0 (or <= 0) with every a_k > 0 forces all x_k = 0;
        // likewise with every a_k < 0 for = 0 (or >= 0).
        let all_pos = row.terms.values().all(|a| a.is_positive());
        let all_neg = row.terms.values().all(|a| a.is_negative());
        let rhs_zero = row.rhs.abs() <= tol;
        let forced = rhs_zero
            && match row.relation {
                Relation::Eq => all_pos || all_neg,
                Relation::Le => all_pos,
                Relation::Ge => all_neg,
            };
        if forced {
            let vars: Vec<usize> = row.terms.keys().copied().collect();
            self.drop_row(r);
            for j in vars {
                self.fix(j, T::zero());
            }
            return Ok(true);
        }
        Ok(false)
    }

    fn try_substitute(&mut self, r: usize) -> bool {
        let row = self.rows[r].as_ref().unwrap();
        if row.relation != Relation::Eq {
            return false;
        }
        let tol = self.tol.clone();
        let positives = row.terms.values().filter(|a| a.is_positive()).count();
        let negatives = row.terms.len() - positives;
        // x_j with the unique sign in the row; the rhs must share its sign.
        let candidates: Vec<usize> = row
            .terms
            .iter()
            .filter(|(_, a)| {
                let lone = if a.is_positive() { positives == 1 } else { negatives == 1 };
                let rhs_ok = if a.is_positive() { row.rhs >= -tol.clone() } else { row.rhs <= tol.clone() };
                lone && rhs_ok
            })
            .map(|(j, _)| *j)
            .collect();
        let Some(&j) = candidates.iter().min_by_key(|j| self.occurs[**j].len()) else {
            return false;
        };
        let row = self.drop_row(r);
        let pivot = row.terms[&j].clone();
        let terms: Vec<(usize, T)> = row
            .terms
            .iter()
            .filter(|(k, _)| **k != j)
            .map(|(k, a)| (*k, a.clone()))
            .collect();
        let rhs = row.rhs.clone();

        // Replace x_j everywhere by (rhs - sum terms) / pivot.
        let users: Vec<usize> = self.occurs[j].iter().copied().collect();
        for u in users {
            let target = self.rows[u].as_mut().unwrap();
            let coef = target.terms.remove(&j).unwrap();
            let factor = coef / pivot.clone();
            target.rhs = target.rhs.clone() - factor.clone() * rhs.clone();
            for (k, a) in &terms {
                let before = target.terms.contains_key(k);
                add_to(&mut target.terms, *k, -(factor.clone() * a.clone()), &tol);
                let after = target.terms.contains_key(k);
                if !before && after {
                    self.occurs[*k].insert(u);
                } else if before && !after {
                    self.occurs[*k].remove(&u);
                }
            }
        }
        self.occurs[j].clear();
        if let Some(c) = self.objective.remove(&j) {
            let factor = c / pivot.clone();
            self.objective_constant = self.objective_constant.clone() + factor.clone() * rhs.clone();
            for (k, a) in &terms {
                add_to(&mut self.objective, *k, -(factor.clone() * a.clone()), &tol);
            }
        }
        self.removed[j] = true;
        self.steps.push(Step::Substituted {
            var: j,
            pivot,
            terms,
            rhs,
        });
        true
    }

    fn drop_row(&mut self, r: usize) -> Row<T> {
        let row = self.rows[r].take().unwrap();
        for j in row.terms.keys() {
            self.occurs[*j].remove(&r);
        }
        row
    }

    fn fix(&mut self, j: usize, v: T) {
        let users: Vec<usize> = self.occurs[j].iter().copied().collect();
        for u in users {
            let target = self.rows[u].as_mut().unwrap();
            let a = target.terms.remove(&j).unwrap();
            target.rhs = target.rhs.clone() - a * v.clone();
        }
        self.occurs[j].clear();
        if let Some(c) = self.objective.remove(&j) {
            self.objective_constant = self.objective_constant.clone() + c * v.clone();
        }
        self.removed[j] = true;
        self.steps.push(Step::Fixed(j, v));
    }
}

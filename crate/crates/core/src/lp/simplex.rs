//! Dense two-phase tableau simplex, generic over the scalar type.
//!
//! Pricing is Dantzig's rule until a run of degenerate pivots, then Bland's
//! rule for the rest of the solve, which rules out cycling. Pivots skip zero
//! entries, which keeps the exact-rational case tolerable on the sparse flow
//! LPs this crate produces. In exact mode the problem is first solved in
//! floating point; the final float basis is then pivoted in exactly and the
//! exact simplex continues from there (usually with no further pivots).

use super::model::{LpModel, LpSolution, LpStatus, Relation};
use super::presolve::{presolve, Presolved, Reduced};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Something that can solve an [`LpModel`].
pub trait LpBackend {
    fn solve<T: Scalar>(&self, lp: &LpModel<T>) -> Result<LpSolution<T>>;
}

/// The built-in presolve + dense simplex backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct DenseSimplex;

impl LpBackend for DenseSimplex {
    fn solve<T: Scalar>(&self, lp: &LpModel<T>) -> Result<LpSolution<T>> {
        solve_lp(lp)
    }
}

const DEGENERATE_RUN: usize = 50;
const PIVOT_BUDGET: usize = 1_000_000;

pub fn solve_lp<T: Scalar>(lp: &LpModel<T>) -> Result<LpSolution<T>> {
    let reduced = match presolve(lp) {
        Presolved::Infeasible => return Ok(LpSolution::infeasible()),
        Presolved::Reduced(r) => r,
    };
    let form = StandardForm::new(&reduced);
    let outcome = if T::EXACT {
        let float = form.map(|v| v.to_f64());
        let hint = run_simplex(&float, None)?;
        run_simplex(&form, Some(&hint.basis))?
    } else {
        run_simplex(&form, None)?
    };
    match outcome.status {
        LpStatus::Infeasible => Ok(LpSolution::infeasible()),
        LpStatus::Optimal => {
            let values = reduced.postsolve(&outcome.values[..reduced.columns.len()]);
            let objective = lp.objective_value(&values);
            Ok(LpSolution {
                status: LpStatus::Optimal,
                objective,
                values,
            })
        }
    }
}

/// `A x = b`, `b >= 0`, `x >= 0`; columns are structural, then slack or
/// surplus, then artificial.
#[derive(Debug, Clone)]
struct StandardForm<T> {
    rows: Vec<Vec<(usize, T)>>,
    rhs: Vec<T>,
    costs: Vec<T>,
    num_cols: usize,
    artificial_start: usize,
    /// Initial basic column of each row (a slack or an artificial).
    initial_basis: Vec<usize>,
}

impl<T: Scalar> StandardForm<T> {
    fn new(reduced: &Reduced<T>) -> Self {
        let structural = reduced.columns.len();
        let mut position = vec![usize::MAX; reduced.columns.iter().max().map_or(0, |m| m + 1)];
        for (col, j) in reduced.columns.iter().enumerate() {
            position[*j] = col;
        }
        let slacks = reduced
            .rows
            .iter()
            .filter(|r| r.relation != Relation::Eq)
            .count();
        let artificial_start = structural + slacks;
        let mut rows = Vec::with_capacity(reduced.rows.len());
        let mut rhs = Vec::with_capacity(reduced.rows.len());
        let mut initial_basis = Vec::with_capacity(reduced.rows.len());
        let mut next_slack = structural;
        let mut next_artificial = artificial_start;
        for row in &reduced.rows {
            let flip = row.rhs.is_negative();
            let sign = |v: &T| if flip { -v.clone() } else { v.clone() };
            let mut terms: Vec<(usize, T)> =
                row.terms.iter().map(|(j, a)| (position[*j], sign(a))).collect();
            let relation = match (row.relation, flip) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (r, _) => r,
            };
            match relation {
                Relation::Le => {
                    terms.push((next_slack, T::one()));
                    initial_basis.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    terms.push((next_slack, -T::one()));
                    next_slack += 1;
                    terms.push((next_artificial, T::one()));
                    initial_basis.push(next_artificial);
                    next_artificial += 1;
                }
                Relation::Eq => {
                    terms.push((next_artificial, T::one()));
                    initial_basis.push(next_artificial);
                    next_artificial += 1;
                }
            }
            rows.push(terms);
            rhs.push(sign(&row.rhs));
        }
        let mut costs = vec![T::zero(); next_artificial];
        for (j, c) in &reduced.objective {
            costs[position[*j]] = c.clone();
        }
        StandardForm {
            rows,
            rhs,
            costs,
            num_cols: next_artificial,
            artificial_start,
            initial_basis,
        }
    }

    fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> StandardForm<U> {
        StandardForm {
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|(j, a)| (*j, f(a))).collect())
                .collect(),
            rhs: self.rhs.iter().map(&f).collect(),
            costs: self.costs.iter().map(&f).collect(),
            num_cols: self.num_cols,
            artificial_start: self.artificial_start,
            initial_basis: self.initial_basis.clone(),
        }
    }
}

struct Outcome<T> {
    status: LpStatus,
    values: Vec<T>,
    basis: Vec<usize>,
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    active: Vec<bool>,
    enterable: Vec<bool>,
    reduced_costs: Vec<T>,
    value: T,
    tol: T,
    bland: bool,
    degenerate_run: usize,
    pivots: usize,
}

fn run_simplex<T: Scalar>(form: &StandardForm<T>, hint: Option<&[usize]>) -> Result<Outcome<T>> {
    let mut tableau = Tableau::new(form);
    if let Some(hint) = hint {
        if !tableau.crash(hint) {
            tableau = Tableau::new(form);
        }
    }

    let mut phase_one = vec![T::zero(); form.num_cols];
    for c in phase_one.iter_mut().skip(form.artificial_start) {
        *c = T::one();
    }
    tableau.price(&phase_one);
    tableau.optimize()?;
    if tableau.value > tableau.tol {
        return Ok(Outcome {
            status: LpStatus::Infeasible,
            values: Vec::new(),
            basis: tableau.basis.clone(),
        });
    }
    tableau.drive_out_artificials(form.artificial_start);
    for j in form.artificial_start..form.num_cols {
        tableau.enterable[j] = false;
    }
    tableau.price(&form.costs);
    tableau.optimize()?;

    let mut values = vec![T::zero(); form.num_cols];
    for r in (0..tableau.rows.len()).filter(|r| tableau.active[*r]) {
        values[tableau.basis[r]] = tableau.rhs[r].clone();
    }
    Ok(Outcome {
        status: LpStatus::Optimal,
        values,
        basis: tableau.basis,
    })
}

impl<T: Scalar> Tableau<T> {
    fn new(form: &StandardForm<T>) -> Self {
        let m = form.rows.len();
        let mut rows = vec![vec![T::zero(); form.num_cols]; m];
        for (r, terms) in form.rows.iter().enumerate() {
            for (j, a) in terms {
                rows[r][*j] = a.clone();
            }
        }
        Tableau {
            rows,
            rhs: form.rhs.clone(),
            basis: form.initial_basis.clone(),
            active: vec![true; m],
            enterable: vec![true; form.num_cols],
            reduced_costs: vec![T::zero(); form.num_cols],
            value: T::zero(),
            tol: T::default_tolerance(),
            bland: false,
            degenerate_run: 0,
            pivots: 0,
        }
    }

    /// Pivots the hinted columns into the basis. Fails if the resulting
    /// basic solution is not primal feasible (or a column cannot enter).
    fn crash(&mut self, hint: &[usize]) -> bool {
        let m = self.rows.len();
        let mut in_basis = vec![false; self.reduced_costs.len()];
        for &j in &self.basis {
            in_basis[j] = true;
        }
        let mut wanted = vec![false; self.reduced_costs.len()];
        for &j in hint {
            wanted[j] = true;
        }
        for &j in hint {
            if in_basis[j] {
                continue;
            }
            let row = (0..m).find(|&r| !wanted[self.basis[r]] && !self.rows[r][j].is_zero());
            let Some(r) = row else {
                return false;
            };
            in_basis[self.basis[r]] = false;
            self.pivot(r, j);
            in_basis[j] = true;
        }
        self.rhs.iter().all(|b| !b.is_negative())
    }

    /// Reduced costs and objective value for the current basis.
    fn price(&mut self, costs: &[T]) {
        self.reduced_costs = costs.to_vec();
        self.value = T::zero();
        for r in (0..self.rows.len()).filter(|r| self.active[*r]) {
            let cb = costs[self.basis[r]].clone();
            if cb.is_zero() {
                continue;
            }
            for (j, a) in self.rows[r].iter().enumerate() {
                if !a.is_zero() {
                    self.reduced_costs[j] = self.reduced_costs[j].clone() - cb.clone() * a.clone();
                }
            }
            self.value = self.value.clone() + cb * self.rhs[r].clone();
        }
        for &j in &self.basis {
            self.reduced_costs[j] = T::zero();
        }
        self.degenerate_run = 0;
    }

    fn optimize(&mut self) -> Result<()> {
        loop {
            let Some(col) = self.entering() else {
                return Ok(());
            };
            let Some(row) = self.leaving(col) else {
                return Err(Error::Unbounded);
            };
            if self.rhs[row].is_zero() {
                self.degenerate_run += 1;
                if self.degenerate_run >= DEGENERATE_RUN {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
            }
            self.pivot(row, col);
            self.pivots += 1;
            if self.pivots > PIVOT_BUDGET {
                return Err(Error::CapExceeded {
                    what: "simplex pivoting",
                    cap: PIVOT_BUDGET as u64,
                });
            }
        }
    }

    fn entering(&self) -> Option<usize> {
        let threshold = -self.tol.clone();
        let mut best: Option<usize> = None;
        for (j, d) in self.reduced_costs.iter().enumerate() {
            if !self.enterable[j] || *d >= threshold || d.is_zero() {
                continue;
            }
            if self.bland {
                return Some(j);
            }
            if best.is_none_or(|b| *d < self.reduced_costs[b]) {
                best = Some(j);
            }
        }
        best
    }

    /// Minimum-ratio row; ties go to the smallest basic column index.
    fn leaving(&self, col: usize) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for r in (0..self.rows.len()).filter(|r| self.active[*r]) {
            let a = &self.rows[r][col];
            if *a <= self.tol {
                continue;
            }
            let ratio = self.rhs[r].clone() / a.clone();
            let better = match &best {
                None => true,
                Some((b, best_ratio)) => {
                    ratio < *best_ratio || (ratio == *best_ratio && self.basis[r] < self.basis[*b])
                }
            };
            if better {
                best = Some((r, ratio));
            }
        }
        best.map(|(r, _)| r)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let inv = T::one() / self.rows[row][col].clone();
        let nonzero: Vec<usize> = (0..self.rows[row].len())
            .filter(|j| !self.rows[row][*j].is_zero())
            .collect();
        for &j in &nonzero {
            self.rows[row][j] = self.rows[row][j].clone() * inv.clone();
        }
        self.rows[row][col] = T::one();
        self.rhs[row] = self.rhs[row].clone() * inv;

        let pivot_row = std::mem::take(&mut self.rows[row]);
        let pivot_rhs = self.rhs[row].clone();
        for r in 0..self.rows.len() {
            if r == row || !self.active[r] {
                continue;
            }
            let factor = self.rows[r][col].clone();
            if factor.is_zero() {
                continue;
            }
            let target = &mut self.rows[r];
            for &j in &nonzero {
                target[j] = clean(target[j].clone() - factor.clone() * pivot_row[j].clone());
            }
            target[col] = T::zero();
            self.rhs[r] = clean(self.rhs[r].clone() - factor * pivot_rhs.clone());
        }
        let factor = self.reduced_costs[col].clone();
        if !factor.is_zero() {
            for &j in &nonzero {
                self.reduced_costs[j] =
                    clean(self.reduced_costs[j].clone() - factor.clone() * pivot_row[j].clone());
            }
            self.reduced_costs[col] = T::zero();
            self.value = self.value.clone() + factor * pivot_rhs;
        }
        self.rows[row] = pivot_row;
        self.basis[row] = col;
    }

    /// After phase one: replace zero-level basic artificials by structural
    /// columns, deactivating rows that turn out to be redundant.
    fn drive_out_artificials(&mut self, artificial_start: usize) {
        for r in 0..self.rows.len() {
            if !self.active[r] || self.basis[r] < artificial_start {
                continue;
            }
            let replacement = (0..artificial_start).find(|&j| self.rows[r][j].abs() > self.tol);
            match replacement {
                Some(j) => self.pivot(r, j),
                None => self.active[r] = false,
            }
        }
    }
}

fn clean<T: Scalar>(v: T) -> T {
    if !T::EXACT && v.to_f64().abs() < 1e-12 {
        T::zero()
    } else {
        v
    }
}

//! CVaR via one LP per VaR guess.
//!
//! For a guess `n` the LP ranges over all policies whose goal-reaching
//! probability brackets `1 - t` between index `n - 1` and `n`, and minimizes
//! the expected cost still to come at index `n`. A feasible LP with value
//! `E` yields a policy with CVaR `n + E/t`. Guesses start at the smallest `n`
//! at which the goal can be reached with probability `1 - t` at all and stop
//! once `n` exceeds the best CVaR found, since no optimal policy has a VaR
//! above any achievable CVaR.

use std::collections::BTreeMap;

use super::model::{LpModel, LpSolution, Relation};
use super::simplex::solve_lp;
use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::policy::{Indexing, Policy};
use crate::risk::RiskResult;
use crate::scalar::{definitely_lt, Scalar};
use crate::ssp::{solve_ssp, SspValues};

/// Which LP family to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpMode {
    /// All non-goal actions cost 1; indices count steps and goal states
    /// keep their mass through the self-loop action.
    Uniform,
    /// Indices are accumulated costs. Mass that crosses index `n - 1`
    /// lands in an overshoot window `n .. n + C_max` priced by the
    /// objective.
    TotalCost,
}

impl LpMode {
    pub fn for_model<T: Scalar>(m: &Mdp<T>) -> Self {
        if m.is_uniform_cost() {
            LpMode::Uniform
        } else {
            LpMode::TotalCost
        }
    }
}

/// An LP for one VaR guess, with the variable layout needed to read a
/// policy back out of its solution.
#[derive(Debug, Clone)]
pub struct CvarLp<T> {
    pub model: LpModel<T>,
    pub mode: LpMode,
    pub n: u64,
    /// `state_vars[s][i]` is `p_{s,i}`.
    state_vars: Vec<Vec<Option<usize>>>,
    /// `action_vars[s][a][i]` is `p_{s,a,i}` for `i < n`.
    action_vars: Vec<Vec<Vec<usize>>>,
}

impl<T: Scalar> CvarLp<T> {
    pub fn state_var(&self, s: usize, i: u64) -> Option<usize> {
        self.state_vars[s].get(i as usize).copied().flatten()
    }

    pub fn action_var(&self, s: usize, a: usize, i: u64) -> Option<usize> {
        self.action_vars[s].get(a)?.get(i as usize).copied()
    }

    /// Prefix table `p_{s,a,i} / p_{s,i}` over reachable `(i, s)`; the rest
    /// of the policy is the expectation-optimal tail.
    pub fn extract_policy(&self, m: &Mdp<T>, solution: &LpSolution<T>, tail: &[usize]) -> Policy<T> {
        let indexing = match self.mode {
            LpMode::Uniform => Indexing::Step,
            LpMode::TotalCost => Indexing::AccumulatedCost,
        };
        let tol = T::default_tolerance();
        let mut prefix = BTreeMap::new();
        for s in (0..m.num_states()).filter(|&s| !m.is_goal(s)) {
            for i in 0..self.n {
                let weights: Vec<(usize, T)> = (0..m.actions(s).len())
                    .filter_map(|a| {
                        let v = solution.values[self.action_vars[s][a][i as usize]].clone();
                        (v > tol).then_some((a, v))
                    })
                    .collect();
                let total = weights.iter().fold(T::zero(), |acc, (_, v)| acc + v.clone());
                if total <= tol {
                    continue;
                }
                let row = weights
                    .into_iter()
                    .map(|(a, v)| (a, v / total.clone()))
                    .collect();
                prefix.insert((i, s), row);
            }
        }
        Policy {
            indexing,
            horizon: self.n,
            prefix,
            tail: tail.to_vec(),
        }
    }
}

/// Builds the LP for VaR guess `n >= 1`.
pub fn build_lp<T: Scalar>(m: &Mdp<T>, e: &[T], t: &T, n: u64, mode: LpMode) -> Result<CvarLp<T>> {
    if n == 0 {
        return Err(Error::Argument("VaR guess must be at least 1".into()));
    }
    if mode == LpMode::Uniform && !m.is_uniform_cost() {
        return Err(Error::NonUniformCost);
    }
    match mode {
        LpMode::Uniform => build_uniform(m, e, t, n),
        LpMode::TotalCost => build_total_cost(m, e, t, n),
    }
}

fn build_uniform<T: Scalar>(m: &Mdp<T>, e: &[T], t: &T, n: u64) -> Result<CvarLp<T>> {
    let states = m.num_states();
    let len = n as usize;
    let mut lp = LpModel::new();
    let state_vars: Vec<Vec<Option<usize>>> = (0..states)
        .map(|s| (0..=len).map(|i| Some(lp.add_variable(format!("p_s{s}_i{i}")))).collect())
        .collect();
    let action_vars: Vec<Vec<Vec<usize>>> = (0..states)
        .map(|s| {
            (0..m.actions(s).len())
                .map(|a| (0..len).map(|i| lp.add_variable(format!("p_s{s}_a{a}_i{i}"))).collect())
                .collect()
        })
        .collect();
    let var = |s: usize, i: usize| state_vars[s][i].unwrap();

    for s in 0..states {
        let rhs = if s == m.initial() { T::one() } else { T::zero() };
        lp.add_constraint(format!("init_s{s}"), vec![(var(s, 0), T::one())], Relation::Eq, rhs)?;
    }
    for i in 0..len {
        for s in 0..states {
            let mut terms = vec![(var(s, i), T::one())];
            terms.extend(action_vars[s].iter().map(|per_i| (per_i[i], -T::one())));
            lp.add_constraint(format!("split_s{s}_i{i}"), terms, Relation::Eq, T::zero())?;
        }
        let mut inflow: Vec<Vec<(usize, T)>> =
            (0..states).map(|target| vec![(var(target, i + 1), T::one())]).collect();
        for s in 0..states {
            for (a, action) in m.actions(s).iter().enumerate() {
                for (target, p) in &action.successors {
                    inflow[*target].push((action_vars[s][a][i], -p.clone()));
                }
            }
        }
        for (target, terms) in inflow.into_iter().enumerate() {
            lp.add_constraint(format!("flow_s{target}_i{}", i + 1), terms, Relation::Eq, T::zero())?;
        }
    }
    let goals: Vec<usize> = m.goals().collect();
    let level = T::one() - t.clone();
    let reach = |i: usize| goals.iter().map(|g| (var(*g, i), T::one())).collect::<Vec<_>>();
    lp.add_constraint("reach_below", reach(len - 1), Relation::Le, level.clone())?;
    lp.add_constraint("reach_at", reach(len), Relation::Ge, level)?;
    let objective = (0..states)
        .filter(|&s| !e[s].is_zero())
        .map(|s| (var(s, len), e[s].clone()))
        .collect();
    lp.set_objective(objective)?;
    Ok(CvarLp {
        model: lp,
        mode: LpMode::Uniform,
        n,
        state_vars,
        action_vars,
    })
}

fn build_total_cost<T: Scalar>(m: &Mdp<T>, e: &[T], t: &T, n: u64) -> Result<CvarLp<T>> {
    let states = m.num_states();
    let len = n as usize;
    let window = m.c_max().max(1) as usize;
    let end = len + window; // state indices 0 .. end
    let mut lp = LpModel::new();
    let state_vars: Vec<Vec<Option<usize>>> = (0..states)
        .map(|s| (0..end).map(|i| Some(lp.add_variable(format!("p_s{s}_i{i}")))).collect())
        .collect();
    let action_vars: Vec<Vec<Vec<usize>>> = (0..states)
        .map(|s| {
            if m.is_goal(s) {
                return Vec::new();
            }
            (0..m.actions(s).len())
                .map(|a| (0..len).map(|i| lp.add_variable(format!("p_s{s}_a{a}_i{i}"))).collect())
                .collect()
        })
        .collect();
    let var = |s: usize, i: usize| state_vars[s][i].unwrap();

    for s in 0..states {
        let rhs = if s == m.initial() { T::one() } else { T::zero() };
        lp.add_constraint(format!("init_s{s}"), vec![(var(s, 0), T::one())], Relation::Eq, rhs)?;
    }
    for s in (0..states).filter(|&s| !m.is_goal(s)) {
        for i in 0..len {
            let mut terms = vec![(var(s, i), T::one())];
            terms.extend(action_vars[s].iter().map(|per_i| (per_i[i], -T::one())));
            lp.add_constraint(format!("split_s{s}_i{i}"), terms, Relation::Eq, T::zero())?;
        }
    }
    // inflow[i][target]: sources p_{s,a,j} with j + c(s,a) = i.
    let mut inflow: Vec<Vec<Vec<(usize, T)>>> = vec![vec![Vec::new(); states]; end];
    for s in (0..states).filter(|&s| !m.is_goal(s)) {
        for (a, action) in m.actions(s).iter().enumerate() {
            for j in 0..len {
                let i = j + action.cost as usize;
                for (target, p) in &action.successors {
                    inflow[i][*target].push((action_vars[s][a][j], -p.clone()));
                }
            }
        }
    }
    for (i, per_target) in inflow.into_iter().enumerate().skip(1) {
        for (target, sources) in per_target.into_iter().enumerate() {
            let mut terms = vec![(var(target, i), T::one())];
            terms.extend(sources);
            lp.add_constraint(format!("flow_s{target}_i{i}"), terms, Relation::Eq, T::zero())?;
        }
    }
    let goals: Vec<usize> = m.goals().collect();
    let level = T::one() - t.clone();
    let reach = |upto: usize| {
        goals
            .iter()
            .flat_map(|g| (0..=upto).map(move |i| (*g, i)))
            .map(|(g, i)| (var(g, i), T::one()))
            .collect::<Vec<_>>()
    };
    lp.add_constraint("reach_below", reach(len - 1), Relation::Le, level.clone())?;
    lp.add_constraint("reach_at", reach(len), Relation::Ge, level)?;
    let mut objective = Vec::new();
    for s in 0..states {
        for c in 0..window {
            let weight = e[s].clone() + T::from_usize(c);
            if !weight.is_zero() {
                objective.push((var(s, len + c), weight));
            }
        }
    }
    lp.set_objective(objective)?;
    Ok(CvarLp {
        model: lp,
        mode: LpMode::TotalCost,
        n,
        state_vars,
        action_vars,
    })
}

/// Smallest `n` such that some policy reaches the goal within cost `n`
/// with probability at least `level`, by cost-bounded maximal-reachability
/// value iteration. `None` if that does not happen by `cap`.
pub fn min_reach_budget<T: Scalar>(m: &Mdp<T>, level: &T, cap: u64) -> Option<u64> {
    let states = m.num_states();
    let depth = m.c_max().max(1) as usize;
    // history[k % depth] = R_k, where R_k(s) is the best probability of
    // reaching the goal within cost k.
    let goal_row: Vec<T> = (0..states)
        .map(|s| if m.is_goal(s) { T::one() } else { T::zero() })
        .collect();
    let mut history: Vec<Vec<T>> = vec![goal_row; depth];
    let tol = T::default_tolerance();
    for k in 1..=cap {
        let mut next = vec![T::zero(); states];
        for s in 0..states {
            if m.is_goal(s) {
                next[s] = T::one();
                continue;
            }
            let mut best = T::zero();
            for action in m.actions(s) {
                if action.cost > k {
                    continue;
                }
                let prev = &history[((k - action.cost) as usize) % depth];
                let value = action
                    .successors
                    .iter()
                    .fold(T::zero(), |acc, (t, p)| acc + p.clone() * prev[*t].clone());
                if value > best {
                    best = value;
                }
            }
            next[s] = best;
        }
        let reached = next[m.initial()].clone();
        history[(k as usize) % depth] = next;
        if reached.clone() + tol.clone() >= *level {
            return Some(k);
        }
    }
    None
}

/// One solved guess.
#[derive(Debug, Clone, PartialEq)]
pub struct GuessRecord<T> {
    pub n: u64,
    /// `n + E/t` when the LP was feasible.
    pub candidate: Option<T>,
}

#[derive(Debug, Clone)]
pub struct LpCvarResult<T> {
    pub result: RiskResult<T>,
    pub policy: Policy<T>,
    pub guesses: Vec<GuessRecord<T>>,
}

/// The LP engine for one model: holds the SSP values shared by all guesses.
#[derive(Debug, Clone)]
pub struct LpEngine<'a, T> {
    model: &'a Mdp<T>,
    ssp: SspValues<T>,
    mode: LpMode,
}

impl<'a, T: Scalar> LpEngine<'a, T> {
    pub fn new(model: &'a Mdp<T>) -> Result<Self> {
        let ssp = solve_ssp(model)?;
        Ok(LpEngine {
            model,
            ssp,
            mode: LpMode::for_model(model),
        })
    }

    pub fn with_mode(mut self, mode: LpMode) -> Result<Self> {
        if mode == LpMode::Uniform && !self.model.is_uniform_cost() {
            return Err(Error::NonUniformCost);
        }
        self.mode = mode;
        Ok(self)
    }

    pub fn ssp(&self) -> &SspValues<T> {
        &self.ssp
    }

    pub fn mode(&self) -> LpMode {
        self.mode
    }

    pub fn build(&self, t: &T, n: u64) -> Result<CvarLp<T>> {
        build_lp(self.model, &self.ssp.values, t, n, self.mode)
    }

    /// Largest VaR guess that can matter: the expectation-optimal policy
    /// has CVaR at most `e(init)/t`, and no optimal policy has a VaR above
    /// an achievable CVaR.
    pub fn guess_cap(&self, t: &T) -> u64 {
        let bound = self.ssp.values[self.model.initial()].clone() / t.clone();
        bound.floor_u64().unwrap_or(u64::MAX / 2).saturating_add(1)
    }

    pub fn lower_bound(&self, t: &T) -> Result<u64> {
        let cap = self.guess_cap(t);
        let level = T::one() - t.clone();
        min_reach_budget(self.model, &level, cap).ok_or(Error::CapExceeded {
            what: "VaR lower-bound search",
            cap,
        })
    }

    pub fn solve(&self, t: &T) -> Result<LpCvarResult<T>> {
        self.solve_observed(t, |_, _| {})
    }

    /// Like [`Self::solve`], handing every LP and its solution to `observe`.
    pub fn solve_observed(
        &self,
        t: &T,
        mut observe: impl FnMut(&CvarLp<T>, &LpSolution<T>),
    ) -> Result<LpCvarResult<T>> {
        if *t <= T::zero() || *t >= T::one() {
            return Err(Error::Threshold(t.to_string()));
        }
        let cap = self.guess_cap(t);
        let tol = T::default_tolerance();
        let mut best: Option<(T, CvarLp<T>, LpSolution<T>)> = None;
        let mut guesses = Vec::new();
        let mut n = self.lower_bound(t)?.max(1);
        loop {
            if let Some((c, _, _)) = &best {
                if T::from_u64(n) > *c {
                    break;
                }
            }
            if n > cap {
                return Err(Error::CapExceeded {
                    what: "VaR guessing",
                    cap,
                });
            }
            let lp = self.build(t, n)?;
            let solution = solve_lp(&lp.model)?;
            observe(&lp, &solution);
            let candidate = solution
                .is_optimal()
                .then(|| T::from_u64(n) + solution.objective.clone() / t.clone());
            guesses.push(GuessRecord {
                n,
                candidate: candidate.clone(),
            });
            if let Some(c) = candidate {
                let improves = match &best {
                    None => true,
                    Some((b, _, _)) => definitely_lt(&c, b, &tol),
                };
                if improves {
                    best = Some((c, lp, solution));
                }
            }
            n += 1;
        }
        let (cvar, lp, solution) = best.expect("loop exits only with a candidate");
        let policy = lp.extract_policy(self.model, &solution, &self.ssp.policy);
        Ok(LpCvarResult {
            result: RiskResult { var: lp.n, cvar },
            policy,
            guesses,
        })
    }
}

/// Optimal CVaR and a witness policy via the LP family.
pub fn solve_cvar_lp<T: Scalar>(m: &Mdp<T>, t: &T) -> Result<LpCvarResult<T>> {
    LpEngine::new(m)?.solve(t)
}

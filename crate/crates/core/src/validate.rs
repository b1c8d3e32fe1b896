//! Checks the standing assumptions every CVaR engine relies on.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A goal state has an action other than a zero-cost self-loop.
    GoalNotAbsorbing { state: usize },
    InitialIsGoal,
    /// No policy reaches the goal almost surely from these states.
    NoProperPolicy { states: Vec<usize> },
    /// A non-goal action has zero cost.
    ZeroCostAction { state: usize, action: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::GoalNotAbsorbing { state } => {
                write!(f, "goal state {state} is not absorbing with cost 0")
            }
            Violation::InitialIsGoal => write!(f, "initial state is a goal state"),
            Violation::NoProperPolicy { states } => write!(
                f,
                "no proper policy: goal not reachable almost surely from states {states:?}"
            ),
            Violation::ZeroCostAction { state, action } => write!(
                f,
                "action '{action}' in non-goal state {state} has zero cost (costs must be zero exactly at goal states)"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// A proper stationary deterministic policy (action index per state),
    /// present whenever one exists.
    pub proper_policy: Option<Vec<usize>>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        if self.is_ok() {
            Ok(self)
        } else {
            Err(Error::Assumption(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "all assumptions hold");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  - {v}")?;
        }
        Ok(())
    }
}

pub fn validate_assumptions<T: Scalar>(m: &Mdp<T>) -> ValidationReport {
    let mut violations = Vec::new();
    for g in m.goals() {
        let absorbing = m
            .actions(g)
            .iter()
            .all(|a| a.cost == 0 && a.successors.len() == 1 && a.successors[0].0 == g);
        if !absorbing {
            violations.push(Violation::GoalNotAbsorbing { state: g });
        }
    }
    if m.is_goal(m.initial()) {
        violations.push(Violation::InitialIsGoal);
    }
    for s in (0..m.num_states()).filter(|&s| !m.is_goal(s)) {
        for action in m.actions(s) {
            if action.cost == 0 {
                violations.push(Violation::ZeroCostAction {
                    state: s,
                    action: action.label.clone(),
                });
            }
        }
    }
    let (winning, proper_policy) = almost_sure_reach(m);
    let losing: Vec<usize> = (0..m.num_states()).filter(|&s| !winning[s]).collect();
    if !losing.is_empty() {
        violations.push(Violation::NoProperPolicy { states: losing });
    }
    ValidationReport {
        violations,
        proper_policy,
    }
}

/// Convenience wrapper: `Ok` iff every assumption holds.
pub fn ensure_valid<T: Scalar>(m: &Mdp<T>) -> Result<ValidationReport> {
    validate_assumptions(m).into_result()
}

/// Greatest fixpoint of "can reach the goal while never leaving the set".
/// Returns the almost-sure winning region and, if it covers every state, a
/// witness policy that strictly decreases the backward-BFS layer with
/// positive probability at each step.
fn almost_sure_reach<T: Scalar>(m: &Mdp<T>) -> (Vec<bool>, Option<Vec<usize>>) {
    let n = m.num_states();
    let mut inside = vec![true; n];
    loop {
        let layer = backward_layers(m, &inside);
        let next: Vec<bool> = layer.iter().map(Option::is_some).collect();
        if next == inside {
            if !inside.iter().all(|&w| w) {
                return (inside, None);
            }
            let policy = (0..n)
                .map(|s| {
                    if m.is_goal(s) {
                        return 0;
                    }
                    let own = layer[s].expect("winning state has a layer");
                    m.actions(s)
                        .iter()
                        .position(|a| {
                            a.successors.iter().any(|(t, _)| layer[*t].is_some_and(|l| l < own))
                        })
                        .expect("winning state has a progress action")
                })
                .collect();
            return (inside, Some(policy));
        }
        inside = next;
    }
}

/// BFS distance to the goal using only actions that stay inside `inside`.
fn backward_layers<T: Scalar>(m: &Mdp<T>, inside: &[bool]) -> Vec<Option<usize>> {
    let n = m.num_states();
    let mut predecessors: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for s in (0..n).filter(|&s| inside[s] && !m.is_goal(s)) {
        for (a, action) in m.actions(s).iter().enumerate() {
            if action.successors.iter().all(|(t, _)| inside[*t]) {
                for (t, _) in &action.successors {
                    predecessors[*t].push((s, a));
                }
            }
        }
    }
    let mut layer = vec![None; n];
    let mut queue = VecDeque::new();
    for g in m.goals() {
        layer[g] = Some(0);
        queue.push_back(g);
    }
    while let Some(t) = queue.pop_front() {
        let next = layer[t].unwrap() + 1;
        for &(s, _) in &predecessors[t] {
            if layer[s].is_none() {
                layer[s] = Some(next);
                queue.push_back(s);
            }
        }
    }
    layer
}

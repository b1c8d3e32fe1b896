//! Classical expected-cost stochastic shortest path.
//!
//! The optimal values `e(s)` and an optimal stationary policy are needed by
//! every CVaR engine: once the VaR budget is spent, only expectation matters.

use crate::error::{Error, Result};
use crate::linalg::{evaluate_stationary, improper_state};
use crate::mdp::Mdp;
use crate::scalar::{definitely_lt, Scalar};
use crate::validate::ensure_valid;

/// Optimal expected cost-to-go and a proper optimal stationary policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SspValues<T> {
    pub values: Vec<T>,
    /// Lowest-index optimal action per state (goal states: the self-loop).
    pub policy: Vec<usize>,
}

impl<T: Scalar> SspValues<T> {
    pub fn value(&self, s: usize) -> &T {
        &self.values[s]
    }
}

const VI_SWEEP_BUDGET: usize = 100_000;
const VI_RESIDUAL: f64 = 1e-9;

/// Solves the SSP exactly (rational scalars) or to floating tolerance.
///
/// A floating-point value iteration supplies the starting policy, then
/// policy iteration in the target scalar type finishes the job: usually a
/// single evaluation when the iteration converged.
pub fn solve_ssp<T: Scalar>(m: &Mdp<T>) -> Result<SspValues<T>> {
    let report = ensure_valid(m)?;
    let float = m.to_float();
    let (approx, _) = value_iteration(&float, VI_RESIDUAL, VI_SWEEP_BUDGET);
    let mut policy = greedy_policy(&float, &approx, 1e-12);
    if improper_state(m, &policy).is_some() {
        policy = report
            .proper_policy
            .expect("validated model has a proper policy");
    }
    policy_iteration(m, policy)
}

/// Expected cost of a stationary deterministic policy from every state.
pub fn evaluate_policy_expectation<T: Scalar>(m: &Mdp<T>, policy: &[usize]) -> Result<Vec<T>> {
    evaluate_stationary(m, policy)
}

/// Plain value iteration from zero. Returns the values and whether the
/// absolute residual dropped to `residual` within `max_sweeps`.
pub fn value_iteration(m: &Mdp<f64>, residual: f64, max_sweeps: usize) -> (Vec<f64>, bool) {
    let n = m.num_states();
    let mut values = vec![0.0; n];
    for _ in 0..max_sweeps {
        let mut next = vec![0.0; n];
        let mut delta: f64 = 0.0;
        for s in (0..n).filter(|&s| !m.is_goal(s)) {
            next[s] = m
                .actions(s)
                .iter()
                .map(|a| q_value(a, &values))
                .fold(f64::INFINITY, f64::min);
            delta = delta.max((next[s] - values[s]).abs());
        }
        values = next;
        if delta <= residual {
            return (values, true);
        }
    }
    (values, false)
}

fn q_value<T: Scalar>(action: &crate::mdp::Action<T>, values: &[T]) -> T {
    action
        .successors
        .iter()
        .fold(T::from_u64(action.cost), |acc, (t, p)| {
            acc + p.clone() * values[*t].clone()
        })
}

/// Lowest-index action whose Q-value is within `tol` of the minimum.
fn greedy_policy<T: Scalar>(m: &Mdp<T>, values: &[T], tol: T) -> Vec<usize> {
    (0..m.num_states())
        .map(|s| {
            if m.is_goal(s) {
                return 0;
            }
            let q: Vec<T> = m.actions(s).iter().map(|a| q_value(a, values)).collect();
            let best = q
                .iter()
                .cloned()
                .reduce(|x, y| if y < x { y } else { x })
                .expect("non-goal state has actions");
            q.iter()
                .position(|v| v.clone() <= best.clone() + tol.clone())
                .unwrap()
        })
        .collect()
}

fn policy_iteration<T: Scalar>(m: &Mdp<T>, mut policy: Vec<usize>) -> Result<SspValues<T>> {
    let tol = T::default_tolerance();
    // Each improving switch strictly decreases the value vector, so the
    // number of rounds is bounded by the number of deterministic policies;
    // in practice a handful suffices.
    for _round in 0..10_000 {
        let values = evaluate_stationary(m, &policy)?;
        let mut changed = false;
        for s in (0..m.num_states()).filter(|&s| !m.is_goal(s)) {
            let q: Vec<T> = m.actions(s).iter().map(|a| q_value(a, &values)).collect();
            let (best_idx, best) = q
                .iter()
                .enumerate()
                .fold(None::<(usize, &T)>, |acc, (i, v)| match acc {
                    Some((_, b)) if v >= b => acc,
                    _ => Some((i, v)),
                })
                .expect("non-goal state has actions");
            if definitely_lt(best, &q[policy[s]], &tol) {
                policy[s] = best_idx;
                changed = true;
            }
        }
        if !changed {
            let policy = greedy_policy(m, &values, tol);
            return Ok(SspValues { values, policy });
        }
    }
    Err(Error::CapExceeded {
        what: "policy iteration",
        cap: 10_000,
    })
}

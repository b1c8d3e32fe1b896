//! Small dense solvers and the SCC-ordered policy evaluation built on them.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::scalar::Scalar;

/// Solves `a x = b` by Gaussian elimination. Exact scalars pivot on the
/// first nonzero entry, floats on the largest magnitude. Returns `None` for
/// singular systems.
pub fn solve_dense<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let pivot = if T::EXACT {
            (col..n).find(|&r| !a[r][col].is_zero())?
        } else {
            let (row, value) = (col..n)
                .map(|r| (r, a[r][col].abs()))
                .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap_or(std::cmp::Ordering::Equal))?;
            if value.is_zero() {
                return None;
            }
            row
        };
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = T::one() / a[col][col].clone();
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone() * inv.clone();
            for c in col..n {
                if a[col][c].is_zero() {
                    continue;
                }
                let delta = factor.clone() * a[col][c].clone();
                a[r][c] = a[r][c].clone() - delta;
            }
            b[r] = b[r].clone() - factor * b[col].clone();
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r].clone();
        for c in r + 1..n {
            if !a[r][c].is_zero() {
                acc = acc - a[r][c].clone() * x[c].clone();
            }
        }
        x[r] = acc / a[r][r].clone();
    }
    Some(x)
}

/// First non-goal state from which no goal is reachable in the graph of the
/// stationary policy, if any.
pub fn improper_state<T: Scalar>(m: &Mdp<T>, policy: &[usize]) -> Option<usize> {
    let n = m.num_states();
    let mut predecessors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in (0..n).filter(|&s| !m.is_goal(s)) {
        for (t, _) in &m.action(s, policy[s]).successors {
            predecessors[*t].push(s);
        }
    }
    let mut reaches = vec![false; n];
    let mut stack: Vec<usize> = m.goals().collect();
    for &g in &stack {
        reaches[g] = true;
    }
    while let Some(t) = stack.pop() {
        for &s in &predecessors[t] {
            if !reaches[s] {
                reaches[s] = true;
                stack.push(s);
            }
        }
    }
    reaches.iter().position(|r| !r)
}

/// Expected accumulated cost to the goal under a stationary deterministic
/// policy, i.e. the solution of `(I - Q) x = c`. Strongly connected
/// components are solved sink-first so each dense solve stays small.
pub fn evaluate_stationary<T: Scalar>(m: &Mdp<T>, policy: &[usize]) -> Result<Vec<T>> {
    let n = m.num_states();
    if policy.len() != n {
        return Err(Error::PolicyMismatch(format!(
            "policy covers {} states, model has {n}",
            policy.len()
        )));
    }
    for (s, &a) in policy.iter().enumerate() {
        if a >= m.actions(s).len() {
            return Err(Error::PolicyMismatch(format!(
                "state {s} has no action with index {a}"
            )));
        }
    }
    if let Some(state) = improper_state(m, policy) {
        return Err(Error::ImproperPolicy { state });
    }

    let mut graph = DiGraph::<usize, ()>::with_capacity(n, n);
    let nodes: Vec<_> = (0..n).map(|s| graph.add_node(s)).collect();
    for s in (0..n).filter(|&s| !m.is_goal(s)) {
        for (t, _) in &m.action(s, policy[s]).successors {
            if !m.is_goal(*t) {
                graph.add_edge(nodes[s], nodes[*t], ());
            }
        }
    }

    let mut values = vec![T::zero(); n];
    let mut position = vec![usize::MAX; n];
    for component in tarjan_scc(&graph) {
        let states: Vec<usize> = component.iter().map(|ix| graph[*ix]).collect();
        if states.iter().any(|&s| m.is_goal(s)) {
            continue;
        }
        for (i, &s) in states.iter().enumerate() {
            position[s] = i;
        }
        let k = states.len();
        let mut a = vec![vec![T::zero(); k]; k];
        let mut b = vec![T::zero(); k];
        for (i, &s) in states.iter().enumerate() {
            let action = m.action(s, policy[s]);
            a[i][i] = T::one();
            b[i] = T::from_u64(action.cost);
            for (t, p) in &action.successors {
                if m.is_goal(*t) {
                    continue;
                }
                let j = position[*t];
                if j < k && states[j] == *t {
                    a[i][j] = a[i][j].clone() - p.clone();
                } else {
                    b[i] = b[i].clone() + p.clone() * values[*t].clone();
                }
            }
        }
        let solution = solve_dense(a, b).ok_or(Error::ImproperPolicy { state: states[0] })?;
        for (i, &s) in states.iter().enumerate() {
            values[s] = solution[i].clone();
            position[s] = usize::MAX;
        }
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn dense_exact_and_float() {
        let a = vec![vec![q(2, 1), q(1, 1)], vec![q(1, 1), q(3, 1)]];
        let b = vec![q(3, 1), q(5, 1)];
        assert_eq!(solve_dense(a, b), Some(vec![q(4, 5), q(7, 5)]));
        let x = solve_dense(vec![vec![0.0, 1.0], vec![2.0, 0.0]], vec![3.0, 4.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 3.0).abs() < 1e-12);
        assert!(solve_dense(vec![vec![q(1, 1), q(2, 1)], vec![q(2, 1), q(4, 1)]], vec![q(0, 1), q(0, 1)]).is_none());
    }
}

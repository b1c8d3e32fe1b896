//! Reference computations used by several test targets. Everything here is
//! deliberately naive and shares no code with the engines.

#![allow(dead_code)]

use std::collections::BTreeMap;

use cvar_core::{BigRational, Indexing, Mdp, Policy};
use num_bigint::BigInt;
use num_traits::{One, Zero};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Solves `A x = b` by Gauss-Jordan elimination; `None` if singular.
pub fn solve_linear(mut a: Vec<Vec<Q>>, mut b: Vec<Q>) -> Option<Vec<Q>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = Q::one() / a[col][col].clone();
        for k in col..n {
            a[col][k] = a[col][k].clone() * inv.clone();
        }
        b[col] = b[col].clone() * inv;
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for k in col..n {
                    let v = a[col][k].clone() * f.clone();
                    a[r][k] = a[r][k].clone() - v;
                }
                let v = b[col].clone() * f;
                b[r] = b[r].clone() - v;
            }
        }
    }
    Some(b)
}

/// States from which the goal is reached with probability one when `choice`
/// picks the action everywhere.
fn is_proper(m: &Mdp<Q>, choice: &[usize]) -> bool {
    let n = m.num_states();
    let mut reaches = vec![false; n];
    for s in m.goals() {
        reaches[s] = true;
    }
    loop {
        let mut changed = false;
        for s in 0..n {
            if !reaches[s]
                && m.action(s, choice[s]).successors.iter().any(|(k, _)| reaches[*k])
            {
                reaches[s] = true;
                changed = true;
            }
        }
        if !changed {
            return reaches.iter().all(|r| *r);
        }
    }
}

/// Expected total cost of a stationary deterministic policy, `None` if it
/// is not proper.
pub fn expectation(m: &Mdp<Q>, choice: &[usize]) -> Option<Vec<Q>> {
    if !is_proper(m, choice) {
        return None;
    }
    let n = m.num_states();
    let mut a = vec![vec![Q::zero(); n]; n];
    let mut b = vec![Q::zero(); n];
    for s in 0..n {
        a[s][s] = Q::one();
        if m.is_goal(s) {
            continue;
        }
        let act = m.action(s, choice[s]);
        b[s] = Q::from_integer(BigInt::from(act.cost));
        for (k, p) in &act.successors {
            if !m.is_goal(*k) {
                a[s][*k] = a[s][*k].clone() - p.clone();
            }
        }
    }
    solve_linear(a, b)
}

/// Every stationary deterministic policy (goal states pinned to action 0).
pub fn stationary_policies(m: &Mdp<Q>) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for s in 0..m.num_states() {
        let k = if m.is_goal(s) { 1 } else { m.actions(s).len() };
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |a| {
                    let mut p = p.clone();
                    p.push(a);
                    p
                })
            })
            .collect();
    }
    out
}

/// Proper stationary policies with their expectations.
pub fn proper_policies(m: &Mdp<Q>) -> Vec<(Vec<usize>, Vec<Q>)> {
    stationary_policies(m)
        .into_iter()
        .filter_map(|p| expectation(m, &p).map(|e| (p.clone(), e)))
        .collect()
}

/// Minimal expected total cost per state, by enumerating stationary policies.
pub fn optimal_expectation(m: &Mdp<Q>) -> Vec<Q> {
    let all = proper_policies(m);
    (0..m.num_states())
        .map(|s| all.iter().map(|(_, e)| e[s].clone()).min().expect("a proper policy"))
        .collect()
}

/// Cost distribution of a stationary deterministic policy from the initial
/// state: survival `P[X > k]` is produced lazily.
pub struct Survival {
    /// `(cost, state) -> mass` still in flight.
    pending: BTreeMap<u64, Vec<Q>>,
    /// Mass absorbed at each cost so far.
    absorbed: Q,
    /// Next cost whose survival is not yet known.
    next: u64,
}

impl Survival {
    pub fn start(m: &Mdp<Q>, at: usize, cost: u64) -> Self {
        let mut v = vec![Q::zero(); m.num_states()];
        v[at] = Q::one();
        let mut pending = BTreeMap::new();
        pending.insert(cost, v);
        Survival { pending, absorbed: Q::zero(), next: 0 }
    }

    /// `P[X > k]` for `k = self.next`, then advances.
    pub fn step(&mut self, m: &Mdp<Q>, choice: &[usize]) -> Q {
        let k = self.next;
        if let Some(layer) = self.pending.remove(&k) {
            for (s, p) in layer.into_iter().enumerate() {
                if p.is_zero() {
                    continue;
                }
                if m.is_goal(s) {
                    self.absorbed = self.absorbed.clone() + p;
                    continue;
                }
                let act = m.action(s, choice[s]);
                let row = self
                    .pending
                    .entry(k + act.cost)
                    .or_insert_with(|| vec![Q::zero(); m.num_states()]);
                for (t, pt) in &act.successors {
                    row[*t] = row[*t].clone() + p.clone() * pt.clone();
                }
            }
        }
        self.next += 1;
        Q::one() - self.absorbed.clone()
    }
}

/// Exact VaR and CVaR of a chain (every state has exactly one action, any
/// costs): `CVaR = v + (E[X] - sum_{k<v} P[X > k]) / t`.
pub fn chain_risk(m: &Mdp<Q>, t: &Q) -> (u64, Q) {
    let choice = vec![0; m.num_states()];
    let e = expectation(m, &choice).expect("chain reaches the goal");
    let mut surv = Survival::start(m, m.initial(), 0);
    let mut below = Q::zero();
    loop {
        let k = surv.next;
        let s = surv.step(m, &choice);
        if s <= *t {
            let cvar = Q::from_integer(BigInt::from(k)) + (e[m.initial()].clone() - below) / t.clone();
            return (k, cvar);
        }
        below = below + s;
    }
}

/// Optimal CVaR by the budget recursion
/// `W(s, b) = min_a sum p W(s', b - c(a))` with `W(s, b <= 0) = e*(s) - b`,
/// then `min_v v + W(init, v) / t` over integer budgets `v`.
pub fn optimal_cvar(m: &Mdp<Q>, t: &Q) -> Q {
    let e = optimal_expectation(m);
    let n = m.num_states();
    let top = (e[m.initial()].clone() / t.clone()).floor().to_integer();
    let top: u64 = top.try_into().unwrap();
    let top = top + 1;
    // w[b][s] for b = 0..=top; negative budgets use the closed form.
    let mut w: Vec<Vec<Q>> = Vec::new();
    let value = |w: &Vec<Vec<Q>>, s: usize, b: i64| -> Q {
        if m.is_goal(s) {
            return if b >= 0 { Q::zero() } else { Q::from_integer(BigInt::from(-b)) };
        }
        if b <= 0 {
            return e[s].clone() - Q::from_integer(BigInt::from(b));
        }
        w[b as usize][s].clone()
    };
    let mut best: Option<Q> = None;
    for b in 0..=top as i64 {
        let row: Vec<Q> = (0..n)
            .map(|s| {
                if b == 0 || m.is_goal(s) {
                    return value(&w, s, b);
                }
                m.actions(s)
                    .iter()
                    .map(|a| {
                        a.successors.iter().fold(Q::zero(), |acc, (k, p)| {
                            acc + p.clone() * value(&w, *k, b - a.cost as i64)
                        })
                    })
                    .min()
                    .unwrap()
            })
            .collect();
        w.push(row);
        let cand = Q::from_integer(BigInt::from(b)) + w[b as usize][m.initial()].clone() / t.clone();
        if best.as_ref().map_or(true, |x| cand < *x) {
            best = Some(cand);
        }
    }
    best.unwrap()
}

/// Minimum CVaR over every deterministic policy that picks its action from
/// `(accumulated cost, state)` while the cost is below `horizon`, then
/// follows a proper stationary policy. Policies that differ only at
/// unreachable decision points are enumerated once. Returns the minimum and
/// the number of distinct policies evaluated.
pub fn enumerate_policies(m: &Mdp<Q>, t: &Q, horizon: u64) -> (Q, u64) {
    let tails = proper_policies(m);
    let n = m.num_states();
    let mut start = vec![Q::zero(); n];
    start[m.initial()] = Q::one();
    // (goal arrivals by cost, non-goal mass by cost and state)
    type Node = (BTreeMap<u64, Q>, BTreeMap<u64, Vec<Q>>);
    let mut stack: Vec<Node> = vec![(BTreeMap::new(), BTreeMap::from([(0, start)]))];
    let mut best: Option<Q> = None;
    let mut count = 0;
    let mut consider = |v: Q| {
        count += 1;
        if best.as_ref().map_or(true, |b| v < *b) {
            best = Some(v);
        }
    };
    while let Some((goal, mut pending)) = stack.pop() {
        let Some(&c) = pending.keys().next() else {
            consider(tail_cvar(m, &goal, &pending, &tails[0].0, &tails[0].1, t).1);
            continue;
        };
        if c >= horizon {
            for (tail, e) in &tails {
                consider(tail_cvar(m, &goal, &pending, tail, e, t).1);
            }
            continue;
        }
        let layer = pending.remove(&c).unwrap();
        let choosers: Vec<usize> =
            (0..n).filter(|&s| !layer[s].is_zero() && m.actions(s).len() > 1).collect();
        let combos = choosers.iter().fold(vec![vec![0usize; n]], |acc, &s| {
            acc.into_iter()
                .flat_map(|p| {
                    (0..m.actions(s).len()).map(move |a| {
                        let mut p = p.clone();
                        p[s] = a;
                        p
                    })
                })
                .collect()
        });
        for pick in combos {
            let (mut goal, mut next) = (goal.clone(), pending.clone());
            for (s, p) in layer.iter().enumerate() {
                if p.is_zero() {
                    continue;
                }
                let act = m.action(s, pick[s]);
                let at = c + act.cost;
                for (k, pk) in &act.successors {
                    let mass = p.clone() * pk.clone();
                    if m.is_goal(*k) {
                        *goal.entry(at).or_insert_with(Q::zero) += mass;
                    } else {
                        let row = next.entry(at).or_insert_with(|| vec![Q::zero(); n]);
                        row[*k] += mass;
                    }
                }
            }
            stack.push((goal, next));
        }
    }
    (best.unwrap(), count)
}

/// CVaR of the mixture of decided goal arrivals `goal`, mass still in
/// flight at `(cost, state)`, and `tail` followed from there.
fn tail_cvar(
    m: &Mdp<Q>,
    goal: &BTreeMap<u64, Q>,
    pending: &BTreeMap<u64, Vec<Q>>,
    tail: &[usize],
    e: &[Q],
    t: &Q,
) -> (u64, Q) {
    let mut mean: Q = goal.iter().map(|(c, p)| p.clone() * Q::from_integer(BigInt::from(*c))).sum();
    let mut parts: Vec<(Q, Survival)> = Vec::new();
    for (c, row) in pending {
        for (s, p) in row.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            mean += p.clone() * (Q::from_integer(BigInt::from(*c)) + e[s].clone());
            parts.push((p.clone(), Survival::start(m, s, *c)));
        }
    }
    let mut below = Q::zero();
    let mut k = 0u64;
    loop {
        let mut surv: Q = goal.range(k + 1..).map(|(_, p)| p.clone()).sum();
        for (p, s) in parts.iter_mut() {
            surv += p.clone() * s.step(m, tail);
        }
        if surv <= *t {
            return (k, Q::from_integer(BigInt::from(k)) + (mean - below) / t.clone());
        }
        below += surv;
        k += 1;
    }
}

/// Exact VaR and CVaR of a (possibly randomized) prefix policy, by pushing
/// mass through the prefix and closing with the stationary tail.
pub fn policy_risk(m: &Mdp<Q>, pi: &Policy<Q>, t: &Q) -> (u64, Q) {
    let n = m.num_states();
    let by_cost = pi.indexing == Indexing::AccumulatedCost;
    let mut frontier: BTreeMap<u64, BTreeMap<(u64, usize), Q>> = BTreeMap::new();
    frontier.entry(0).or_default().insert((0, m.initial()), Q::one());
    let mut goal: BTreeMap<u64, Q> = BTreeMap::new();
    let mut rest: BTreeMap<u64, Vec<Q>> = BTreeMap::new();
    if m.is_goal(m.initial()) {
        return (0, Q::zero());
    }
    while let Some((index, layer)) = frontier.pop_first() {
        for ((c, s), p) in layer {
            if index >= pi.horizon {
                rest.entry(c).or_insert_with(|| vec![Q::zero(); n])[s] += p;
                continue;
            }
            let row = match pi.prefix.get(&(index, s)) {
                Some(row) => row.clone(),
                None => vec![(pi.tail[s], Q::one())],
            };
            for (a, pa) in row {
                let act = m.action(s, a);
                let at = c + act.cost;
                for (k, pk) in &act.successors {
                    let mass = p.clone() * pa.clone() * pk.clone();
                    if m.is_goal(*k) {
                        *goal.entry(at).or_insert_with(Q::zero) += mass;
                    } else {
                        let next = if by_cost { at } else { index + 1 };
                        *frontier.entry(next).or_default().entry((at, *k)).or_insert_with(Q::zero) += mass;
                    }
                }
            }
        }
    }
    let e = expectation(m, &pi.tail).expect("tail is proper");
    tail_cvar(m, &goal, &rest, &pi.tail, &e, t)
}

/// Whether `(p, e)` lies on or above the lower boundary through `v`
/// (flat to the left of the first vertex, nothing right of the last).
pub fn inside(v: &[(Q, Q)], p: &Q, e: &Q) -> bool {
    if *p <= v[0].0 {
        return *e >= v[0].1;
    }
    for w in v.windows(2) {
        let ((p0, e0), (p1, e1)) = (&w[0], &w[1]);
        if p <= p1 {
            let line = e0.clone() + (e1.clone() - e0.clone()) * (p.clone() - p0.clone()) / (p1.clone() - p0.clone());
            return *e >= line;
        }
    }
    false
}

/// Strictly increasing in both coordinates with strictly increasing slopes.
pub fn is_convex_staircase(v: &[(Q, Q)]) -> bool {
    let increasing = v.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1);
    let slopes: Vec<Q> = v
        .windows(2)
        .map(|w| (w[1].1.clone() - w[0].1.clone()) / (w[1].0.clone() - w[0].0.clone()))
        .collect();
    increasing && slopes.windows(2).all(|s| s[0] < s[1])
}

/// Number of `(cost, state)` pairs below `horizon` with a real choice that
/// some policy can reach: the exponent of the enumeration's size.
pub fn decision_points(m: &Mdp<Q>, horizon: u64) -> usize {
    let n = m.num_states();
    let mut reach = vec![vec![false; n]; horizon as usize];
    reach[0][m.initial()] = true;
    let mut count = 0;
    for c in 0..horizon as usize {
        for s in 0..n {
            if !reach[c][s] || m.is_goal(s) {
                continue;
            }
            count += usize::from(m.actions(s).len() > 1);
            for a in m.actions(s) {
                let at = c + a.cost as usize;
                if at < horizon as usize {
                    for (k, _) in &a.successors {
                        reach[at][*k] = true;
                    }
                }
            }
        }
    }
    count
}

//! Witness policies: a finite Markovian prefix table followed by a
//! stationary deterministic tail.
//!
//! The prefix is indexed either by step count or by accumulated cost. At
//! index `i < horizon` a state with a prefix row draws its action from that
//! row; everything else (indices at or past the horizon, or rows the prefix
//! leaves out because they are unreachable) uses the tail action.
//!
//! Text format:
//!
//! ```text
//! policy
//! indexing step
//! states 2
//! horizon 2
//! cvar 1/4 4
//! prefix
//! 0 0 a 1
//! 1 0 a 1
//! tail
//! 0 a
//! 1 loop
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{evaluate_stationary, improper_state};
use crate::mdp::{Action, Mdp};
use crate::risk::RiskResult;
use crate::scalar::{format_scalar, parse_rational, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Indexing {
    Step,
    AccumulatedCost,
}

impl Indexing {
    fn keyword(self) -> &'static str {
        match self {
            Indexing::Step => "step",
            Indexing::AccumulatedCost => "cost",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy<T> {
    pub indexing: Indexing,
    /// Prefix rows exist only for indices below this.
    pub horizon: u64,
    /// `(index, state)` to a distribution over action indices.
    pub prefix: BTreeMap<(u64, usize), Vec<(usize, T)>>,
    /// Stationary action per state.
    pub tail: Vec<usize>,
}

/// A parsed policy file, with the CVaR it was reported to achieve if the
/// file carries one.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyFile<T> {
    pub policy: Policy<T>,
    pub reported: Vec<(T, T)>,
}

/// What a policy does in one situation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Choice<'a, T> {
    Random(&'a [(usize, T)]),
    Tail(usize),
}

impl<T: Scalar> Policy<T> {
    pub fn stationary(indexing: Indexing, tail: Vec<usize>) -> Self {
        Policy {
            indexing,
            horizon: 0,
            prefix: BTreeMap::new(),
            tail,
        }
    }

    pub fn choice(&self, index: u64, state: usize) -> Choice<'_, T> {
        if index < self.horizon {
            if let Some(row) = self.prefix.get(&(index, state)) {
                return Choice::Random(row);
            }
        }
        Choice::Tail(self.tail[state])
    }

    /// True if every prefix row puts all mass on one action.
    pub fn is_deterministic(&self) -> bool {
        self.prefix.values().all(|row| row.len() == 1)
    }

    /// Checks indices, row sums, indexing against the model's costs, and
    /// that the tail is proper.
    pub fn check(&self, m: &Mdp<T>) -> Result<()> {
        let n = m.num_states();
        if self.tail.len() != n {
            return Err(Error::PolicyMismatch(format!(
                "policy covers {} states, model has {n}",
                self.tail.len()
            )));
        }
        if self.indexing == Indexing::Step && !m.is_uniform_cost() {
            return Err(Error::PolicyMismatch(
                "step-indexed policy on a model with non-uniform costs".into(),
            ));
        }
        for (s, &a) in self.tail.iter().enumerate() {
            if a >= m.actions(s).len() {
                return Err(Error::PolicyMismatch(format!("state {s} has no action {a}")));
            }
        }
        let tol = T::default_tolerance();
        for (&(i, s), row) in &self.prefix {
            if s >= n {
                return Err(Error::PolicyMismatch(format!("prefix row for missing state {s}")));
            }
            if i >= self.horizon {
                return Err(Error::PolicyMismatch(format!(
                    "prefix row at index {i} is past the horizon {}",
                    self.horizon
                )));
            }
            let mut total = T::zero();
            for (a, p) in row {
                if *a >= m.actions(s).len() || p.is_negative() {
                    return Err(Error::PolicyMismatch(format!(
                        "invalid prefix entry at index {i}, state {s}"
                    )));
                }
                total = total + p.clone();
            }
            if (total.clone() - T::one()).abs() > tol {
                return Err(Error::PolicyMismatch(format!(
                    "prefix row at index {i}, state {s} sums to {}",
                    total.to_f64()
                )));
            }
        }
        if let Some(state) = improper_state(m, &self.tail) {
            return Err(Error::ImproperPolicy { state });
        }
        Ok(())
    }

    /// Exact VaR and CVaR of the policy's cost distribution.
    ///
    /// Mass is pushed forward over (state, accumulated cost) until the
    /// horizon has passed and at least `1 - t` of it has reached the goal.
    /// Everything still in flight at that point follows the tail, whose
    /// expected remaining cost closes the CVaR sum.
    pub fn evaluate(&self, m: &Mdp<T>, t: &T) -> Result<RiskResult<T>> {
        if *t <= T::zero() || *t >= T::one() {
            return Err(Error::Threshold(t.to_string()));
        }
        self.check(m)?;
        let remaining = evaluate_stationary(m, &self.tail)?;
        let target = T::one() - t.clone();
        let tol = T::default_tolerance();

        let mut pending: BTreeMap<u64, BTreeMap<usize, T>> = BTreeMap::new();
        let mut arrivals: BTreeMap<u64, T> = BTreeMap::new();
        pending.entry(0).or_default().insert(m.initial(), T::one());
        let mut reached = T::zero();
        let mut level = 0u64;
        let budget = self.level_budget(m, &remaining, t);
        loop {
            let at_level = arrivals.get(&level).cloned().unwrap_or_else(T::zero);
            let cumulative = reached.clone() + at_level;
            if level >= self.horizon && target <= cumulative.clone() + tol.clone() {
                break;
            }
            reached = cumulative;
            if level > budget {
                return Err(Error::CapExceeded {
                    what: "policy evaluation",
                    cap: budget,
                });
            }
            if let Some(states) = pending.remove(&level) {
                for (s, mass) in states {
                    self.push_forward(m, level, s, mass, &mut pending, &mut arrivals);
                }
            }
            level += 1;
        }

        let horizon_end = level;
        let mut cumulative = T::zero();
        let mut var = horizon_end;
        for (&k, p) in arrivals.range(..=horizon_end) {
            cumulative = cumulative + p.clone();
            if target <= cumulative.clone() + tol.clone() {
                var = k;
                break;
            }
        }
        let v = T::from_u64(var);
        let mut excess = T::zero();
        for (&k, p) in arrivals.range(var + 1..) {
            excess = excess + p.clone() * (T::from_u64(k) - v.clone());
        }
        for (&c, states) in &pending {
            for (s, mass) in states {
                let over = T::from_u64(c) - v.clone() + remaining[*s].clone();
                excess = excess + mass.clone() * over;
            }
        }
        Ok(RiskResult {
            var,
            cvar: v + excess / t.clone(),
        })
    }

    fn push_forward(
        &self,
        m: &Mdp<T>,
        level: u64,
        s: usize,
        mass: T,
        pending: &mut BTreeMap<u64, BTreeMap<usize, T>>,
        arrivals: &mut BTreeMap<u64, T>,
    ) {
        let mut step = |action: &Action<T>, weight: T| {
            let next = level + action.cost;
            for (t, p) in &action.successors {
                let moved = weight.clone() * p.clone();
                if m.is_goal(*t) {
                    let entry = arrivals.entry(next).or_insert_with(T::zero);
                    *entry = entry.clone() + moved;
                } else {
                    let entry = pending.entry(next).or_default().entry(*t).or_insert_with(T::zero);
                    *entry = entry.clone() + moved;
                }
            }
        };
        match self.choice(level, s) {
            Choice::Tail(a) => step(m.action(s, a), mass),
            Choice::Random(row) => {
                for (a, p) in row {
                    step(m.action(s, *a), mass.clone() * p.clone());
                }
            }
        }
    }

    /// Generous bound on the number of cost levels evaluation may need.
    fn level_budget(&self, m: &Mdp<T>, remaining: &[T], t: &T) -> u64 {
        let worst = remaining.iter().map(|v| v.to_f64()).fold(0.0, f64::max);
        let bound = self.horizon as f64 + 4.0 * (worst / t.to_f64() + 1.0) * m.c_max() as f64 + 64.0;
        if bound.is_finite() && bound < 1e12 {
            bound as u64
        } else {
            u64::MAX
        }
    }

    /// The Markov chain obtained by running a step-indexed policy on a
    /// uniform-cost model: one copy of each state per prefix index, one for
    /// the tail, and a single goal. Only copies reachable from the initial
    /// state are built; index 0 of the result is the initial copy.
    pub fn induced_chain(&self, m: &Mdp<T>) -> Result<Mdp<T>> {
        self.check(m)?;
        if !m.is_uniform_cost() {
            return Err(Error::NonUniformCost);
        }
        // Copy key: (index, state), with index == horizon meaning "tail".
        let mut ids: BTreeMap<(u64, usize), usize> = BTreeMap::new();
        let mut order: Vec<(u64, usize)> = Vec::new();
        let goal = usize::MAX;
        let mut intern = |key: (u64, usize), order: &mut Vec<(u64, usize)>| -> usize {
            *ids.entry(key).or_insert_with(|| {
                order.push(key);
                order.len() - 1
            })
        };
        intern((0, m.initial()), &mut order);
        let mut rows: Vec<Vec<(usize, T)>> = Vec::new();
        let mut k = 0;
        while k < order.len() {
            let (i, s) = order[k];
            let next_index = if i + 1 >= self.horizon { self.horizon } else { i + 1 };
            let weights: Vec<(usize, T)> = match self.choice(i, s) {
                Choice::Tail(a) => vec![(a, T::one())],
                Choice::Random(row) => row.to_vec(),
            };
            let mut row: Vec<(usize, T)> = Vec::new();
            for (a, w) in weights {
                for (t, p) in &m.action(s, a).successors {
                    let target = if m.is_goal(*t) {
                        goal
                    } else {
                        intern((next_index, *t), &mut order)
                    };
                    row.push((target, w.clone() * p.clone()));
                }
            }
            rows.push(row);
            k += 1;
        }
        let goal_id = order.len();
        let actions: Vec<Vec<Action<T>>> = rows
            .into_iter()
            .map(|row| {
                let successors = row
                    .into_iter()
                    .map(|(t, p)| (if t == goal { goal_id } else { t }, p))
                    .collect();
                vec![Action::new("pi", 1, successors)]
            })
            .chain(std::iter::once(Vec::new()))
            .collect();
        Mdp::new(actions, 0, &[goal_id])
    }

    /// Writes the policy in the text format, using the model's action labels.
    pub fn to_text(&self, m: &Mdp<T>, reported: &[(T, T)]) -> String {
        let mut out = String::from("policy\n");
        let _ = writeln!(out, "indexing {}", self.indexing.keyword());
        let _ = writeln!(out, "states {}", self.tail.len());
        let _ = writeln!(out, "horizon {}", self.horizon);
        for (t, c) in reported {
            let _ = writeln!(out, "cvar {} {}", format_scalar(t), format_scalar(c));
        }
        out.push_str("prefix\n");
        for (&(i, s), row) in &self.prefix {
            for (a, p) in row {
                let _ = writeln!(out, "{i} {s} {} {}", m.action(s, *a).label, format_scalar(p));
            }
        }
        out.push_str("tail\n");
        for (s, &a) in self.tail.iter().enumerate() {
            let _ = writeln!(out, "{s} {}", m.action(s, a).label);
        }
        out
    }
}

/// Parses the policy text format against a model (action labels are
/// resolved to indices).
pub fn parse_policy<T: Scalar>(text: &str, m: &Mdp<T>) -> Result<PolicyFile<T>> {
    #[derive(PartialEq)]
    enum Section {
        Header,
        Prefix,
        Tail,
    }
    let mut section = Section::Header;
    let mut seen_magic = false;
    let mut indexing = None;
    let mut states = None;
    let mut horizon = None;
    let mut reported = Vec::new();
    let mut prefix: BTreeMap<(u64, usize), Vec<(usize, T)>> = BTreeMap::new();
    let mut tail: Vec<Option<usize>> = Vec::new();

    let number = |line: usize, token: &str| -> Result<u64> {
        token
            .parse::<u64>()
            .map_err(|_| Error::parse(line, format!("expected a nonnegative integer, found '{token}'")))
    };
    let scalar = |line: usize, token: &str| -> Result<T> {
        parse_rational(token)
            .map(|r| T::from_ratio(&r))
            .ok_or_else(|| Error::parse(line, format!("invalid number '{token}'")))
    };
    let state_index = |line: usize, token: &str| -> Result<usize> {
        let s = number(line, token)? as usize;
        if s >= m.num_states() {
            return Err(Error::PolicyMismatch(format!(
                "line {line}: state {s} does not exist in the model ({} states)",
                m.num_states()
            )));
        }
        Ok(s)
    };
    let action_index = |line: usize, s: usize, label: &str| -> Result<usize> {
        m.action_index(s, label).ok_or_else(|| {
            Error::PolicyMismatch(format!("line {line}: state {s} has no action '{label}'"))
        })
    };

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if !seen_magic {
            if tokens != ["policy"] {
                return Err(Error::parse(line, "expected 'policy' header"));
            }
            seen_magic = true;
            continue;
        }
        match (tokens[0], tokens.len()) {
            ("prefix", 1) => {
                section = Section::Prefix;
                continue;
            }
            ("tail", 1) => {
                section = Section::Tail;
                continue;
            }
            _ => {}
        }
        match section {
            Section::Header => match (tokens[0], tokens.len()) {
                ("indexing", 2) => {
                    indexing = Some(match tokens[1] {
                        "step" => Indexing::Step,
                        "cost" => Indexing::AccumulatedCost,
                        other => return Err(Error::parse(line, format!("unknown indexing '{other}'"))),
                    })
                }
                ("states", 2) => {
                    let n = number(line, tokens[1])? as usize;
                    if n != m.num_states() {
                        return Err(Error::PolicyMismatch(format!(
                            "policy is for {n} states, model has {}",
                            m.num_states()
                        )));
                    }
                    states = Some(n);
                    tail = vec![None; n];
                }
                ("horizon", 2) => horizon = Some(number(line, tokens[1])?),
                ("cvar", 3) => reported.push((scalar(line, tokens[1])?, scalar(line, tokens[2])?)),
                _ => return Err(Error::parse(line, format!("unexpected line '{content}'"))),
            },
            Section::Prefix => {
                if tokens.len() != 4 {
                    return Err(Error::parse(line, "expected '<index> <state> <action> <probability>'"));
                }
                let i = number(line, tokens[0])?;
                let s = state_index(line, tokens[1])?;
                let a = action_index(line, s, tokens[2])?;
                let p = scalar(line, tokens[3])?;
                prefix.entry((i, s)).or_default().push((a, p));
            }
            Section::Tail => {
                if tokens.len() != 2 {
                    return Err(Error::parse(line, "expected '<state> <action>'"));
                }
                if states.is_none() {
                    return Err(Error::parse(line, "'states' must precede the tail"));
                }
                let s = state_index(line, tokens[0])?;
                tail[s] = Some(action_index(line, s, tokens[1])?);
            }
        }
    }
    if !seen_magic {
        return Err(Error::parse(1, "empty policy file"));
    }
    let indexing = indexing.ok_or_else(|| Error::parse(0, "missing 'indexing' line"))?;
    states.ok_or_else(|| Error::parse(0, "missing 'states' line"))?;
    let horizon = horizon.ok_or_else(|| Error::parse(0, "missing 'horizon' line"))?;
    let tail = tail
        .into_iter()
        .enumerate()
        .map(|(s, a)| a.ok_or_else(|| Error::PolicyMismatch(format!("no tail action for state {s}"))))
        .collect::<Result<Vec<_>>>()?;
    let policy = Policy {
        indexing,
        horizon,
        prefix,
        tail,
    };
    policy.check(m)?;
    Ok(PolicyFile { policy, reported })
}

//! Explicit-state MDP representation and the line-oriented model format.
//!
//! ```text
//! mdp
//! states 2
//! initial 0
//! goals 1
//! action 0 step 1
//!   0:1/2 1:1/2
//! ```
//!
//! Probabilities are decimals or `a/b` fractions and are always parsed as
//! exact rationals first. Goal states need no `action` lines: every goal gets
//! an implicit zero-cost self-loop labelled [`GOAL_LOOP_LABEL`].

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::{One, Signed};

use crate::error::{Error, Result};
use crate::scalar::{format_rational, format_scalar, parse_rational, Scalar};

pub const GOAL_LOOP_LABEL: &str = "loop";

#[derive(Debug, Clone, PartialEq)]
pub struct Action<T> {
    pub label: String,
    pub cost: u64,
    /// `(successor, probability)`, sorted by successor, probabilities positive.
    pub successors: Vec<(usize, T)>,
}

impl<T: Scalar> Action<T> {
    pub fn new(label: impl Into<String>, cost: u64, successors: Vec<(usize, T)>) -> Self {
        Action {
            label: label.into(),
            cost,
            successors,
        }
    }

    fn goal_loop(state: usize) -> Self {
        Action::new(GOAL_LOOP_LABEL, 0, vec![(state, T::one())])
    }

    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Action<U> {
        Action {
            label: self.label.clone(),
            cost: self.cost,
            successors: self.successors.iter().map(|(s, p)| (*s, f(p))).collect(),
        }
    }
}

/// A finite MDP with integer costs, one initial state and an absorbing goal set.
///
/// Structural well-formedness (indices, distributions, labels) is checked on
/// construction. The solver assumptions are checked separately by
/// [`crate::validate::validate_assumptions`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp<T> {
    actions: Vec<Vec<Action<T>>>,
    initial: usize,
    is_goal: Vec<bool>,
}

impl<T: Scalar> Mdp<T> {
    /// Builds a model. `actions[s]` may be empty for goal states, in which
    /// case the implicit self-loop is added.
    pub fn new(actions: Vec<Vec<Action<T>>>, initial: usize, goals: &[usize]) -> Result<Self> {
        let n = actions.len();
        if n == 0 {
            return Err(Error::Model("model has no states".into()));
        }
        if initial >= n {
            return Err(Error::Model(format!("initial state {initial} out of range")));
        }
        let mut is_goal = vec![false; n];
        for &g in goals {
            if g >= n {
                return Err(Error::Model(format!("goal state {g} out of range")));
            }
            is_goal[g] = true;
        }
        let tolerance = T::default_tolerance();
        let mut actions = actions;
        for (s, list) in actions.iter_mut().enumerate() {
            if list.is_empty() {
                if is_goal[s] {
                    list.push(Action::goal_loop(s));
                } else {
                    return Err(Error::Model(format!("non-goal state {s} has no actions")));
                }
            }
            let mut labels = HashSet::new();
            for action in list.iter_mut() {
                if !labels.insert(action.label.clone()) {
                    return Err(Error::Model(format!(
                        "duplicate action label '{}' in state {s}",
                        action.label
                    )));
                }
                normalize_successors(s, action, n)?;
                let sum = action
                    .successors
                    .iter()
                    .fold(T::zero(), |acc, (_, p)| acc + p.clone());
                if (sum.clone() - T::one()).abs() > tolerance {
                    return Err(Error::Model(format!(
                        "action '{}' in state {s}: probabilities sum to {}",
                        action.label,
                        sum.to_f64()
                    )));
                }
            }
        }
        Ok(Mdp {
            actions,
            initial,
            is_goal,
        })
    }

    pub fn num_states(&self) -> usize {
        self.actions.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn is_goal(&self, s: usize) -> bool {
        self.is_goal[s]
    }

    pub fn goals(&self) -> impl Iterator<Item = usize> + '_ {
        self.is_goal
            .iter()
            .enumerate()
            .filter_map(|(s, &g)| g.then_some(s))
    }

    pub fn actions(&self, s: usize) -> &[Action<T>] {
        &self.actions[s]
    }

    pub fn action(&self, s: usize, a: usize) -> &Action<T> {
        &self.actions[s][a]
    }

    pub fn action_index(&self, s: usize, label: &str) -> Option<usize> {
        self.actions[s].iter().position(|a| a.label == label)
    }

    pub fn num_state_action_pairs(&self) -> usize {
        self.actions.iter().map(Vec::len).sum()
    }

    pub fn num_transitions(&self) -> usize {
        self.actions
            .iter()
            .flatten()
            .map(|a| a.successors.len())
            .sum()
    }

    /// Largest action cost (`C_max`).
    pub fn c_max(&self) -> u64 {
        self.actions
            .iter()
            .flatten()
            .map(|a| a.cost)
            .max()
            .unwrap_or(0)
    }

    /// Smallest positive transition probability (`p_min`).
    pub fn p_min(&self) -> T {
        let mut best: Option<T> = None;
        for action in self.actions.iter().flatten() {
            for (_, p) in &action.successors {
                if best.as_ref().is_none_or(|b| p < b) {
                    best = Some(p.clone());
                }
            }
        }
        best.unwrap_or_else(T::one)
    }

    /// Every state has exactly one action.
    pub fn is_chain(&self) -> bool {
        self.actions.iter().all(|list| list.len() == 1)
    }

    pub fn check_chain(&self) -> Result<()> {
        match self.actions.iter().position(|list| list.len() != 1) {
            Some(state) => Err(Error::NotAChain {
                state,
                actions: self.actions[state].len(),
            }),
            None => Ok(()),
        }
    }

    /// All non-goal actions cost exactly one.
    pub fn is_uniform_cost(&self) -> bool {
        self.actions
            .iter()
            .enumerate()
            .filter(|(s, _)| !self.is_goal[*s])
            .flat_map(|(_, list)| list)
            .all(|a| a.cost == 1)
    }

    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Mdp<U> {
        Mdp {
            actions: self
                .actions
                .iter()
                .map(|list| list.iter().map(|a| a.map_scalar(&f)).collect())
                .collect(),
            initial: self.initial,
            is_goal: self.is_goal.clone(),
        }
    }

    pub fn to_float(&self) -> Mdp<f64> {
        self.map_scalar(|p| p.to_f64())
    }

    /// Writes the model in the text format accepted by [`parse_model`].
    /// Implicit goal loops are omitted.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let goals: Vec<String> = self.goals().map(|g| g.to_string()).collect();
        let _ = writeln!(out, "mdp");
        let _ = writeln!(out, "states {}", self.num_states());
        let _ = writeln!(out, "initial {}", self.initial);
        let _ = writeln!(out, "goals {}", goals.join(" "));
        for (s, list) in self.actions.iter().enumerate() {
            if self.is_goal[s] && list.len() == 1 && list[0] == Action::goal_loop(s) {
                continue;
            }
            for action in list {
                let _ = writeln!(out, "action {s} {} {}", action.label, action.cost);
                let succ: Vec<String> = action
                    .successors
                    .iter()
                    .map(|(t, p)| format!("{t}:{}", format_scalar(p)))
                    .collect();
                let _ = writeln!(out, "  {}", succ.join(" "));
            }
        }
        out
    }
}

fn normalize_successors<T: Scalar>(s: usize, action: &mut Action<T>, n: usize) -> Result<()> {
    let mut merged: BTreeMap<usize, T> = BTreeMap::new();
    for (t, p) in action.successors.drain(..) {
        if t >= n {
            return Err(Error::Model(format!(
                "action '{}' in state {s} references missing state {t}",
                action.label
            )));
        }
        if p.is_negative() {
            return Err(Error::Model(format!(
                "action '{}' in state {s} has a negative probability",
                action.label
            )));
        }
        if p.is_zero() {
            continue;
        }
        let entry = merged.entry(t).or_insert_with(T::zero);
        *entry = entry.clone() + p;
    }
    action.successors = merged.into_iter().collect();
    if action.successors.is_empty() {
        return Err(Error::Model(format!(
            "action '{}' in state {s} has no successors",
            action.label
        )));
    }
    Ok(())
}

/// Parses the model format into any scalar type. Probabilities are read as
/// exact rationals; for inexact scalars the row-sum check uses the scalar's
/// default tolerance.
pub fn parse_model<T: Scalar>(text: &str) -> Result<Mdp<T>> {
    struct Pending {
        line: usize,
        state: usize,
        label: String,
        cost: u64,
        successors: Vec<(usize, BigRational)>,
    }

    let mut header_seen = false;
    let mut num_states: Option<usize> = None;
    let mut initial: Option<usize> = None;
    let mut goals: Option<Vec<usize>> = None;
    let mut pending: Vec<Pending> = Vec::new();

    let parse_index = |token: &str, line: usize, what: &str| -> Result<usize> {
        token
            .parse::<usize>()
            .map_err(|_| Error::parse(line, format!("expected {what} index, found '{token}'")))
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let keyword = tokens.next().unwrap_or_default();
        if !header_seen {
            if keyword != "mdp" || tokens.next().is_some() {
                return Err(Error::parse(line, "expected header 'mdp'"));
            }
            header_seen = true;
            continue;
        }
        match keyword {
            "states" => {
                let value = tokens
                    .next()
                    .ok_or_else(|| Error::parse(line, "missing state count"))?;
                num_states = Some(parse_index(value, line, "state count")?);
                if tokens.next().is_some() {
                    return Err(Error::parse(line, "unexpected trailing tokens"));
                }
            }
            "initial" => {
                let value = tokens
                    .next()
                    .ok_or_else(|| Error::parse(line, "missing initial state"))?;
                initial = Some(parse_index(value, line, "state")?);
                if tokens.next().is_some() {
                    return Err(Error::parse(line, "unexpected trailing tokens"));
                }
            }
            "goals" => {
                let list = tokens
                    .by_ref()
                    .map(|t| parse_index(t, line, "goal state"))
                    .collect::<Result<Vec<_>>>()?;
                goals = Some(list);
            }
            "action" => {
                let fields: Vec<&str> = tokens.by_ref().collect();
                if fields.len() != 3 {
                    return Err(Error::parse(
                        line,
                        "expected 'action <state> <label> <cost>'",
                    ));
                }
                let state = parse_index(fields[0], line, "state")?;
                let cost = fields[2].parse::<u64>().map_err(|_| {
                    Error::parse(line, format!("cost must be a nonnegative integer, found '{}'", fields[2]))
                })?;
                pending.push(Pending {
                    line,
                    state,
                    label: fields[1].to_string(),
                    cost,
                    successors: Vec::new(),
                });
            }
            _ if keyword.contains(':') => {
                let current = pending
                    .last_mut()
                    .ok_or_else(|| Error::parse(line, "successor list outside an action"))?;
                for token in content.split_whitespace() {
                    let (succ, prob) = token.split_once(':').ok_or_else(|| {
                        Error::parse(line, format!("expected '<succ>:<prob>', found '{token}'"))
                    })?;
                    let succ = parse_index(succ, line, "successor")?;
                    let prob = parse_rational(prob).ok_or_else(|| {
                        Error::parse(line, format!("invalid probability '{prob}'"))
                    })?;
                    current.successors.push((succ, prob));
                }
            }
            other => return Err(Error::parse(line, format!("unknown keyword '{other}'"))),
        }
    }

    if !header_seen {
        return Err(Error::parse(1, "empty model"));
    }
    let last_line = text.lines().count().max(1);
    let n = num_states.ok_or_else(|| Error::parse(last_line, "missing 'states' line"))?;
    let initial = initial.ok_or_else(|| Error::parse(last_line, "missing 'initial' line"))?;
    let goals = goals.ok_or_else(|| Error::parse(last_line, "missing 'goals' line"))?;

    let tolerance = T::default_tolerance().to_ratio();
    let mut actions: Vec<Vec<Action<T>>> = vec![Vec::new(); n];
    for p in pending {
        if p.state >= n {
            return Err(Error::parse(p.line, format!("state {} out of range", p.state)));
        }
        if p.successors.is_empty() {
            return Err(Error::parse(p.line, format!("action '{}' has no successors", p.label)));
        }
        if let Some((succ, _)) = p.successors.iter().find(|(s, _)| *s >= n) {
            return Err(Error::parse(p.line, format!("successor {succ} out of range")));
        }
        if p.successors.iter().any(|(_, q)| q.is_negative()) {
            return Err(Error::parse(p.line, "negative probability"));
        }
        let sum: BigRational = p.successors.iter().map(|(_, q)| q.clone()).sum();
        if (sum.clone() - BigRational::one()).abs() > tolerance {
            return Err(Error::parse(
                p.line,
                format!(
                    "action '{}': probabilities sum to {}",
                    p.label,
                    Scalar::to_f64(&sum)
                ),
            ));
        }
        if actions[p.state].iter().any(|a| a.label == p.label) {
            return Err(Error::parse(
                p.line,
                format!("duplicate action label '{}' in state {}", p.label, p.state),
            ));
        }
        let successors = p
            .successors
            .iter()
            .map(|(s, q)| (*s, T::from_ratio(q)))
            .collect();
        actions[p.state].push(Action::new(p.label, p.cost, successors));
    }
    Mdp::new(actions, initial, &goals).map_err(|e| match e {
        Error::Model(msg) => Error::parse(last_line, msg),
        other => other,
    })
}

/// How the engines should do arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NumericMode {
    ExactRational,
    Float { epsilon: f64 },
}

impl NumericMode {
    pub fn float() -> Self {
        NumericMode::Float { epsilon: 1e-9 }
    }

    /// Exact for small models, floating point above `10^4` state-action pairs.
    pub fn default_for<T: Scalar>(m: &Mdp<T>) -> Self {
        if m.num_state_action_pairs() <= 10_000 {
            NumericMode::ExactRational
        } else {
            NumericMode::float()
        }
    }
}

/// A nonempty set of risk thresholds `0 < t < 1`, sorted strictly descending.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdQuery {
    thresholds: Vec<BigRational>,
}

impl ThresholdQuery {
    pub fn new(mut thresholds: Vec<BigRational>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::Argument("at least one threshold is required".into()));
        }
        for t in &thresholds {
            if !t.is_positive() || *t >= BigRational::one() {
                return Err(Error::Threshold(format_rational(t)));
            }
        }
        thresholds.sort_by(|a, b| b.cmp(a));
        thresholds.dedup();
        Ok(ThresholdQuery { thresholds })
    }

    pub fn single(t: BigRational) -> Result<Self> {
        Self::new(vec![t])
    }

    /// Parses `t[,t...]`, each a decimal or `a/b`.
    pub fn parse(text: &str) -> Result<Self> {
        let values = text
            .split(',')
            .map(|part| {
                parse_rational(part)
                    .ok_or_else(|| Error::Argument(format!("invalid threshold '{}'", part.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }

    pub fn thresholds(&self) -> &[BigRational] {
        &self.thresholds
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn as_scalars<T: Scalar>(&self) -> Vec<T> {
        self.thresholds.iter().map(T::from_ratio).collect()
    }
}

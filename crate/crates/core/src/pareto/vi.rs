//! Value iteration over Pareto polygons.
//!
//! Layer `n` holds, per state, every achievable pair `(p, E)` where `p` is
//! the probability of reaching the goal with accumulated cost at most `n`
//! and `E` the expected cost beyond `n`. For a threshold `t` the best policy
//! with VaR guess `n` then has CVaR `n + min{E | (1 - t, E)} / t`.
//!
//! Negative layers are never stored. A state entered with budget `j < 0`
//! can only follow the expectation-optimal tail, so its polygon is the
//! single point `(0, e(s) - j)` (goal states: `(0, -j)`).

use std::borrow::Cow;
use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use rayon::prelude::*;

use super::polygon::{lower_hull, merge_indices, minkowski_tracked, ParetoPolygon};
use crate::error::{Error, Result};
use crate::lp::{LpEngine, LpStatus};
use crate::mdp::Mdp;
use crate::policy::{Indexing, Policy};
use crate::risk::RiskResult;
use crate::scalar::{definitely_lt, format_scalar, Scalar};
use crate::ssp::{solve_ssp, SspValues};

/// Largest model for which witnesses are read off vertex provenance.
pub const PROVENANCE_STATE_LIMIT: usize = 10;

/// A sliding window of polygon layers.
#[derive(Debug, Clone)]
pub struct ParetoLayers<T> {
    /// Index of the newest layer.
    newest: u64,
    /// `window[k]` is layer `newest - k`.
    window: VecDeque<Vec<ParetoPolygon<T>>>,
    /// `None` keeps every layer.
    depth: Option<usize>,
    expected: Vec<T>,
    goal: Vec<bool>,
}

impl<T: Scalar> ParetoLayers<T> {
    /// Layer 0: goals at `(1, 0)`, everything else at `(0, e(s))`.
    pub fn base(m: &Mdp<T>, e: &[T]) -> Self {
        let goal: Vec<bool> = (0..m.num_states()).map(|s| m.is_goal(s)).collect();
        let layer = (0..m.num_states())
            .map(|s| {
                if goal[s] {
                    ParetoPolygon::point(T::one(), T::zero())
                } else {
                    ParetoPolygon::point(T::zero(), e[s].clone())
                }
            })
            .collect();
        ParetoLayers {
            newest: 0,
            window: VecDeque::from([layer]),
            depth: Some(m.c_max().max(1) as usize),
            expected: e.to_vec(),
            goal,
        }
    }

    /// Keeps every layer instead of only the last `C_max`.
    pub fn keep_all(mut self) -> Self {
        self.depth = None;
        self
    }

    pub fn newest(&self) -> u64 {
        self.newest
    }

    pub fn current(&self) -> &[ParetoPolygon<T>] {
        &self.window[0]
    }

    /// Polygon of state `s` at layer `j`; `None` if the layer has been
    /// dropped or not computed yet.
    pub fn polygon(&self, j: i64, s: usize) -> Option<Cow<'_, ParetoPolygon<T>>> {
        if j < 0 {
            let over = T::from_u64(j.unsigned_abs());
            let e = if self.goal[s] {
                over
            } else {
                self.expected[s].clone() + over
            };
            return Some(Cow::Owned(ParetoPolygon::point(T::zero(), e)));
        }
        let back = self.newest.checked_sub(j as u64)? as usize;
        self.window.get(back).map(|layer| Cow::Borrowed(&layer[s]))
    }

    pub fn push(&mut self, layer: Vec<ParetoPolygon<T>>) {
        self.window.push_front(layer);
        self.newest += 1;
        if let Some(depth) = self.depth {
            self.window.truncate(depth);
        }
    }
}

/// Where a vertex came from: the action, and for every successor of that
/// action the vertex used in the successor's polygon.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Origin {
    action: usize,
    picks: Vec<u32>,
}

/// Layer `newest + 1` polygon of state `s`.
pub fn pareto_step<T: Scalar>(m: &Mdp<T>, layers: &ParetoLayers<T>, s: usize) -> ParetoPolygon<T> {
    step_tracked(m, layers, s, false).0
}

fn step_tracked<T: Scalar>(
    m: &Mdp<T>,
    layers: &ParetoLayers<T>,
    s: usize,
    track: bool,
) -> (ParetoPolygon<T>, Vec<Origin>) {
    if m.is_goal(s) {
        return (ParetoPolygon::point(T::one(), T::zero()), Vec::new());
    }
    let next = layers.newest() as i64 + 1;
    let mut candidates = Vec::new();
    for (a, action) in m.actions(s).iter().enumerate() {
        let j = next - action.cost as i64;
        let scaled: Vec<ParetoPolygon<T>> = action
            .successors
            .iter()
            .map(|(s2, prob)| {
                layers
                    .polygon(j, *s2)
                    .expect("layer window covers C_max")
                    .scaled(prob)
            })
            .collect();
        let refs: Vec<&ParetoPolygon<T>> = scaled.iter().collect();
        let (sum, picks) = minkowski_tracked(&refs);
        let picks: Vec<Option<Vec<u32>>> = if track {
            picks.into_iter().map(Some).collect()
        } else {
            vec![None; sum.len()]
        };
        for (v, pick) in sum.vertices().iter().cloned().zip(picks) {
            candidates.push((v, (a, pick)));
        }
    }
    let hull = lower_hull(candidates);
    let mut vertices = Vec::with_capacity(hull.len());
    let mut origins = Vec::new();
    for (v, (action, picks)) in hull {
        vertices.push(v);
        if let Some(picks) = picks {
            origins.push(Origin { action, picks });
        }
    }
    let poly = ParetoPolygon::from_vertices(vertices).expect("hull is well formed");
    (poly, origins)
}

#[derive(Debug, Clone, Default)]
pub struct ViOptions {
    /// Float mode only: simplify each polygon with [`super::merge_vertices`].
    pub merge_tolerance: Option<f64>,
    /// Extract a witness policy per threshold.
    pub witness: bool,
    /// Record a [`TraceRow`] per iteration.
    pub trace: bool,
}

/// One iteration of the value iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow<T> {
    pub n: u64,
    pub vertex_counts: Vec<usize>,
    /// Best CVaR so far per threshold; `None` while still infinite.
    pub best: Vec<Option<T>>,
}

#[derive(Debug, Clone)]
pub struct ViThreshold<T> {
    pub threshold: T,
    pub result: RiskResult<T>,
    pub policy: Option<Policy<T>>,
}

#[derive(Debug, Clone)]
pub struct ViOutcome<T> {
    pub thresholds: Vec<ViThreshold<T>>,
    /// Index of the last layer computed.
    pub iterations: u64,
    pub trace: Vec<TraceRow<T>>,
}

impl<T: Scalar> ViOutcome<T> {
    /// `n`, one vertex count per state, then the running best per threshold.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("n");
        let states = self.trace.first().map_or(0, |r| r.vertex_counts.len());
        for s in 0..states {
            let _ = write!(out, ",vertices_s{s}");
        }
        for th in &self.thresholds {
            let _ = write!(out, ",cvar_t{}", format_scalar(&th.threshold));
        }
        out.push('\n');
        for row in &self.trace {
            let _ = write!(out, "{}", row.n);
            for c in &row.vertex_counts {
                let _ = write!(out, ",{c}");
            }
            for b in &row.best {
                match b {
                    Some(v) => {
                        let _ = write!(out, ",{}", format_scalar(v));
                    }
                    None => out.push_str(",inf"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// The value-iteration engine for one model.
#[derive(Debug, Clone)]
pub struct ViEngine<'a, T> {
    model: &'a Mdp<T>,
    ssp: SspValues<T>,
    options: ViOptions,
}

impl<'a, T: Scalar> ViEngine<'a, T> {
    pub fn new(model: &'a Mdp<T>) -> Result<Self> {
        Ok(ViEngine {
            model,
            ssp: solve_ssp(model)?,
            options: ViOptions::default(),
        })
    }

    pub fn with_options(mut self, options: ViOptions) -> Self {
        self.options = options;
        self
    }

    pub fn ssp(&self) -> &SspValues<T> {
        &self.ssp
    }

    pub fn solve(&self, thresholds: &[T]) -> Result<ViOutcome<T>> {
        if thresholds.is_empty() {
            return Err(Error::Argument("no thresholds given".into()));
        }
        for t in thresholds {
            if *t <= T::zero() || *t >= T::one() {
                return Err(Error::Threshold(t.to_string()));
            }
        }
        let m = self.model;
        let init = m.initial();
        let tol = T::default_tolerance();
        let provenance = self.options.witness && m.num_states() <= PROVENANCE_STATE_LIMIT;
        let merge = match self.options.merge_tolerance {
            Some(tol) if !T::EXACT => {
                Some(T::from_ratio(&num_rational::BigRational::from_float(tol).unwrap_or_default()))
            }
            _ => None,
        };
        let cap = thresholds
            .iter()
            .map(|t| {
                let bound = self.ssp.values[init].clone() / t.clone();
                bound.floor_u64().unwrap_or(u64::MAX / 2).saturating_add(1)
            })
            .max()
            .unwrap_or(1);

        let mut layers = ParetoLayers::base(m, &self.ssp.values);
        if provenance {
            layers = layers.keep_all();
        }
        // origins[n][s][vertex], layer 0 has none.
        let mut origins: Vec<Vec<Vec<Origin>>> = vec![vec![Vec::new(); m.num_states()]];
        let mut best: Vec<Option<(T, u64)>> = vec![None; thresholds.len()];
        let mut trace = Vec::new();
        loop {
            let n = layers.newest();
            let poly = &layers.current()[init];
            for (t, slot) in thresholds.iter().zip(best.iter_mut()) {
                let level = T::one() - t.clone();
                if let Some(e) = poly.query_min_e(&level) {
                    let c = T::from_u64(n) + e / t.clone();
                    let improves = match slot {
                        None => true,
                        Some((b, _)) => definitely_lt(&c, b, &tol),
                    };
                    if improves {
                        *slot = Some((c, n));
                    }
                }
            }
            if self.options.trace {
                trace.push(TraceRow {
                    n,
                    vertex_counts: layers.current().iter().map(ParetoPolygon::len).collect(),
                    best: best.iter().map(|b| b.as_ref().map(|(c, _)| c.clone())).collect(),
                });
            }
            let done = best
                .iter()
                .all(|b| b.as_ref().is_some_and(|(c, _)| T::from_u64(n + 1) > *c));
            if done {
                break;
            }
            if n + 1 > cap {
                return Err(Error::CapExceeded {
                    what: "value iteration",
                    cap,
                });
            }
            let stepped: Vec<(ParetoPolygon<T>, Vec<Origin>)> = (0..m.num_states())
                .into_par_iter()
                .map(|s| {
                    let (poly, origin) = step_tracked(m, &layers, s, provenance);
                    match &merge {
                        Some(tol) => {
                            let keep = merge_indices(&poly, tol);
                            let vertices = keep.iter().map(|&i| poly.vertices()[i].clone()).collect();
                            let origin = if origin.is_empty() {
                                origin
                            } else {
                                keep.iter().map(|&i| origin[i].clone()).collect()
                            };
                            (ParetoPolygon::from_vertices(vertices).expect("subset of a hull"), origin)
                        }
                        None => (poly, origin),
                    }
                })
                .collect();
            let (layer, layer_origins): (Vec<_>, Vec<_>) = stepped.into_iter().unzip();
            layers.push(layer);
            if provenance {
                origins.push(layer_origins);
            }
        }

        let mut results = Vec::with_capacity(thresholds.len());
        for (t, slot) in thresholds.iter().zip(best) {
            let (cvar, var) = slot.expect("loop exits only when every threshold is finite");
            let policy = if !self.options.witness {
                None
            } else if provenance {
                let poly = layers.polygon(var as i64, init).expect("all layers kept");
                Some(self.provenance_witness(&poly, &origins, t, var))
            } else {
                Some(self.lp_witness(t, var)?)
            };
            results.push(ViThreshold {
                threshold: t.clone(),
                result: RiskResult { var, cvar },
                policy,
            });
        }
        Ok(ViOutcome {
            thresholds: results,
            iterations: layers.newest(),
            trace,
        })
    }

    /// Follows vertex provenance from the query point and aggregates the
    /// flow into an index-dependent randomized policy.
    fn provenance_witness(
        &self,
        poly: &ParetoPolygon<T>,
        origins: &[Vec<Vec<Origin>>],
        t: &T,
        n: u64,
    ) -> Policy<T> {
        let m = self.model;
        let init = m.initial();
        let level = T::one() - t.clone();
        let v = poly.vertices();
        // The query point as a mixture of at most two vertices.
        let mut start: Vec<(usize, T)> = Vec::new();
        if level <= v[0].0 || v.len() == 1 {
            start.push((0, T::one()));
        } else {
            let k = v.partition_point(|(p, _)| *p <= level);
            if k >= v.len() {
                start.push((v.len() - 1, T::one()));
            } else {
                let lam = (v[k].0.clone() - level) / (v[k].0.clone() - v[k - 1].0.clone());
                start.push((k - 1, lam.clone()));
                start.push((k, T::one() - lam));
            }
        }

        // (index, state, vertex) -> mass
        let mut flow: BTreeMap<(u64, usize, u32), T> = BTreeMap::new();
        for (vertex, w) in start {
            if w > T::zero() && !m.is_goal(init) && n > 0 {
                flow.insert((0, init, vertex as u32), w);
            }
        }
        let mut usage: BTreeMap<(u64, usize), BTreeMap<usize, T>> = BTreeMap::new();
        while let Some(((i, s, vertex), mass)) = flow.pop_first() {
            let budget = (n - i) as usize;
            let origin = &origins[budget][s][vertex as usize];
            let slot = usage.entry((i, s)).or_default().entry(origin.action).or_insert_with(T::zero);
            *slot = slot.clone() + mass.clone();
            let action = m.action(s, origin.action);
            let next = i + action.cost;
            for ((s2, prob), pick) in action.successors.iter().zip(&origin.picks) {
                if m.is_goal(*s2) || next >= n {
                    continue;
                }
                let entry = flow.entry((next, *s2, *pick)).or_insert_with(T::zero);
                *entry = entry.clone() + mass.clone() * prob.clone();
            }
        }

        let prefix = usage
            .into_iter()
            .map(|(key, row)| {
                let total = row.values().fold(T::zero(), |acc, x| acc + x.clone());
                let row = row.into_iter().map(|(a, x)| (a, x / total.clone())).collect();
                (key, row)
            })
            .collect();
        Policy {
            indexing: self.indexing(),
            horizon: n,
            prefix,
            tail: self.ssp.policy.clone(),
        }
    }

    /// Solves the LP for VaR guess `n` and reads the policy off it.
    fn lp_witness(&self, t: &T, n: u64) -> Result<Policy<T>> {
        let m = self.model;
        if n == 0 {
            return Ok(Policy::stationary(self.indexing(), self.ssp.policy.clone()));
        }
        let engine = LpEngine::new(m)?;
        let lp = engine.build(t, n)?;
        let solution = crate::lp::solve_lp(&lp.model)?;
        if solution.status != LpStatus::Optimal {
            return Err(Error::Lp(format!("LP at VaR {n} is infeasible")));
        }
        Ok(lp.extract_policy(m, &solution, &self.ssp.policy))
    }

    fn indexing(&self) -> Indexing {
        if self.model.is_uniform_cost() {
            Indexing::Step
        } else {
            Indexing::AccumulatedCost
        }
    }
}

/// Optimal CVaR for every threshold in one pass.
pub fn solve_cvar_vi<T: Scalar>(m: &Mdp<T>, thresholds: &[T]) -> Result<ViOutcome<T>> {
    ViEngine::new(m)?.solve(thresholds)
}

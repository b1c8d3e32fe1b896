//! Monte-Carlo audit of a policy.
//!
//! Trajectory `i` draws from its own ChaCha stream `i` under the given seed,
//! so a report depends only on the seed, never on scheduling.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::policy::{Indexing, Policy};
use crate::risk::CostDistribution;
use crate::scalar::Scalar;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimThreshold {
    pub threshold: f64,
    pub var: u64,
    pub cvar: f64,
    /// Half-width of the 95% confidence interval around `cvar`.
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub samples: u64,
    pub seed: u64,
    pub horizon: u64,
    /// Runs that reached the goal within the horizon.
    pub completed: u64,
    /// Runs cut off at the horizon; excluded from every statistic.
    pub censored: u64,
    /// `(cost, count)` over completed runs.
    pub counts: Vec<(u64, u64)>,
    pub mean: f64,
    pub mean_half_width: f64,
    pub thresholds: Vec<SimThreshold>,
}

impl SimReport {
    pub fn contains(&self, index: usize, value: f64) -> bool {
        let th = &self.thresholds[index];
        (value - th.cvar).abs() <= th.half_width
    }
}

/// Horizon used when none is given: ten times the largest reported CVaR.
pub fn default_horizon(reported_cvar: f64) -> u64 {
    (10.0 * reported_cvar).ceil().max(1.0) as u64
}

/// A sampling table: cumulative probabilities and outcomes.
type Table = Vec<(f64, usize)>;

fn table<T: Scalar>(row: impl Iterator<Item = (usize, T)>) -> Table {
    let mut acc = 0.0;
    let mut out: Table = row
        .map(|(k, p)| {
            acc += p.to_f64();
            (acc, k)
        })
        .collect();
    if let Some(last) = out.last_mut() {
        last.0 = f64::INFINITY;
    }
    out
}

fn draw(table: &Table, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    table.iter().find(|(c, _)| u < *c).expect("last entry is infinite").1
}

/// Runs `samples` trajectories of `pi` on `m` and estimates VaR and CVaR
/// for every threshold.
///
/// Fails if the policy does not fit the model or more than half of the
/// runs hit the horizon (the policy is then most likely improper).
pub fn simulate_policy<T: Scalar>(
    m: &Mdp<T>,
    pi: &Policy<T>,
    thresholds: &[T],
    samples: u64,
    seed: u64,
    horizon: u64,
) -> Result<SimReport> {
    if samples == 0 {
        return Err(Error::Argument("at least one sample is needed".into()));
    }
    pi.check(m)?;
    let transitions: Vec<Vec<Table>> = (0..m.num_states())
        .map(|s| {
            m.actions(s)
                .iter()
                .map(|a| table(a.successors.iter().cloned()))
                .collect()
        })
        .collect();
    let prefix: HashMap<(u64, usize), Table> = pi
        .prefix
        .iter()
        .map(|(key, row)| (*key, table(row.iter().cloned())))
        .collect();
    let by_cost = pi.indexing == Indexing::AccumulatedCost;

    let run = |i: u64| -> Option<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i);
        let mut s = m.initial();
        let (mut steps, mut cost) = (0u64, 0u64);
        while !m.is_goal(s) {
            if cost > horizon {
                return None;
            }
            let index = if by_cost { cost } else { steps };
            let a = match prefix.get(&(index, s)) {
                Some(row) if index < pi.horizon => draw(row, &mut rng),
                _ => pi.tail[s],
            };
            cost += m.action(s, a).cost;
            steps += 1;
            s = draw(&transitions[s][a], &mut rng);
        }
        (cost <= horizon).then_some(cost)
    };
    let outcomes: Vec<Option<u64>> = (0..samples).into_par_iter().map(run).collect();

    let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
    let mut censored = 0;
    for o in outcomes {
        match o {
            Some(c) => *hist.entry(c).or_default() += 1,
            None => censored += 1,
        }
    }
    if censored * 2 > samples {
        return Err(Error::Censored {
            censored,
            samples,
            horizon,
        });
    }
    let completed = samples - censored;
    let dist = CostDistribution::new(hist.iter().map(|(c, k)| {
        (*c, BigRational::new(BigInt::from(*k), BigInt::from(completed)))
    }))?;
    let n = completed as f64;
    let moments = |f: &dyn Fn(u64) -> f64| -> (f64, f64) {
        let mean = hist.iter().map(|(c, k)| f(*c) * *k as f64).sum::<f64>() / n;
        let var = hist
            .iter()
            .map(|(c, k)| (f(*c) - mean).powi(2) * *k as f64)
            .sum::<f64>()
            / (n - 1.0).max(1.0);
        (mean, var.sqrt())
    };
    let (mean, sd) = moments(&|c| c as f64);
    let mut reports = Vec::with_capacity(thresholds.len());
    for t in thresholds {
        let exact_t = t.to_ratio();
        let risk = dist.risk(&exact_t)?;
        // CVaR = v + E[(X - v)^+] / t; the plug-in estimator's standard
        // error is that of the excess mean, scaled by 1/t.
        let v = risk.var;
        let (_, excess_sd) = moments(&|c| c.saturating_sub(v) as f64);
        let tf = t.to_f64();
        reports.push(SimThreshold {
            threshold: tf,
            var: v,
            cvar: risk.cvar.to_f64(),
            half_width: Z95 * excess_sd / (tf * n.sqrt()),
        });
    }
    Ok(SimReport {
        samples,
        seed,
        horizon,
        completed,
        censored,
        counts: hist.into_iter().collect(),
        mean,
        mean_half_width: Z95 * sd / n.sqrt(),
        thresholds: reports,
    })
}

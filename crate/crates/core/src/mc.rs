//! CVaR on uniform-cost Markov chains.
//!
//! With `n` the VaR and `P_n` the transient distribution after `n` steps,
//! `CVaR_t = n + (1/t) * sum_s P_n(s) e(s)`. The VaR itself is located by
//! repeated squaring of the transition matrix (`P^(2^k)`) followed by a
//! binary descent over the stored powers, so exponentially large VaRs cost
//! only polynomially many matrix products.

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::risk::RiskResult;
use crate::scalar::Scalar;
use crate::ssp::solve_ssp;
use crate::validate::ensure_valid;

/// Distribution over states after `step` transitions from the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientDistribution<T> {
    pub step: u64,
    pub probs: Vec<T>,
    /// Probability of not having reached the goal yet (`g_n`).
    pub not_goal: T,
    /// `sum_s P_n(s) e(s)` (`K_n`).
    pub expected_remaining: T,
}

impl<T: Scalar> TransientDistribution<T> {
    pub fn initial(m: &Mdp<T>, e: &[T]) -> Self {
        let mut probs = vec![T::zero(); m.num_states()];
        probs[m.initial()] = T::one();
        Self::from_probs(m, e, 0, probs)
    }

    fn from_probs(m: &Mdp<T>, e: &[T], step: u64, probs: Vec<T>) -> Self {
        let mut not_goal = T::zero();
        let mut expected_remaining = T::zero();
        for (s, p) in probs.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            if !m.is_goal(s) {
                not_goal = not_goal + p.clone();
            }
            expected_remaining = expected_remaining + p.clone() * e[s].clone();
        }
        TransientDistribution {
            step,
            probs,
            not_goal,
            expected_remaining,
        }
    }
}

type Matrix<T> = Vec<Vec<T>>;

/// A validated uniform-cost chain with its expected step counts.
#[derive(Debug, Clone)]
pub struct ChainAnalysis<T> {
    chain: Mdp<T>,
    expected: Vec<T>,
    transition: Matrix<T>,
}

impl<T: Scalar> ChainAnalysis<T> {
    pub fn new(m: &Mdp<T>) -> Result<Self> {
        m.check_chain()?;
        ensure_valid(m)?;
        if !m.is_uniform_cost() {
            return Err(Error::NonUniformCost);
        }
        let expected = solve_ssp(m)?.values;
        let n = m.num_states();
        let mut transition = vec![vec![T::zero(); n]; n];
        for (s, row) in transition.iter_mut().enumerate() {
            for (t, p) in &m.action(s, 0).successors {
                row[*t] = p.clone();
            }
        }
        Ok(ChainAnalysis {
            chain: m.clone(),
            expected,
            transition,
        })
    }

    pub fn expected(&self) -> &[T] {
        &self.expected
    }

    pub fn initial(&self) -> TransientDistribution<T> {
        TransientDistribution::initial(&self.chain, &self.expected)
    }

    /// Advances `d` by `k` single transitions.
    pub fn step(&self, d: &TransientDistribution<T>, k: u64) -> TransientDistribution<T> {
        let mut probs = d.probs.clone();
        for _ in 0..k {
            probs = row_times(&probs, &self.transition);
        }
        TransientDistribution::from_probs(&self.chain, &self.expected, d.step + k, probs)
    }

    fn not_goal(&self, probs: &[T]) -> T {
        probs
            .iter()
            .enumerate()
            .filter(|(s, _)| !self.chain.is_goal(*s))
            .fold(T::zero(), |acc, (_, p)| acc + p.clone())
    }

    /// Upper bound on the VaR: the smaller of Markov's inequality
    /// (`VaR <= ceil(e(init)/t)`) and the mixing bound
    /// `ln(2/t) |S| p_min^-|S|`. `None` if both overflow.
    pub fn var_cap(&self, t: &T) -> Option<u64> {
        let t = t.to_f64();
        let markov = (self.expected[self.chain.initial()].to_f64() / t).ceil();
        let states = self.chain.num_states() as f64;
        let log2_mixing = (2.0 / t).ln().log2()
            + states.log2()
            + states * (1.0 / self.chain.p_min().to_f64()).log2();
        let mixing = if log2_mixing < 62.0 {
            2f64.powf(log2_mixing).ceil()
        } else {
            f64::INFINITY
        };
        let cap = markov.min(mixing);
        (cap.is_finite() && cap < 9.0e18).then(|| cap.max(1.0) as u64)
    }

    /// Smallest `n` with `g_n <= t`, together with the distribution at `n`.
    pub fn find_var(&self, t: &T) -> Result<TransientDistribution<T>> {
        check_open_threshold(t)?;
        let cap = self.var_cap(t).unwrap_or(u64::MAX / 4);
        let start = self.initial();

        // Square until P^(2^k) pushes the non-goal mass to at most t.
        let mut powers: Vec<Matrix<T>> = vec![self.transition.clone()];
        loop {
            let k = powers.len() - 1;
            let probs = row_times(&start.probs, &powers[k]);
            if self.not_goal(&probs) <= *t {
                break;
            }
            if (1u64 << k) > cap {
                return Err(Error::CapExceeded {
                    what: "VaR search",
                    cap,
                });
            }
            let next = square(&powers[k]);
            powers.push(next);
        }

        // Binary descent: largest n with g_n > t, using the stored powers.
        let mut n = 0u64;
        let mut probs = start.probs;
        for k in (0..powers.len() - 1).rev() {
            let candidate = row_times(&probs, &powers[k]);
            if self.not_goal(&candidate) > *t {
                probs = candidate;
                n += 1 << k;
            }
        }
        let probs = row_times(&probs, &self.transition);
        Ok(TransientDistribution::from_probs(
            &self.chain,
            &self.expected,
            n + 1,
            probs,
        ))
    }

    pub fn cvar(&self, t: &T) -> Result<RiskResult<T>> {
        let d = self.find_var(t)?;
        let cvar = T::from_u64(d.step) + d.expected_remaining / t.clone();
        Ok(RiskResult { var: d.step, cvar })
    }
}

/// Distribution after `k` steps of a uniform-cost chain.
pub fn step_distribution<T: Scalar>(
    m: &Mdp<T>,
    d: &TransientDistribution<T>,
    k: u64,
) -> Result<TransientDistribution<T>> {
    Ok(ChainAnalysis::new(m)?.step(d, k))
}

/// VaR step and the transient distribution there.
pub fn find_var<T: Scalar>(m: &Mdp<T>, t: &T) -> Result<TransientDistribution<T>> {
    ChainAnalysis::new(m)?.find_var(t)
}

/// Optimal (indeed, the only) CVaR of a uniform-cost Markov chain.
pub fn cvar_chain<T: Scalar>(m: &Mdp<T>, t: &T) -> Result<RiskResult<T>> {
    ChainAnalysis::new(m)?.cvar(t)
}

fn check_open_threshold<T: Scalar>(t: &T) -> Result<()> {
    if *t <= T::zero() || *t >= T::one() {
        return Err(Error::Threshold(t.to_string()));
    }
    Ok(())
}

fn row_times<T: Scalar>(row: &[T], matrix: &Matrix<T>) -> Vec<T> {
    let n = row.len();
    let mut out = vec![T::zero(); n];
    for (i, x) in row.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in matrix[i].iter().enumerate() {
            if !y.is_zero() {
                out[j] = out[j].clone() + x.clone() * y.clone();
            }
        }
    }
    out
}

fn square<T: Scalar>(matrix: &Matrix<T>) -> Matrix<T> {
    matrix.iter().map(|row| row_times(row, matrix)).collect()
}

//! The two small adversarial models: a choice that needs exponential memory,
//! and a choice where minimizing VaR or expectation is CVaR-suboptimal.

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::mdp::{Action, Mdp};

/// Incremental state allocation for hand-built models.
#[derive(Default)]
struct Builder {
    actions: Vec<Vec<Action<BigRational>>>,
}

impl Builder {
    fn state(&mut self) -> usize {
        self.actions.push(Vec::new());
        self.actions.len() - 1
    }

    fn act(&mut self, s: usize, label: &str, successors: Vec<(usize, BigRational)>) {
        self.actions[s].push(Action::new(label, 1, successors));
    }

    fn step(&mut self, s: usize, to: usize) {
        self.act(s, "go", vec![(to, BigRational::one())]);
    }

    /// `len` fresh states in a deterministic line ending in `to`; returns
    /// the first state (or `to` itself when `len` is zero).
    fn line(&mut self, len: usize, to: usize) -> usize {
        let mut next = to;
        for _ in 0..len {
            let s = self.state();
            self.step(s, next);
            next = s;
        }
        next
    }
}

fn check_probability(p: &BigRational) -> Result<()> {
    if *p <= BigRational::zero() || *p >= BigRational::one() {
        return Err(Error::Argument(format!("p = {p} must lie strictly between 0 and 1")));
    }
    Ok(())
}

/// The restart cycle `s_0 .. s_n`: from `s_{i-1}` the run advances with
/// probability `p`, otherwise it drops to `r_i` and walks `r_i .. r_n` back
/// to `s_0`. Every run is back in `s_0` or at `s_n`'s exit after `n + 1`
/// steps. Returns `s_0` and `s_n`.
fn restart_cycle(b: &mut Builder, n: usize, p: &BigRational) -> (usize, usize) {
    let s: Vec<usize> = (0..=n).map(|_| b.state()).collect();
    let r: Vec<usize> = (0..n).map(|_| b.state()).collect();
    let q = BigRational::one() - p.clone();
    for i in 0..n {
        b.act(s[i], "go", vec![(s[i + 1], p.clone()), (r[i], q.clone())]);
        let back = if i + 1 < n { r[i + 1] } else { s[0] };
        b.step(r[i], back);
    }
    (s[0], s[n])
}

/// Exponential-memory model: the restart cycle feeds a decision state `d`
/// where `a` enters a safe line of `k + 2` states and `b` gambles between a
/// single state and a line of `2k + 1` states. Requires `n > 2k + 1`.
pub fn restart_model(n: usize, k: usize, p: &BigRational) -> Result<Mdp<BigRational>> {
    if k == 0 || n <= 2 * k + 1 {
        return Err(Error::Argument(format!("need k >= 1 and n > 2k + 1, got n = {n}, k = {k}")));
    }
    check_probability(p)?;
    let mut b = Builder::default();
    let goal = b.state();
    let (s0, sn) = restart_cycle(&mut b, n, p);
    let d = b.state();
    b.step(sn, d);
    let safe = b.line(k + 2, goal);
    let short = b.line(1, goal);
    let long = b.line(2 * k + 1, goal);
    b.act(d, "a", vec![(safe, BigRational::one())]);
    b.act(d, "b", vec![(short, BigRational::one() / BigRational::from_integer(2.into())),
        (long, BigRational::one() / BigRational::from_integer(2.into()))]);
    Mdp::new(b.actions, s0, &[goal])
}

/// Just the restart cycle of [`restart_model`] as a Markov chain, with `s_n` moving
/// straight to the goal: its VaR grows like `-ln t * (n + 1) * p^-n`.
pub fn restart_chain(n: usize, p: &BigRational) -> Result<Mdp<BigRational>> {
    if n == 0 {
        return Err(Error::Argument("n must be positive".into()));
    }
    check_probability(p)?;
    let mut b = Builder::default();
    let goal = b.state();
    let (s0, sn) = restart_cycle(&mut b, n, p);
    b.step(sn, goal);
    Mdp::new(b.actions, s0, &[goal])
}

/// VaR-versus-CVaR model: from `s_0`, action `a` walks a line of `k` states
/// to the goal; action `b` reaches the goal via one state with probability
/// 0.9 and via a line of `2k` states otherwise.
pub fn two_path_model(k: usize) -> Result<Mdp<BigRational>> {
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    let mut b = Builder::default();
    let s0 = b.state();
    let goal = b.state();
    let chain = b.line(k, goal);
    let short = b.line(1, goal);
    let long = b.line(2 * k, goal);
    b.act(s0, "a", vec![(chain, BigRational::one())]);
    b.act(s0, "b", vec![(short, super::ratio(9, 10)), (long, super::ratio(1, 10))]);
    Mdp::new(b.actions, s0, &[goal])
}

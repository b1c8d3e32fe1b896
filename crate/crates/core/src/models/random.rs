//! Seeded random models that always satisfy the solver assumptions.

use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ratio;
use crate::error::{Error, Result};
use crate::mdp::{Action, Mdp};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomSpec {
    /// Including the single goal state.
    pub states: usize,
    pub max_actions: usize,
    pub max_cost: u64,
    pub max_successors: usize,
    /// Probabilities are drawn as integer weights in `1..=max_weight`,
    /// normalized, which keeps denominators small.
    pub max_weight: u32,
}

impl RandomSpec {
    pub fn small(states: usize) -> Self {
        RandomSpec {
            states,
            max_actions: 3,
            max_cost: 2,
            max_successors: 3,
            max_weight: 3,
        }
    }
}

/// State 0 is initial and the last state is the goal. The first action of
/// every state moves to a higher-numbered state with positive probability,
/// so "always take the first action" is proper; the other actions are
/// unconstrained.
pub fn random_mdp(spec: &RandomSpec, seed: u64) -> Result<Mdp<BigRational>> {
    if spec.states < 2 || spec.max_actions == 0 || spec.max_cost == 0 || spec.max_successors == 0 || spec.max_weight == 0 {
        return Err(Error::Argument(format!("degenerate random model spec {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.states;
    let goal = n - 1;
    let mut actions = Vec::with_capacity(n);
    let states: Vec<usize> = (0..n).collect();
    for s in 0..goal {
        let count = rng.gen_range(1..=spec.max_actions);
        let mut list = Vec::with_capacity(count);
        for a in 0..count {
            let k = rng.gen_range(1..=spec.max_successors.min(n));
            let mut targets: Vec<usize> = states.choose_multiple(&mut rng, k).copied().collect();
            if a == 0 && !targets.iter().any(|&t| t > s) {
                targets[0] = rng.gen_range(s + 1..n);
            }
            let weights: Vec<u32> = targets.iter().map(|_| rng.gen_range(1..=spec.max_weight)).collect();
            let total: u32 = weights.iter().sum();
            let successors = targets
                .into_iter()
                .zip(weights)
                .map(|(t, w)| (t, ratio(w.into(), total.into())))
                .collect();
            let cost = rng.gen_range(1..=spec.max_cost);
            list.push(Action::new(format!("a{a}"), cost, successors));
        }
        actions.push(list);
    }
    actions.push(Vec::new());
    Mdp::new(actions, 0, &[goal])
}

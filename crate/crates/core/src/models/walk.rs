//! The doubling walk.

use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::One;

use super::ratio;
use crate::error::{Error, Result};
use crate::mdp::{Action, Mdp};

#[derive(Debug, Clone, PartialEq)]
pub struct WalkSpec {
    /// Goal position; the walk starts at 0.
    pub length: usize,
    pub forward_success: BigRational,
    pub gamble_fail: BigRational,
    /// Gambling is disabled after this many failures.
    pub max_fails: usize,
}

impl WalkSpec {
    pub fn new(length: usize) -> Self {
        WalkSpec {
            length,
            forward_success: ratio(1, 2),
            gamble_fail: ratio(1, 10),
            max_fails: 3,
        }
    }
}

/// States are `(position, failures)` reachable from `(0, 0)` plus a single
/// goal. `forward` advances with the success probability and stays put
/// otherwise; `gamble` doubles the position (capped at the goal) or, on
/// failure, halves it rounding down and counts the failure.
pub fn walk(spec: &WalkSpec) -> Result<Mdp<BigRational>> {
    let n = spec.length;
    if n < 2 {
        return Err(Error::Argument(format!("walk length must be at least 2, got {n}")));
    }
    let zero = BigRational::from_integer(0.into());
    let one = BigRational::one();
    for (name, p) in [("forward success", &spec.forward_success), ("gamble failure", &spec.gamble_fail)] {
        if *p <= zero || *p >= one {
            return Err(Error::Argument(format!("{name} probability {p} must lie in (0, 1)")));
        }
    }

    let goal = 0;
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut order: Vec<(usize, usize)> = Vec::new();
    let mut id = |key: (usize, usize), order: &mut Vec<(usize, usize)>| -> usize {
        if key.0 >= n {
            return goal;
        }
        *index.entry(key).or_insert_with(|| {
            order.push(key);
            order.len()
        })
    };
    let start = id((0, 0), &mut order);
    let mut actions: Vec<Vec<Action<BigRational>>> = vec![Vec::new()];
    let mut next = 0;
    while next < order.len() {
        let (pos, fails) = order[next];
        next += 1;
        let mut list = Vec::new();
        let ahead = id((pos + 1, fails), &mut order);
        let here = id((pos, fails), &mut order);
        list.push(Action::new(
            "forward",
            1,
            vec![(ahead, spec.forward_success.clone()), (here, one.clone() - spec.forward_success.clone())],
        ));
        if fails < spec.max_fails {
            let win = id(((2 * pos).min(n), fails), &mut order);
            let lose = id((pos / 2, fails + 1), &mut order);
            list.push(Action::new(
                "gamble",
                1,
                vec![(win, one.clone() - spec.gamble_fail.clone()), (lose, spec.gamble_fail.clone())],
            ));
        }
        actions.push(list);
    }
    Mdp::new(actions, start, &[goal])
}

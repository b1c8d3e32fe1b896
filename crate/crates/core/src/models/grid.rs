//! The robot-and-janitor grid world.

use std::collections::{BTreeMap, HashMap};

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::ratio;
use crate::error::{Error, Result};
use crate::mdp::{Action, Mdp};

/// `(column, row)`, row 0 at the bottom.
pub type Cell = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Facing {
    North,
    East,
    South,
    West,
}

impl Facing {
    fn left(self) -> Self {
        match self {
            Facing::North => Facing::West,
            Facing::West => Facing::South,
            Facing::South => Facing::East,
            Facing::East => Facing::North,
        }
    }

    fn right(self) -> Self {
        self.left().left().left()
    }

    fn offset(self) -> (isize, isize) {
        match self {
            Facing::North => (0, 1),
            Facing::East => (1, 0),
            Facing::South => (0, -1),
            Facing::West => (-1, 0),
        }
    }
}

/// Janitor behaviour per step. A blocked forward move becomes a left or
/// right turn with equal probability.
#[derive(Debug, Clone, PartialEq)]
pub struct JanitorMotion {
    pub forward: BigRational,
    pub left: BigRational,
    pub right: BigRational,
    pub stay: BigRational,
}

impl Default for JanitorMotion {
    fn default() -> Self {
        JanitorMotion {
            forward: ratio(1, 2),
            left: ratio(1, 4),
            right: ratio(1, 4),
            stay: BigRational::zero(),
        }
    }
}

impl JanitorMotion {
    /// A janitor that never moves.
    pub fn frozen() -> Self {
        JanitorMotion {
            forward: BigRational::zero(),
            left: BigRational::zero(),
            right: BigRational::zero(),
            stay: BigRational::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub obstacles: Vec<Cell>,
    pub start: Cell,
    pub charger: Cell,
    /// Lower-left corner and size of the square the janitor stays in.
    pub janitor_origin: Cell,
    pub janitor_size: usize,
    pub janitor_start: Cell,
    pub janitor_facing: Facing,
    pub janitor_motion: JanitorMotion,
}

impl GridSpec {
    /// A `width x 4` grid: robot in the bottom-left corner, charger in the
    /// top-right one, and a centred 4x4 janitor square with two obstacles on
    /// its inner anti-diagonal.
    pub fn new(width: usize) -> Self {
        let c0 = width.saturating_sub(4) / 2;
        GridSpec {
            width,
            height: 4,
            obstacles: vec![(c0 + 1, 2), (c0 + 2, 1)],
            start: (0, 0),
            charger: (width.saturating_sub(1), 3),
            janitor_origin: (c0, 0),
            janitor_size: 4,
            janitor_start: (c0 + 2, 2),
            janitor_facing: Facing::North,
            janitor_motion: JanitorMotion::default(),
        }
    }

    fn in_grid(&self, c: Cell) -> bool {
        c.0 < self.width && c.1 < self.height
    }

    fn in_region(&self, c: Cell) -> bool {
        let (x0, y0) = self.janitor_origin;
        (x0..x0 + self.janitor_size).contains(&c.0) && (y0..y0 + self.janitor_size).contains(&c.1)
    }

    fn free(&self, c: Cell) -> bool {
        self.in_grid(c) && !self.obstacles.contains(&c)
    }

    fn check(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Argument(msg));
        if self.width == 0 || self.height == 0 {
            return fail("grid must be nonempty".into());
        }
        if self.start == self.charger {
            return fail("start and charger coincide".into());
        }
        for (name, c) in [("start", self.start), ("charger", self.charger), ("janitor start", self.janitor_start)] {
            if !self.in_grid(c) {
                return fail(format!("{name} {c:?} lies outside the grid"));
            }
            if self.obstacles.contains(&c) {
                return fail(format!("{name} {c:?} is an obstacle"));
            }
        }
        let (x0, y0) = self.janitor_origin;
        if self.janitor_size == 0
            || x0 + self.janitor_size > self.width
            || y0 + self.janitor_size > self.height
        {
            return fail("janitor region does not fit in the grid".into());
        }
        if !self.in_region(self.janitor_start) {
            return fail("janitor starts outside its region".into());
        }
        if self.janitor_start == self.charger {
            return fail("janitor starts on the charger".into());
        }
        if self.janitor_start == self.start {
            return fail("janitor and robot start on the same cell".into());
        }
        // A janitor in a dead end next to the robot could never leave.
        let dirs = [Facing::North, Facing::East, Facing::South, Facing::West];
        let mut seen = vec![self.janitor_start];
        let mut stack = vec![self.janitor_start];
        while let Some(c) = stack.pop() {
            let exits: Vec<Cell> = dirs
                .iter()
                .filter_map(|&d| self.shift(c, d))
                .filter(|&n| self.janitor_may_enter(n))
                .collect();
            if exits.len() == 1 {
                return fail(format!("janitor region has a dead end at {c:?}"));
            }
            for n in exits {
                if !seen.contains(&n) {
                    seen.push(n);
                    stack.push(n);
                }
            }
        }
        let m = &self.janitor_motion;
        let total = m.forward.clone() + m.left.clone() + m.right.clone() + m.stay.clone();
        let parts = [&m.forward, &m.left, &m.right, &m.stay];
        if total != BigRational::one() || parts.iter().any(|p| **p < BigRational::zero()) {
            return fail("janitor motion probabilities must be nonnegative and sum to 1".into());
        }
        Ok(())
    }

    fn janitor_may_enter(&self, c: Cell) -> bool {
        self.in_region(c) && self.free(c) && c != self.charger
    }

    fn shift(&self, c: Cell, d: Facing) -> Option<Cell> {
        let (dx, dy) = d.offset();
        let x = c.0.checked_add_signed(dx)?;
        let y = c.1.checked_add_signed(dy)?;
        Some((x, y))
    }

    /// Janitor successor distribution given the robot's new cell.
    fn janitor_moves(&self, j: Cell, f: Facing, robot: Cell) -> Vec<((Cell, Facing), BigRational)> {
        let m = &self.janitor_motion;
        let ahead = self
            .shift(j, f)
            .filter(|&c| self.janitor_may_enter(c) && c != robot);
        let mut out = vec![
            ((j, f.left()), m.left.clone()),
            ((j, f.right()), m.right.clone()),
            ((j, f), m.stay.clone()),
        ];
        match ahead {
            Some(c) => out.push(((c, f), m.forward.clone())),
            None => {
                let half = m.forward.clone() / BigRational::from_integer(2.into());
                out.push(((j, f.left()), half.clone()));
                out.push(((j, f.right()), half));
            }
        }
        out.retain(|(_, p)| !p.is_zero());
        out
    }
}

fn chebyshev(a: Cell, b: Cell) -> usize {
    a.0.abs_diff(b.0).max(a.1.abs_diff(b.1))
}

type GridState = (Cell, Cell, Facing);

/// States are `(robot, janitor, facing)` reachable from the start, plus a
/// single goal for "robot on the charger". The robot may move to any free
/// neighbouring cell unless the janitor is within Chebyshev distance 1, and
/// may always wait. After the robot, the janitor moves inside its region,
/// never onto an obstacle, the robot or the charger (a janitor parked in
/// a dead end next to the robot would block both forever). Every action
/// costs 1.
pub fn grid(spec: &GridSpec) -> Result<Mdp<BigRational>> {
    spec.check()?;
    let goal = 0;
    let mut index: HashMap<GridState, usize> = HashMap::new();
    let mut order: Vec<GridState> = Vec::new();
    let mut id = |key: GridState, order: &mut Vec<GridState>| -> usize {
        if key.0 == spec.charger {
            return goal;
        }
        *index.entry(key).or_insert_with(|| {
            order.push(key);
            order.len()
        })
    };
    let start = id((spec.start, spec.janitor_start, spec.janitor_facing), &mut order);
    let mut actions: Vec<Vec<Action<BigRational>>> = vec![Vec::new()];
    let moves = [
        ("north", Facing::North),
        ("east", Facing::East),
        ("south", Facing::South),
        ("west", Facing::West),
    ];
    let mut next = 0;
    while next < order.len() {
        let (robot, janitor, facing) = order[next];
        next += 1;
        let mut targets: Vec<(&str, Cell)> = Vec::new();
        if chebyshev(robot, janitor) > 1 {
            for (label, d) in moves {
                if let Some(c) = spec.shift(robot, d).filter(|&c| spec.free(c)) {
                    targets.push((label, c));
                }
            }
        }
        targets.push(("wait", robot));
        let mut list = Vec::new();
        for (label, r2) in targets {
            let successors: Vec<(usize, BigRational)> = if r2 == spec.charger {
                vec![(goal, BigRational::one())]
            } else {
                let mut merged: BTreeMap<GridState, BigRational> = BTreeMap::new();
                for ((j2, f2), p) in spec.janitor_moves(janitor, facing, r2) {
                    let e = merged.entry((r2, j2, f2)).or_insert_with(BigRational::zero);
                    *e += p;
                }
                merged.into_iter().map(|(k, p)| (id(k, &mut order), p)).collect()
            };
            list.push(Action::new(label, 1, successors));
        }
        actions.push(list);
    }
    Mdp::new(actions, start, &[goal])
}

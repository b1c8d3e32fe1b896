//! Linear programs: a small backend-neutral model, the built-in simplex,
//! and the CVaR LP family.

mod cvar;
mod model;
mod presolve;
mod simplex;

pub use cvar::{
    build_lp, min_reach_budget, solve_cvar_lp, CvarLp, GuessRecord, LpCvarResult, LpEngine, LpMode,
};
pub use model::{Constraint, LpModel, LpSolution, LpStatus, Relation};
pub use simplex::{solve_lp, DenseSimplex, LpBackend};

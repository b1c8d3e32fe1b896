//! Model generators: the benchmark families and the small adversarial
//! constructions, all with exact probabilities.

mod paths;
mod grid;
mod random;
mod walk;

pub use paths::{restart_chain, restart_model, two_path_model};
pub use grid::{grid, Facing, GridSpec, JanitorMotion};
pub use random::{random_mdp, RandomSpec};
pub use walk::{walk, WalkSpec};

use num_bigint::BigInt;
use num_rational::BigRational;

pub(crate) fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

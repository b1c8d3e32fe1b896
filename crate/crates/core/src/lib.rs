//! Optimal conditional value-at-risk (CVaR) for stochastic shortest path.

pub mod error;
pub mod linalg;
pub mod lp;
pub mod mc;
pub mod mdp;
pub mod models;
pub mod pareto;
pub mod policy;
pub mod risk;
pub mod scalar;
pub mod simulate;
pub mod ssp;
pub mod validate;

pub use num_rational::BigRational;

pub use error::{Error, Result};
pub use lp::{solve_cvar_lp, LpModel, LpSolution};
pub use mc::cvar_chain;
pub use mdp::{parse_model, Action, Mdp, NumericMode, ThresholdQuery};
pub use pareto::{solve_cvar_vi, ParetoPolygon};
pub use policy::{Indexing, Policy};
pub use risk::{CostDistribution, RiskResult};
pub use scalar::Scalar;
pub use ssp::{solve_ssp, SspValues};
pub use validate::{validate_assumptions, ValidationReport, Violation};

pub type ExactMdp = Mdp<BigRational>;
pub type FloatMdp = Mdp<f64>;

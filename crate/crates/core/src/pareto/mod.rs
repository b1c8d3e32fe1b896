//! The Pareto-polygon value iteration.

mod polygon;
mod vi;

pub use polygon::{hull_union, merge_vertices, minkowski_sum, minkowski_sum_all, ParetoPolygon};
pub use vi::{
    pareto_step, solve_cvar_vi, ParetoLayers, TraceRow, ViEngine, ViOptions, ViOutcome, ViThreshold,
    PROVENANCE_STATE_LIMIT,
};

//! Macroscopic route-choice model for a two-exit motorway diverge where
//! vehicles can bypass their own queue by riding the adjacent exit's lane
//! and merging back late.
//!
//! The crate covers:
//! - quadratic congestion costs for steadfast and bypassing streams, with
//!   occupancy offsets for externally commanded flow ([`model`]);
//! - Wardrop equilibria via alternating best responses, plus an exhaustive
//!   grid certificate for cross-checking ([`solver`]);
//! - cost-coefficient calibration from observed splits, natively by
//!   multi-start pattern search and exportably as a big-M integer program
//!   ([`calibrate`]);
//! - system-optimal splits and their gap to equilibrium ([`social`]);
//! - fleet steering: command a share of one exit's demand to stay or bypass
//!   and sweep the split ([`stackelberg`]).
//!
//! The `parallel` feature (on by default) runs grid scans, sweeps and
//! multi-start searches on a rayon pool. Results are merged in index order,
//! so sequential and parallel builds produce identical output.

pub mod calibrate;
pub mod model;
mod numeric;
mod par;
pub mod social;
pub mod solver;
pub mod stackelberg;

pub use model::{
    check_uniqueness_conditions, bypass_cost, cost_gap, steadfast_cost, validate_flow,
    CostParams, DemandConfig, Exit, ExitCosts, FlowVector, ModelError, OccupancyOffsets,
    UniquenessReport,
};
pub use solver::{
    best_response, grid_oracle, solve_equilibrium, solve_with_fallback, verify_wardrop,
    EquilibriumResult, OracleCandidate, SolverError, SolverOptions,
};

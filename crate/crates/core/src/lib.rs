//! Solver and verification bench for an optimal consumption problem with one
//! indivisible asset.
//!
//! An investor consumes out of wealth invested in a tradable risky asset and
//! owns a single indivisible asset that can be sold once, folding its value
//! into wealth. The optimal rule is a threshold in the wealth-to-asset ratio:
//! sell as soon as `x/y` drops to a free boundary `z*`. This crate
//!
//! - validates model parameters ([`model`]),
//! - locates the boundary by shooting and bisection and tabulates the
//!   continuation value ([`hjb`]),
//! - turns the table into a value/consumption/sell-decision layer
//!   ([`policy`]),
//! - cross-checks everything by Monte Carlo simulation of the controlled
//!   state ([`montecarlo`]),
//! - and exposes a CSV-emitting command-line front end (`merton-indivisible`).

pub mod config;
pub mod error;
pub mod hjb;
mod interp;
pub mod model;
pub mod montecarlo;
pub mod policy;
pub mod table;

pub use error::{Error, Result};
pub use hjb::{
    find_free_boundary, hjb_residual_on_grid, integrate_shot, Envelopes, FreeBoundary, KSolution,
    ShotClassification, ShotKind,
};
pub use model::{MertonClosedForm, ModelParams};
pub use montecarlo::{
    estimate_value, fixed_time_bound, gbm_moment_check, simulate_path, MomentCheck, SimConfig,
    SimEstimate,
};
pub use policy::Policy;

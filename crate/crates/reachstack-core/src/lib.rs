//! Reachability-infused planning and control for multi-agent highway driving.
//!
//! The crate computes Hamilton-Jacobi-Isaacs backward reachable tubes for a
//! pairwise robot/other-car system offline, then uses the cached value
//! function online in two complementary places: as a safety term in an
//! optimistic tree-search planner's reward, and as affine constraints in a
//! minimally interventional multi-agent safety controller. A deterministic
//! highway simulation harness closes the loop and produces the safety and
//! performance metrics used for evaluation.
//!
//! The crate is `no_std`-compatible (with `alloc`); everything that touches
//! files or processes lives in the companion CLI crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod math;

pub mod geom;
pub mod grid;
pub mod hji;
pub mod metrics;
pub mod planner;
pub mod safety;
pub mod sim;
pub mod solver;
pub mod traffic;
pub mod vehicle;

pub use grid::{GridError, GridSpec, NodeGradients, ValueTable};
pub use hji::{RSSParams, RelDynamicsBounds, ValueFunction};
pub use solver::{BrtSolution, SolverConfig, SolverError};
pub use vehicle::{CarControl, CarState, PlannerState, RelativeState};

//! Path-based stochastic multi-class traffic assignment.
//!
//! Two user classes share one road network: regular vehicles (RV) choose
//! routes under a cross-nested logit stochastic user equilibrium, autonomous
//! vehicles (AV) under a deterministic (Wardrop) user equilibrium. Link travel
//! times follow the BPR function with a flow-share weighted mixed capacity,
//! and generalized costs add a speed-dependent fuel term.
//!
//! The crate is organised bottom-up:
//!
//! * [`network`] loads and validates links, nodes and per-class OD demand.
//! * [`costs`] evaluates link, path and perceived path costs.
//! * [`paths`] stores per-(OD, class) path sets and generates k shortest
//!   loop-free paths with Yen's algorithm.
//! * [`solver`] runs the flow-swapping equilibrium iteration over a fixed
//!   path set.
//! * [`pga`] alternates path generation and assignment.
//! * [`diagnostics`] holds the independent equilibrium certificate and the
//!   flow comparison metrics.
//! * [`fixtures`] builds the Nguyen-Dupuis and Sioux Falls test networks with
//!   seeded synthetic demand.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod costs;
pub mod diagnostics;
pub mod fixtures;
pub mod network;
pub mod paths;
pub mod pga;
pub mod solver;

pub use costs::{ClassParams, LinkState};
pub use network::{Link, Network, NodeId, OdPair, VehicleClass};
pub use paths::{Path, PathSet};
pub use pga::{pga_solve, PgaConfig, PgaOutcome};
pub use solver::{solve, FlowState, SolveOutcome, SolverConfig, SolverMode};

//! Harmonic-utility (alpha = 2) NOMA downlink power control for a single-LED
//! visible light communication cell.
//!
//! The power control problem minimizes `sum(1 / R_m)` over per-user powers
//! under a total power budget and an LED amplitude budget. It is not convex
//! in the powers, but becomes convex after the change of variables
//! `rho = ln p` plus epigraph variables `y_m >= 1 / R_m` ([`transform`]).
//! [`solver`] solves that program with a log-barrier interior-point method
//! and [`oracle`] provides an independent grid-search check.
//!
//! The numeric core is generic over [`Real`] (`f32`, `f64`); the aliases
//! below fix it to `f64`, which is what the defaults are tuned for.

// negated comparisons below are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod noma;
pub mod oracle;
pub mod scalar;
pub mod solver;
pub mod transform;

pub use error::{Error, Result};
pub use scalar::Real;

pub type LedConfig = channel::LedConfig<f64>;
pub type OpticalFrontEnd = channel::OpticalFrontEnd<f64>;
pub type ReceiverPose = channel::ReceiverPose<f64>;
pub type ChannelGain = channel::ChannelGain<f64>;
pub type Scenario = noma::Scenario<f64>;
pub type PowerAllocation = noma::PowerAllocation<f64>;
pub type RateReport = noma::RateReport<f64>;
pub type Feasibility = noma::Feasibility<f64>;
pub type TransformedPoint = transform::TransformedPoint<f64>;
pub type ConstraintEval = transform::ConstraintEval<f64>;
pub type SolverConfig = solver::SolverConfig<f64>;
pub type SolveResult = solver::SolveResult<f64>;
pub type GridSpec = oracle::GridSpec<f64>;
pub type OracleResult = oracle::OracleResult<f64>;

/// Single-precision scenario, for coarse solves.
pub type Scenario32 = noma::Scenario<f32>;
pub type SolverConfig32 = solver::SolverConfig<f32>;

pub use experiment::{RoomConfig, SweepRow, SweepSpec};
pub use noma::ScenarioFile;
pub use solver::SolveStatus;

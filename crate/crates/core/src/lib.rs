//! Stochastic patch occupancy models and their deterministic counterparts.
//!
//! The crate simulates a discrete-time occupancy chain and a
//! continuous-time occupancy chain on a weighted patch network, couples
//! each of them to an independent-patches auxiliary process driven by the
//! deterministic dynamics, and evaluates explicit deviation bounds between
//! the empirical occupancy measure and its deterministic prediction over
//! set families of finite VC dimension. Exact small-instance oracles
//! (transition-matrix powering, uniformization) back every Monte Carlo
//! engine.
//!
//! All numerics are generic over the scalar type through [`Scalar`];
//! `f64` is the default used by the CLI and the type aliases below.

// negated comparisons like `!(x > 0)` reject NaN along with the
// out-of-range values; indexed loops mirror the matrix arithmetic
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod continuous;
pub mod discrete;
pub mod error;
pub mod landscape;
pub mod measures;
pub mod oracle;
pub mod rates;
pub mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar type used by the CLI and the concrete aliases.
pub type Real = f64;

pub type Landscape = landscape::Landscape<Real>;
pub type Patch = landscape::Patch<Real>;
pub type KernelSpec = landscape::KernelSpec<Real>;
pub type RateFn = rates::RateFn<Real>;
pub type RateModel = rates::RateModel<Real>;
pub type ProbabilityVector = discrete::ProbabilityVector<Real>;
pub type CoupledTrajectory = discrete::CoupledTrajectory<Real>;
pub type OdePath = continuous::OdePath<Real>;
pub type EventPath = continuous::EventPath<Real>;
pub type CoupledCtTrajectory = continuous::CoupledCtTrajectory<Real>;
pub type BoundConstants = bounds::BoundConstants<Real>;
pub type TheoremBound = bounds::TheoremBound<Real>;

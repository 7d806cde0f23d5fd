//! First passage of a Levy process that is a drifted Brownian motion plus a
//! compound Poisson process: closed-form kernels for the passage-time
//! density and the joint law of (passage time, overshoot, undershoot),
//! exact-in-distribution skeleton simulation, variance-reduced Monte Carlo
//! estimators, and independent brute-force oracles for validation.
//!
//! The Brownian part has unit volatility; rescale the barrier, drift and
//! jump law to cover a general volatility.

pub mod closed_form;
pub mod error;
pub mod estimators;
pub mod jump_law;
pub mod oracle;
pub mod path_sim;
pub mod quad;

pub use error::{Error, Result};
pub use estimators::{Estimate, JointDensityPoint, McConfig};
pub use jump_law::{Atom, JumpFamily, JumpLaw};
pub use path_sim::{HitStatus, HittingRecord, ModelParams, PathSkeleton};

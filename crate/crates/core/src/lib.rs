//! Tail asymptotics for supercritical Galton-Watson processes with
//! heavy-tailed offspring.
//!
//! The crate is `no_std` (it needs `alloc`) and contains everything that is
//! pure computation:
//!
//! * [`offspring`]: the catalog of integer offspring laws with tail, hazard,
//!   moments and exact inverse-CDF sampling, plus the law grammar.
//! * [`classes`]: finite-grid diagnostics for the distribution classes the
//!   asymptotic results are stated for.
//! * [`simulator`]: exact trajectory simulation with big-jump event tracking.
//! * [`asymptotics`]: closed-form tail approximations for `P{W_n > x}`.
//! * [`bounds`]: upper bounds for tails of centered i.i.d. sums.
//! * [`estimators`]: naive, exact and big-jump decomposition estimators.
//!
//! IO, configuration and the command line live in the `gwtails` crate.

#![no_std]
// `!(x > 0.0)` rejects NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod asymptotics;
pub mod bounds;
pub mod classes;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod math;
pub mod offspring;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
pub use offspring::{LawSpec, OffspringLaw};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

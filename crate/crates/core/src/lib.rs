//! Boundary-driven systems of independent particles.
//!
//! Two geometries are supported: the chain `{1, .., N}` coupled to reservoirs
//! at its ends, and the interval `(0, 1)` with absorbed standard Brownian
//! motion. For each, the crate provides exact samplers for the forward
//! process, deterministic evaluation of the absorbed dual side of every
//! duality identity, and the Monte Carlo machinery used to compare the two.
//!
//! Module map:
//!
//! - [`types`]: configurations, reservoir parameters, estimates
//! - [`dualities`]: classical, reservoir and Charlier duality functions,
//!   factorial-measure functionals
//! - [`chain`]: the discrete chain (reservoir process, absorbed walk,
//!   gas construction)
//! - [`interval`]: absorbed Brownian motion on `[0, 1]` and the
//!   boundary-driven Brownian gas
//! - [`estimators`]: parallel Monte Carlo, z-checks, Poissonity, scaling
//! - [`experiments`]: config-driven batch runner behind the `bdgas` CLI

pub mod chain;
pub mod dualities;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod interval;
pub mod quadrature;
pub mod rng;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    ContinuumConfiguration, DiscreteConfiguration, Estimate, KernelValue, ReservoirParams,
};

/// Library version string embedded in every result file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

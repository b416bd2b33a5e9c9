//! Optimal relative arbitrage in volatility-stabilized markets.
//!
//! The quantity `u(T − t, x)` (the smallest initial relative wealth that
//! matches the market portfolio at `T`) is estimated by Monte Carlo over
//! time-changed squared Bessel processes, which keep every simulated
//! capitalization strictly positive. An independent regression solver for
//! the associated backward SDE, an Euler baseline and the auxiliary
//! boundary-hitting experiment are provided for comparison.
//!
//! Module map:
//!
//! * [`model`]: market parameters, configuration, path and estimate types
//! * [`bessel`]: squared Bessel transitions, Brownian and Bessel bridges
//! * [`time_change`]: the stochastic clock and terminal interpolation
//! * [`euler`]: Euler baseline and auxiliary-process experiment
//! * [`estimator`]: Monte Carlo estimators and time/space sweeps
//! * [`bsde`]: backward regression and penalized (reflected) solvers
//! * [`config`], [`cli`]: configuration files, presets and CSV output

pub mod bessel;
pub mod bsde;
pub mod cli;
pub mod config;
pub mod error;
pub mod estimator;
pub mod euler;
pub mod model;
pub mod rng;
pub mod stats;
pub mod time_change;

pub use error::{Error, Result};
pub use estimator::{estimate_u, estimate_u_general, sweep_surface, sweep_time, MeshAxis, MeshSpec, UPath, USurface};
pub use model::{validate_vsm, Interpolation, SimConfig, UEstimate, VsmParams, VsmSpec};

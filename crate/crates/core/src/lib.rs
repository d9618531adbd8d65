//! Numerical laboratory for the three- and four-level centrifugal filter
//! difference systems.
//!
//! The crate iterates the quadratic level-transfer maps, cuts
//! four-dimensional orbits with axis-aligned three-dimensional sections,
//! estimates box-counting and correlation dimensions of the resulting point
//! clouds, and classifies asymptotic regimes (fixed point, 2^n cycles,
//! quasiperiodic, chaotic, divergent) including x_in sweeps and hysteresis
//! scans.

pub mod cli;
pub mod cloud;
pub mod config;
pub mod dimension;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod pipeline;
pub mod presets;
pub mod regimes;
pub mod report;
pub mod sections;

pub use cloud::PointCloud;
pub use dynamics::{Model, Orbit, ParamsFour, ParamsThree};
pub use error::{Error, Result};

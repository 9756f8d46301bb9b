//! Simulation and numerical verification toolkit for the block-counting
//! processes of the Kingman coalescent, the coalescent with mutation and the
//! Ancestral Selection Graph.
//!
//! * [`engine`] samples the three processes on a single marked Poisson
//!   arrival stream, so that they are coupled pathwise.
//! * [`analytics`] computes hitting-time and excursion moments exactly
//!   (backward recursions plus an independent dense linear-solve oracle) and
//!   the speed of coming down from infinity.
//! * [`experiments`] turns trajectories into the rescaled fluctuation
//!   processes and runs the Monte Carlo campaigns.
//! * [`stats`] holds estimators, the Kolmogorov-Smirnov test, reproducible
//!   random streams and the report type.
//! * [`cli`] is the command-line front end.

pub mod analytics;
pub mod cli;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod params;
pub mod stats;
pub mod trajectory;

pub use error::{Error, Result};
pub use params::ModelParams;

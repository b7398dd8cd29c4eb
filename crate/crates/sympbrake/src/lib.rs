//! File formats, seeded identity sweeps, orbit experiments and the command
//! line for [`sympbrake_core`].
//!
//! The binary `sympbrake` has three subcommands:
//!
//! * `index-path`: index data of one path document.
//! * `verify`: the identity suite over seeded random paths and matrices.
//! * `ellipsoid`: brake orbits of an ellipsoid or sampled potential.
//!
//! Exit codes are `0` success, `1` input error, `2` numerical refinement
//! needed and `3` identity violation.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod plot;
pub mod sample;
pub mod verify;

pub use config::{RunConfig, SweepSizes, Tolerances};
pub use error::CliError;

//! Symplectic index theory for brake orbits.
//!
//! The crate is `no_std` with `alloc`. It covers:
//!
//! * [`sympcore`]: symplectic linear algebra, the ⋄-product, Lagrangian frames and inertia.
//! * [`normalforms`]: basic normal forms, circle spectra and splitting numbers.
//! * [`maslov`]: symplectic paths and their index functions `(i_ω, ν_ω)`, `(i_{L_j}, ν_{L_j})`.
//! * [`iteration`]: brake iteration of paths and the identities built on it.
//! * [`brakeorbit`]: Hamiltonian flows with monodromy and a shooting solver for brake orbits.
//!
//! IO, file formats and the command line live in the `sympbrake` companion crate.
#![no_std]
#![warn(rust_2018_idioms, unused_qualifications)]

extern crate alloc;

pub mod brakeorbit;
mod error;
pub mod iteration;
pub mod linalg;
pub mod maslov;
pub mod normalforms;
pub mod path;
pub mod quasirandom;
pub mod serde_matrix;
pub mod sympcore;

pub use error::{Error, Result};
pub use linalg::{CMat, Mat};
pub use maslov::IndexPair;
pub use path::SymplecticPath;
pub use sympcore::{Inertia, LagrangianFrame, SymplecticMatrix};

#[cfg(test)]
pub(crate) mod testutil;

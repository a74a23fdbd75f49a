//! Exact diagonalization of small spin-1/2 chains and ladders, with pairwise
//! concurrence, sum-rule checks and level-crossing analysis.

pub mod analysis;
pub mod eigensolver;
pub mod entanglement;
pub mod error;
pub mod lattice;
pub mod models;
pub mod observables;

pub use error::{Error, Result};

pub mod classical;
pub mod config;
pub mod error;
pub mod experiment;
pub mod gaussian;
pub mod harmonic_error;
pub mod io;
pub mod linalg;
pub mod mixture;
pub mod potentials;
pub mod quantum;
pub mod rng;
pub mod scales;

pub use error::{Error, Result};

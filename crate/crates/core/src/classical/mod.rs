//! Classical reference dynamics: grid Fokker-Planck and Langevin ensembles.

pub mod fokker_planck;
pub mod langevin;
pub mod phase;

pub use fokker_planck::{evolve_fokker_planck, FpDiagnostics, FpScheme, FpSolver};
pub use langevin::{evolve_langevin_ensemble, LangevinEnsemble};
pub use phase::{l1_distance, PhaseField, PhaseGrid};

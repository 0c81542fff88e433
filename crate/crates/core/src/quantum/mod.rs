//! Grid Lindblad dynamics in one dimension.

pub mod distance;
pub mod grid;
pub mod lindblad;
pub mod wigner;

pub use distance::trace_distance;
pub use grid::{gaussian_to_grid, refine_density, DensityMatrixGrid, PositionGrid, Spectral};
pub use lindblad::{evolve_lindblad, LindbladMethod, LindbladOperator, LindbladSolver, QuantumDiagnostics};
pub use wigner::{wigner_phase_grid, wigner_transform_grid};

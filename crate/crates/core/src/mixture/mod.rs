//! Gaussian-mixture trajectory realized as weighted particles over
//! `(alpha, sigma)`.

pub mod ensemble;
pub mod particle;
pub mod split;

pub use ensemble::{evolve_mixture, mixture_to_density_grid, mixture_to_phase_field, MixtureEnsemble, MixtureOptions, MixtureStats};
pub use particle::{split_particle, step_particle, MixtureMode, Particle, StepReport};
pub use split::{m_matrix, split_sdot, split_whitened};

use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite (min eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),

    #[error("covariance is not a pure Gaussian state: {0}")]
    NotPure(String),

    #[error("covariance is too squeezed: whitened spectrum [{min:.6e}, {max:.6e}] outside [1/z, z] with z = {z}")]
    TooSqueezed { min: f64, max: f64, z: f64 },

    #[error("position {x:?} lies outside the model domain")]
    OutsideDomain { x: Vec<f64> },

    #[error("epsilon {epsilon:.6e} is below the attainable floor {floor:.6e}")]
    EpsilonBelowFloor { epsilon: f64, floor: f64 },

    #[error("squeeze bound z is unbounded because D0 = 0; supply a z cap")]
    UnboundedSqueeze,

    #[error("no semiclassical regime: action scale {action:e} does not exceed hbar {hbar:e}")]
    NoSemiclassicalRegime { action: f64, hbar: f64 },

    #[error("grid does not cover the state: {0}")]
    GridCoverage(String),

    #[error("grids differ")]
    GridMismatch,

    #[error("time step {dt:.3e} exceeds the stability limit {max_dt:.3e}")]
    TimeStep { dt: f64, max_dt: f64 },

    #[error("invariant violated at step {step}: {what}")]
    Invariant { step: usize, what: String },

    #[error("mass leaked through the boundary: {0:.3e}")]
    MassLeak(f64),

    #[error("negative diffusion covariance (min eigenvalue {0:.3e})")]
    NegativeDiffusion(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

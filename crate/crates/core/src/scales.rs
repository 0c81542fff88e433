//! Characteristic scales of a Hamiltonian, the error budget `epsilon(t)` and
//! the diffusion threshold, plus the closed-form time estimates.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{Potential, Profile, Separable};

/// A quantity that may be unbounded. Unbounded values are never pushed
/// through floating-point arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Bound {
    Finite(f64),
    Infinite,
}

impl Bound {
    pub fn finite(self) -> Option<f64> {
        match self {
            Bound::Finite(v) => Some(v),
            Bound::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Bound::Infinite)
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(v) => write!(f, "{v:.10e}"),
            Bound::Infinite => write!(f, "inf"),
        }
    }
}

/// Mass, potential and the compact box on which derivative suprema are taken.
#[derive(Clone, Debug)]
pub struct HamiltonianModel {
    pub mass: f64,
    pub potential: Arc<dyn Potential>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// `sup |V''|_op` over the box.
    pub sup2: f64,
    /// `sup` of unit-direction third derivatives over the box.
    pub sup3: f64,
}

impl HamiltonianModel {
    pub fn new(mass: f64, potential: Arc<dyn Potential>, lo: &[f64], hi: &[f64]) -> Result<Self> {
        let d = potential.dims();
        if d == 0 || lo.len() != d || hi.len() != d {
            return Err(Error::InvalidModel(format!(
                "domain box has {} / {} bounds for a {d}-dimensional potential",
                lo.len(),
                hi.len()
            )));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidModel(format!("mass must be positive, got {mass}")));
        }
        if lo.iter().zip(hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::InvalidModel("domain box is empty".into()));
        }
        let (sup2, sup3) = potential.sup_bounds(lo, hi);
        if !(sup2 > 0.0) {
            return Err(Error::InvalidModel("sup of |V''| over the domain must be positive".into()));
        }
        Ok(Self { mass, potential, lo: lo.to_vec(), hi: hi.to_vec(), sup2, sup3 })
    }

    /// A built-in profile applied separably in `dims` coordinates.
    pub fn builtin(profile: Profile, dims: usize, mass: f64, lo: &[f64], hi: &[f64]) -> Result<Self> {
        Self::new(mass, Arc::new(Separable { profile, dims }), lo, hi)
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    pub(crate) fn check_dims(&self, n: usize) -> Result<()> {
        if n != self.dims() {
            return Err(Error::DimensionMismatch { expected: self.dims(), got: n });
        }
        Ok(())
    }

    pub fn scales(&self, diffusion: &DiffusionSpec) -> Result<ScaleReport> {
        compute_scales(self, diffusion)
    }
}

/// Diffusion constants of the linear Lindblad operators. Only the moduli of
/// the coupling amplitudes enter: `D_x = hbar |l_p|^2`, `D_p = hbar |l_x|^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSpec {
    pub hbar: f64,
    pub d_x: f64,
    pub d_p: f64,
    /// Heuristic: replace `D_x` by `D_p / (sup2 m)` when forming `D0`.
    #[serde(default)]
    pub effective_position_diffusion: bool,
}

impl DiffusionSpec {
    pub fn new(hbar: f64, d_x: f64, d_p: f64) -> Self {
        Self { hbar, d_x, d_p, effective_position_diffusion: false }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::InvalidArgument(format!("hbar must be positive, got {}", self.hbar)));
        }
        if !(self.d_x >= 0.0 && self.d_p >= 0.0 && self.d_x.is_finite() && self.d_p.is_finite()) {
            return Err(Error::InvalidArgument("diffusion constants must be nonnegative".into()));
        }
        Ok(())
    }

    /// Diffusion constants that realize a prescribed `D0` with both branches
    /// of the minimum equal.
    pub fn from_d0(model: &HamiltonianModel, hbar: f64, d0: f64) -> Result<Self> {
        let s = compute_scales(model, &DiffusionSpec::new(hbar, 0.0, 0.0))?;
        let (x_h, p_h) = match (s.x_h, s.p_h) {
            (Bound::Finite(x), Bound::Finite(p)) => (x, p),
            _ => return Err(Error::InvalidArgument("D0 is undefined for a harmonic potential".into())),
        };
        Ok(Self::new(hbar, d0 * x_h * x_h / s.tau_h, d0 * p_h * p_h / s.tau_h))
    }
}

/// Every scale that enters the error budget.
#[derive(Clone, Debug)]
pub struct ScaleReport {
    pub dims: usize,
    pub mass: f64,
    pub hbar: f64,
    pub diffusion: DiffusionSpec,
    pub tau_h: f64,
    pub a_h: f64,
    pub s_h: Bound,
    pub x_h: Bound,
    pub p_h: Bound,
    pub sigma_star: DMatrix<f64>,
    /// Zero when `s_H` is infinite.
    pub d0: f64,
    /// `D0 s_H / (hbar tau_H) = min(D_x a_H, D_p / a_H) / hbar`. Finite even
    /// for harmonic potentials, where it alone determines `z`.
    pub broadening_rate: f64,
    pub z: Bound,
    /// User-supplied replacement for an unbounded `z`.
    pub z_cap: Option<f64>,
    pub lyapunov: Option<f64>,
}

impl ScaleReport {
    pub fn with_z_cap(mut self, cap: Option<f64>) -> Self {
        self.z_cap = cap;
        self
    }

    pub fn with_lyapunov(mut self, lyapunov: Option<f64>) -> Self {
        self.lyapunov = lyapunov;
        self
    }

    /// `z` when finite, otherwise the user cap.
    pub fn z_in_force(&self) -> Result<f64> {
        match (self.z, self.z_cap) {
            (Bound::Finite(z), _) => Ok(z),
            (Bound::Infinite, Some(cap)) if cap >= 1.0 => Ok(cap),
            (Bound::Infinite, Some(cap)) => {
                Err(Error::InvalidArgument(format!("z cap must be at least 1, got {cap}")))
            }
            (Bound::Infinite, None) => Err(Error::UnboundedSqueeze),
        }
    }

    /// False when the squeeze bound only exists through a user cap.
    pub fn bound_applicable(&self) -> bool {
        !self.z.is_infinite()
    }

    /// `hbar / s_H`, zero for harmonic potentials.
    pub fn hbar_ratio(&self) -> f64 {
        match self.s_h {
            Bound::Finite(s) => self.hbar / s,
            Bound::Infinite => 0.0,
        }
    }

    /// Diagonal of `sigma*^{-1/2}`.
    pub fn whiten_diag(&self) -> DVector<f64> {
        self.sigma_star.diagonal().map(|v| 1.0 / v.sqrt())
    }

    /// Diagonal of `sigma*^{1/2}`.
    pub fn unwhiten_diag(&self) -> DVector<f64> {
        self.sigma_star.diagonal().map(f64::sqrt)
    }

    pub fn whiten(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        crate::linalg::scale_both(m, &self.whiten_diag())
    }

    pub fn unwhiten(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        crate::linalg::scale_both(m, &self.unwhiten_diag())
    }
}

/// Coherent covariance `diag(hbar/(2 a_H) I, hbar a_H/2 I)`.
pub fn sigma_star(dims: usize, hbar: f64, a_h: f64) -> DMatrix<f64> {
    let mut diag = DVector::zeros(2 * dims);
    for k in 0..dims {
        diag[k] = hbar / (2.0 * a_h);
        diag[dims + k] = hbar * a_h / 2.0;
    }
    DMatrix::from_diagonal(&diag)
}

pub fn compute_scales(model: &HamiltonianModel, diffusion: &DiffusionSpec) -> Result<ScaleReport> {
    diffusion.validate()?;
    let m = model.mass;
    let hbar = diffusion.hbar;
    let tau_h = (m / model.sup2).sqrt();
    let a_h = m / tau_h;
    let (s_h, x_h, p_h) = if model.sup3 > 0.0 {
        let s = m.sqrt() * model.sup2.powf(2.5) / (model.sup3 * model.sup3);
        (Bound::Finite(s), Bound::Finite((s / a_h).sqrt()), Bound::Finite((s * a_h).sqrt()))
    } else {
        (Bound::Infinite, Bound::Infinite, Bound::Infinite)
    };
    let d_x = if diffusion.effective_position_diffusion {
        diffusion.d_p / (model.sup2 * m)
    } else {
        diffusion.d_x
    };
    let rate = (d_x * a_h).min(diffusion.d_p / a_h) / hbar;
    let d0 = match s_h {
        Bound::Finite(s) => rate * hbar * tau_h / s,
        Bound::Infinite => 0.0,
    };
    let z = if rate > 0.0 { Bound::Finite((1.0 / (rate * tau_h)).max(1.0)) } else { Bound::Infinite };
    Ok(ScaleReport {
        dims: model.dims(),
        mass: m,
        hbar,
        diffusion: *diffusion,
        tau_h,
        a_h,
        s_h,
        x_h,
        p_h,
        sigma_star: sigma_star(model.dims(), hbar, a_h),
        d0,
        broadening_rate: rate,
        z,
        z_cap: None,
        lyapunov: None,
    })
}

/// `d^{3/2} (t/tau_H) sqrt(hbar/s_H) z^{3/2}` in dimensionless inputs.
pub fn epsilon_bound(d: usize, t_over_tau: f64, hbar_ratio: f64, z: f64) -> f64 {
    (d as f64).powf(1.5) * t_over_tau * hbar_ratio.sqrt() * z.powf(1.5)
}

/// The error budget `epsilon(t)`. Zero for harmonic potentials; an unbounded
/// squeeze is an error unless the report carries a cap.
pub fn theorem_epsilon(scales: &ScaleReport, t: f64, d: usize) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("negative time {t}")));
    }
    if scales.s_h.is_infinite() || t == 0.0 {
        return Ok(0.0);
    }
    let z = scales.z_in_force()?;
    Ok(epsilon_bound(d, t / scales.tau_h, scales.hbar_ratio(), z))
}

/// Smallest `epsilon` reachable at time `t` for any diffusion strength.
pub fn epsilon_floor(scales: &ScaleReport, t: f64, d: usize) -> f64 {
    epsilon_bound(d, t / scales.tau_h, scales.hbar_ratio(), 1.0)
}

/// Minimal `D0` guaranteeing error `epsilon` up to time `t`.
pub fn diffusion_threshold(scales: &ScaleReport, epsilon: f64, t: f64, d: usize) -> Result<f64> {
    if !(epsilon > 0.0) || !(t > 0.0) {
        return Err(Error::InvalidArgument("epsilon and t must be positive".into()));
    }
    let floor = epsilon_floor(scales, t, d);
    if epsilon < floor {
        return Err(Error::EpsilonBelowFloor { epsilon, floor });
    }
    let h = scales.hbar_ratio();
    Ok(((d as f64).powf(1.5) * t / (epsilon * scales.tau_h)).powf(2.0 / 3.0) * h.powf(4.0 / 3.0))
}

/// `lambda^{-1} ln(s / hbar)`.
pub fn ehrenfest_time(lyapunov: f64, action_scale: f64, hbar: f64) -> Result<f64> {
    check_positive(&[lyapunov, action_scale, hbar])?;
    if action_scale <= hbar {
        return Err(Error::NoSemiclassicalRegime { action: action_scale, hbar });
    }
    Ok((action_scale / hbar).ln() / lyapunov)
}

/// `lambda^{-1} sqrt(s / hbar)`, the extended correspondence time.
pub fn correspondence_time(lyapunov: f64, action_scale: f64, hbar: f64) -> Result<f64> {
    check_positive(&[lyapunov, action_scale, hbar])?;
    if action_scale <= hbar {
        return Err(Error::NoSemiclassicalRegime { action: action_scale, hbar });
    }
    Ok((action_scale / hbar).sqrt() / lyapunov)
}

/// `hbar v^{-7/2} m^{-1} Lambda^{3/2} s^{9/2}`.
pub fn physical_example_time(
    mass: f64,
    velocity: f64,
    length_scale: f64,
    localization_rate: f64,
    hbar: f64,
) -> Result<f64> {
    check_positive(&[mass, velocity, length_scale, localization_rate, hbar])?;
    Ok(hbar * velocity.powf(-3.5) / mass * localization_rate.powf(1.5) * length_scale.powf(4.5))
}

fn check_positive(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| *v > 0.0 && v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("arguments must be positive: {values:?}")))
    }
}

/// CODATA reduced Planck constant in J s.
pub const HBAR_SI: f64 = 1.054_571_817e-34;

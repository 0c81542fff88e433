//! Error of the local harmonic approximation of the potential around a
//! Gaussian's centroid: closed-form bounds and direct numerical evaluation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::classical::phase::{PhaseField, PhaseGrid};
use crate::error::{Error, Result};
use crate::gaussian::{gaussian_moment6, GaussianState};
use crate::linalg::op_norm;
use crate::potentials::expansion_unchecked;
use crate::quantum::grid::{gaussian_to_grid, PositionGrid};
use crate::scales::HamiltonianModel;

/// Bounds and measured values for one `(alpha, sigma)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicErrorReport {
    pub alpha: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub hbar: f64,
    pub dims: usize,
    pub bound_quantum: f64,
    pub bound_classical: f64,
    pub numeric_quantum: f64,
    pub numeric_classical: f64,
}

impl HarmonicErrorReport {
    pub fn ratio_quantum(&self) -> f64 {
        ratio(self.numeric_quantum, self.bound_quantum)
    }

    pub fn ratio_classical(&self) -> f64 {
        ratio(self.numeric_classical, self.bound_classical)
    }
}

fn ratio(num: f64, bound: f64) -> f64 {
    if bound == 0.0 {
        if num == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        num / bound
    }
}

fn position_block_norm(sigma: &DMatrix<f64>, d: usize) -> f64 {
    op_norm(&sigma.view((0, 0), (d, d)).into_owned())
}

/// `sqrt(5 d^3 / 3) sup3 |sigma^xx|^{3/2} / hbar`.
pub fn lemma_bound_quantum(sigma: &DMatrix<f64>, model: &HamiltonianModel, hbar: f64, d: usize) -> f64 {
    let d3 = (d as f64).powi(3);
    (5.0 * d3 / 3.0).sqrt() * model.sup3 * position_block_norm(sigma, d).powf(1.5) / hbar
}

/// `sqrt(3 d^3) sup3 |sigma^xx|^{3/2} / hbar`.
pub fn lemma_bound_classical(sigma: &DMatrix<f64>, model: &HamiltonianModel, hbar: f64, d: usize) -> f64 {
    let d3 = (d as f64).powi(3);
    (3.0 * d3).sqrt() * model.sup3 * position_block_norm(sigma, d).powf(1.5) / hbar
}

fn check_one_dim(model: &HamiltonianModel, alpha: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<()> {
    if model.dims() != 1 || alpha.len() != 2 || sigma.shape() != (2, 2) {
        return Err(Error::DimensionMismatch { expected: 1, got: model.dims() });
    }
    Ok(())
}

/// Trace norm of `-(i/hbar) [dV, tau]` for the pure Gaussian `tau`, where
/// `dV = V - V^{[alpha_x, 2]}`, from the spectrum of the commutator on `grid`.
pub fn numeric_harmonic_error_quantum(
    alpha: &DVector<f64>,
    sigma: &DMatrix<f64>,
    model: &HamiltonianModel,
    hbar: f64,
    grid: &PositionGrid,
) -> Result<f64> {
    check_one_dim(model, alpha, sigma)?;
    let state = GaussianState::new(alpha.clone(), sigma.clone(), hbar)?;
    let rho = gaussian_to_grid(&state, grid, model.mass)?;
    let exp = expansion_unchecked(model, &[alpha[0]]);
    let dv: Vec<f64> = grid.nodes().iter().map(|&x| exp.remainder(model, &[x])).collect();
    let n = grid.n;
    let scale = Complex64::new(0.0, -1.0 / hbar);
    let c = DMatrix::from_fn(n, n, |j, k| scale * (dv[j] - dv[k]) * rho.rho[(j, k)]);
    Ok(c.symmetric_eigenvalues().iter().map(|v| v.abs()).sum())
}

/// `(2/hbar) sqrt(E[dV^2])` for `dV = eps x^3` and a Gaussian centered at the
/// origin. For a pure state the commutator has rank two, so this is its trace
/// norm exactly.
pub fn cubic_commutator_norm(epsilon: f64, sigma: &DMatrix<f64>, hbar: f64) -> Result<f64> {
    let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    let x6 = gaussian_moment6(sigma, &p, &p, &p)?;
    Ok(2.0 / hbar * epsilon.abs() * x6.sqrt())
}

/// `int |d_p tau(x, p) d_x dV(x)| dx dp` on `grid`.
pub fn numeric_harmonic_error_classical(
    alpha: &DVector<f64>,
    sigma: &DMatrix<f64>,
    model: &HamiltonianModel,
    grid: PhaseGrid,
) -> Result<f64> {
    check_one_dim(model, alpha, sigma)?;
    let (sx, sp) = (sigma[(0, 0)].sqrt(), sigma[(1, 1)].sqrt());
    if alpha[0] - 7.0 * sx < grid.x_min
        || alpha[0] + 7.0 * sx > grid.x_max
        || alpha[1] - 7.0 * sp < grid.p_min
        || alpha[1] + 7.0 * sp > grid.p_max
    {
        return Err(Error::GridCoverage("Gaussian not covered by the phase grid".into()));
    }
    let inv = sigma.clone().try_inverse().ok_or(Error::NotPositiveDefinite(0.0))?;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma.determinant().sqrt());
    let exp = expansion_unchecked(model, &[alpha[0]]);
    let field = PhaseField::from_fn(grid, |x, p| {
        let b = [x - alpha[0], p - alpha[1]];
        let q = inv[(0, 0)] * b[0] * b[0] + 2.0 * inv[(0, 1)] * b[0] * b[1] + inv[(1, 1)] * b[1] * b[1];
        let tau = norm * (-0.5 * q).exp();
        let dtau_dp = -(inv[(1, 0)] * b[0] + inv[(1, 1)] * b[1]) * tau;
        let ddv = model.potential.gradient(&[x])[0] - exp.gradient[0] - exp.hessian[(0, 0)] * b[0];
        (dtau_dp * ddv).abs()
    });
    Ok(field.mass())
}

/// Both bounds and both numerical values, on grids fitted to the Gaussian.
pub fn harmonic_error_report(
    alpha: &DVector<f64>,
    sigma: &DMatrix<f64>,
    model: &HamiltonianModel,
    hbar: f64,
    n: usize,
) -> Result<HarmonicErrorReport> {
    check_one_dim(model, alpha, sigma)?;
    let (sx, sp) = (sigma[(0, 0)].sqrt(), sigma[(1, 1)].sqrt());
    let grid = PositionGrid::new(n, alpha[0] - 12.0 * sx, alpha[0] + 12.0 * sx)?;
    let phase = PhaseGrid::new(n, n, (alpha[0] - 9.0 * sx, alpha[0] + 9.0 * sx), (alpha[1] - 9.0 * sp, alpha[1] + 9.0 * sp))?;
    Ok(HarmonicErrorReport {
        alpha: alpha.clone(),
        sigma: sigma.clone(),
        hbar,
        dims: 1,
        bound_quantum: lemma_bound_quantum(sigma, model, hbar, 1),
        bound_classical: lemma_bound_classical(sigma, model, hbar, 1),
        numeric_quantum: numeric_harmonic_error_quantum(alpha, sigma, model, hbar, &grid)?,
        numeric_classical: numeric_harmonic_error_classical(alpha, sigma, model, phase)?,
    })
}

//! Decomposition of the covariance drift into a skewing part that keeps
//! Gaussians pure and inside the squeeze window, and a broadening part that
//! becomes centroid diffusion.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{symplectic_defect, PURITY_TOL};
use crate::linalg::{min_eigenvalue, sym_eigenvalues, symmetrize};
use crate::potentials::whitened_hamiltonian_matrix;
use crate::scales::{HamiltonianModel, ScaleReport};

/// Smallest `z` used in the denominator of [`m_matrix`].
pub const Z_EFF_MIN: f64 = 1.0 + 1e-6;

pub fn effective_z(z: f64) -> f64 {
    z.max(Z_EFF_MIN)
}

/// `diag(D_x I, D_p I)`.
pub fn diffusion_matrix(scales: &ScaleReport) -> DMatrix<f64> {
    let d = scales.dims;
    let mut diag = DVector::zeros(2 * d);
    for k in 0..d {
        diag[k] = scales.diffusion.d_x;
        diag[d + k] = scales.diffusion.d_p;
    }
    DMatrix::from_diagonal(&diag)
}

/// `sigma*^{-1/2} D sigma*^{-1/2}`.
pub fn whitened_diffusion(scales: &ScaleReport) -> DMatrix<f64> {
    scales.whiten(&diffusion_matrix(scales))
}

/// `M = (D0 s_H / hbar tau_H) (s - s^{-1}) / (1 - z^{-2})` for the whitened
/// covariance `s`.
pub fn m_matrix(sigma_tilde: &DMatrix<f64>, scales: &ScaleReport, z: f64) -> Result<DMatrix<f64>> {
    m_matrix_rate(sigma_tilde, scales.broadening_rate, z)
}

pub(crate) fn m_matrix_rate(sigma_tilde: &DMatrix<f64>, rate: f64, z: f64) -> Result<DMatrix<f64>> {
    let s = symmetrize(sigma_tilde);
    let inv = match s.clone().cholesky() {
        Some(c) => c.inverse(),
        None => return Err(Error::NotPositiveDefinite(min_eigenvalue(&s))),
    };
    let ze = effective_z(z);
    Ok(symmetrize(&((s - inv) * (rate / (1.0 - ze.powi(-2))))))
}

/// Whitened `(S_Z, S_D)` from the whitened drift matrix `f`, covariance `s`
/// and diffusion `d`.
pub fn split_whitened(
    f: &DMatrix<f64>,
    s: &DMatrix<f64>,
    d: &DMatrix<f64>,
    rate: f64,
    z: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = m_matrix_rate(s, rate, z)?;
    let a = f - &m;
    let sz = symmetrize(&(&a * s + s * a.transpose()));
    let sd = symmetrize(&(d + &m * s + s * &m));
    Ok((sz, sd))
}

/// `(S_Z, S_D)` in physical units at centroid `alpha` and pure NTS covariance
/// `sigma`.
pub fn split_sdot(
    alpha: &DVector<f64>,
    sigma: &DMatrix<f64>,
    model: &HamiltonianModel,
    scales: &ScaleReport,
    z: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    model.check_dims(alpha.len() / 2)?;
    let s = scales.whiten(sigma);
    if symplectic_defect(&s) > PURITY_TOL {
        return Err(Error::NotPure(format!("symplectic defect {:.3e}", symplectic_defect(&s))));
    }
    let ev = sym_eigenvalues(&s);
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    if lo < 1.0 / z - 1e-9 || hi > z + 1e-9 {
        return Err(Error::TooSqueezed { min: lo, max: hi, z });
    }
    let f = whitened_hamiltonian_matrix(model, alpha, scales);
    let (sz, sd) = split_whitened(&f, &s, &whitened_diffusion(scales), scales.broadening_rate, z)?;
    Ok((scales.unwhiten(&sz), scales.unwhiten(&sd)))
}

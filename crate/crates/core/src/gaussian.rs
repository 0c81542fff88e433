//! Gaussian states and symplectic covariance algebra.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, asymmetry, max_abs, omega, sym_apply, sym_eigenvalues, symmetrize};
use crate::scales::ScaleReport;

/// Mean and covariance of a Gaussian on phase space, positions first.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub hbar: f64,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, hbar: f64) -> Result<Self> {
        let n = mean.len();
        if n == 0 || n % 2 != 0 {
            return Err(Error::InvalidArgument(format!("phase-space dimension {n} must be even")));
        }
        linalg::ensure_square(&cov, n)?;
        check_symmetric(&cov)?;
        let min = linalg::min_eigenvalue(&cov);
        if !(min > 0.0) {
            return Err(Error::NotPositiveDefinite(min));
        }
        if !(hbar > 0.0) {
            return Err(Error::InvalidArgument("hbar must be positive".into()));
        }
        Ok(Self { mean, cov: symmetrize(&cov), hbar })
    }

    /// Coherent state `sigma*` centered at `alpha`.
    pub fn coherent(alpha: DVector<f64>, scales: &ScaleReport) -> Result<Self> {
        Self::new(alpha, scales.sigma_star.clone(), scales.hbar)
    }

    pub fn dims(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        symplectic_defect(&(&self.cov * (2.0 / self.hbar))) <= tol
    }

    /// Classical density `tau^C` at `point`.
    pub fn density(&self, point: &DVector<f64>) -> f64 {
        gaussian_density(&self.mean, &self.cov, point)
    }
}

/// Default purity tolerance on the symplectic defect.
pub const PURITY_TOL: f64 = 1e-8;

/// Eigenvalue tolerance of the matrix inequalities in the NTS test.
pub const NTS_TOL: f64 = 1e-9;

/// `Omega` with its defining identities checked on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticForm {
    pub dims: usize,
    pub matrix: DMatrix<f64>,
}

impl SymplecticForm {
    pub fn new(dims: usize) -> Self {
        let matrix = omega(dims);
        let n = 2 * dims;
        assert_eq!(&matrix * &matrix, -DMatrix::<f64>::identity(n, n));
        assert_eq!(matrix.transpose(), -&matrix);
        Self { dims, matrix }
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let a = asymmetry(m);
    if a > 1e-12 * max_abs(m).max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric(a));
    }
    Ok(())
}

/// `|A^T Omega A - Omega|_max`.
pub fn symplectic_defect(a: &DMatrix<f64>) -> f64 {
    let w = omega(a.nrows() / 2);
    max_abs(&(a.transpose() * &w * a - w))
}

pub fn is_pure_gaussian(cov: &DMatrix<f64>, hbar: f64, tol: f64) -> Result<bool> {
    check_symmetric(cov)?;
    Ok(symplectic_defect(&(cov * (2.0 / hbar))) <= tol)
}

/// Extreme eigenvalues of `sigma*^{-1/2} cov sigma*^{-1/2}`.
pub fn nts_spectrum(cov: &DMatrix<f64>, sigma_star: &DMatrix<f64>) -> (f64, f64) {
    let w = sym_apply(sigma_star, |v| 1.0 / v.sqrt());
    let ev = sym_eigenvalues(&(&w * cov * &w));
    (ev[0], ev[ev.len() - 1])
}

/// `cov <= z sigma*`.
pub fn nts_upper(cov: &DMatrix<f64>, sigma_star: &DMatrix<f64>, z: f64) -> bool {
    nts_spectrum(cov, sigma_star).1 <= z + NTS_TOL
}

/// `cov >= sigma* / z`.
pub fn nts_lower(cov: &DMatrix<f64>, sigma_star: &DMatrix<f64>, z: f64) -> bool {
    nts_spectrum(cov, sigma_star).0 >= 1.0 / z - NTS_TOL
}

/// `sigma*/z <= cov <= z sigma*`.
pub fn nts_check(cov: &DMatrix<f64>, sigma_star: &DMatrix<f64>, z: f64) -> bool {
    let (lo, hi) = nts_spectrum(cov, sigma_star);
    lo >= 1.0 / z - NTS_TOL && hi <= z + NTS_TOL
}

/// Eigenvalues of a pure covariance matched as `(lambda, (hbar/2)^2 / lambda)`.
pub fn covariance_eigen_pairs(cov: &DMatrix<f64>, hbar: f64) -> Result<Vec<(f64, f64)>> {
    check_symmetric(cov)?;
    let ev = sym_eigenvalues(cov);
    let n = ev.len();
    let target = hbar * hbar / 4.0;
    let mut pairs = Vec::with_capacity(n / 2);
    let mut worst = (0.0, 0.0_f64);
    for i in 0..n / 2 {
        let (a, b) = (ev[i], ev[n - 1 - i]);
        let err = (a * b / target - 1.0).abs();
        if err > worst.1 {
            worst = (a, err);
        }
        pairs.push((a, b));
    }
    if worst.1 > 1e-10 {
        return Err(Error::NotPure(format!(
            "eigenvalue {:.6e} pairs to (hbar/2)^2 with relative error {:.3e}",
            worst.0, worst.1
        )));
    }
    Ok(pairs)
}

fn check_moment_dims(cov: &DMatrix<f64>, ms: &[&DMatrix<f64>]) -> Result<()> {
    for m in ms {
        if m.shape() != cov.shape() {
            return Err(Error::DimensionMismatch { expected: cov.nrows(), got: m.nrows() });
        }
    }
    Ok(())
}

/// `E[b^T A b]` for `b ~ N(0, cov)`.
pub fn gaussian_moment(cov: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<f64> {
    check_moment_dims(cov, &[a])?;
    Ok((cov * a).trace())
}

/// `E[(b^T A b)(b^T B b)]`.
pub fn gaussian_moment4(cov: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    check_moment_dims(cov, &[a, b])?;
    let (sa, sb) = (cov * a, cov * b);
    Ok(sa.trace() * sb.trace() + 2.0 * (&sa * &sb).trace())
}

/// `E[(b^T A b)(b^T B b)(b^T C b)]`.
pub fn gaussian_moment6(
    cov: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<f64> {
    check_moment_dims(cov, &[a, b, c])?;
    let (sa, sb, sc) = (cov * a, cov * b, cov * c);
    let (ta, tb, tc) = (sa.trace(), sb.trace(), sc.trace());
    Ok(ta * tb * tc
        + 2.0 * ta * (&sb * &sc).trace()
        + 2.0 * tb * (&sc * &sa).trace()
        + 2.0 * tc * (&sb * &sa).trace()
        + 8.0 * (&sa * &sb * &sc).trace())
}

/// Normalized Gaussian density `N(mean, cov)` at `point`.
pub fn gaussian_density(mean: &DVector<f64>, cov: &DMatrix<f64>, point: &DVector<f64>) -> f64 {
    let n = mean.len();
    let chol = match cov.clone().cholesky() {
        Some(c) => c,
        None => return f64::NAN,
    };
    let diff = point - mean;
    let y = chol.solve(&diff);
    let det = chol.l().diagonal().iter().map(|v| v * v).product::<f64>();
    (-0.5 * diff.dot(&y)).exp() / ((2.0 * PI).powi(n as i32) * det).sqrt()
}

/// Finite-difference check of `d_a d_b tau = 2 d tau / d sigma_ab`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeResidual {
    /// Max residual over the probe points at step `h`.
    pub value: f64,
    /// The same at step `h/2`.
    pub half_step: f64,
    /// False when halving `h` did not reduce the residual, i.e. `h` is too
    /// large (or already at round-off).
    pub converging: bool,
}

pub fn gaussian_derivative_residual(state: &GaussianState, a: usize, b: usize, h: f64) -> Result<DerivativeResidual> {
    let n = state.mean.len();
    if a >= n || b >= n {
        return Err(Error::DimensionMismatch { expected: n, got: a.max(b) + 1 });
    }
    let value = derivative_residual_at(state, a, b, h);
    let half_step = derivative_residual_at(state, a, b, h / 2.0);
    Ok(DerivativeResidual { value, half_step, converging: half_step < value })
}

fn derivative_residual_at(state: &GaussianState, a: usize, b: usize, h: f64) -> f64 {
    let n = state.mean.len();
    let std: Vec<f64> = (0..n).map(|i| state.cov[(i, i)].sqrt()).collect();
    let mut probes = vec![state.mean.clone()];
    for i in 0..n {
        for s in [-1.0, 1.0] {
            let mut p = state.mean.clone();
            p[i] += s * std[i];
            probes.push(p);
        }
        for j in i + 1..n {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut p = state.mean.clone();
                p[i] += 0.7 * si * std[i];
                p[j] += 0.7 * sj * std[j];
                probes.push(p);
            }
        }
    }
    let tau = |x: &DVector<f64>, cov: &DMatrix<f64>| gaussian_density(&state.mean, cov, x);
    let (ha, hb) = (h * std[a], h * std[b]);
    let scale = state.cov[(a, b)].abs().max((state.cov[(a, a)] * state.cov[(b, b)]).sqrt());
    let hs = h * scale;
    let mut e_ab = DMatrix::zeros(n, n);
    e_ab[(a, b)] = 1.0;
    e_ab[(b, a)] = 1.0;
    let mut worst = 0.0_f64;
    for x in &probes {
        let shift = |da: f64, db: f64| {
            let mut y = x.clone();
            y[a] += da;
            y[b] += db;
            tau(&y, &state.cov)
        };
        let dd = if a == b {
            (shift(ha, 0.0) - 2.0 * tau(x, &state.cov) + shift(-ha, 0.0)) / (ha * ha)
        } else {
            (shift(ha, hb) - shift(ha, -hb) - shift(-ha, hb) + shift(-ha, -hb)) / (4.0 * ha * hb)
        };
        let ds = (tau(x, &(&state.cov + &e_ab * hs)) - tau(x, &(&state.cov - &e_ab * hs))) / (2.0 * hs);
        // Off the diagonal the symmetric perturbation moves sigma_ab and
        // sigma_ba together, which already doubles the single-entry derivative.
        let target = if a == b { 2.0 * ds } else { ds };
        worst = worst.max((dd - target).abs());
    }
    worst
}

/// Closest pure covariance: keeps the symplectic frame of the Williamson
/// decomposition and resets the symplectic eigenvalues to `hbar/2`.
pub fn purify(cov: &DMatrix<f64>, hbar: f64) -> DMatrix<f64> {
    let a = symmetrize(&(cov * (2.0 / hbar)));
    let w = omega(a.nrows() / 2);
    let root = linalg::sym_sqrt(&a);
    let b = &root * &w * &root;
    let inv = sym_apply(&-(&b * &b), |v| 1.0 / v.sqrt());
    symmetrize(&(&root * inv * &root)) * (hbar / 2.0)
}

/// A random orthogonal symplectic matrix.
pub fn random_orthosymplectic<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let b: f64 = rng.sample(StandardNormal);
            let a: f64 = rng.sample(StandardNormal);
            if i <= j {
                x[(i, d + j)] += b;
                x[(d + j, i)] -= b;
                if i != j {
                    x[(j, d + i)] += b;
                    x[(d + i, j)] -= b;
                }
            }
            if i < j {
                x[(i, j)] += a;
                x[(j, i)] -= a;
                x[(d + i, d + j)] += a;
                x[(d + j, d + i)] -= a;
            }
        }
    }
    (x * 1.5).exp()
}

/// `exp(Omega H)` for a random symmetric `H` of size `scale`.
pub fn random_symplectic<R: Rng + ?Sized>(d: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let n = 2 * d;
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let h = symmetrize(&g) * scale;
    (omega(d) * h).exp()
}

/// Random pure covariance `sigma*^{1/2} K diag(e^{2r}, e^{-2r}) K^T sigma*^{1/2}`
/// with orthosymplectic `K` and squeeze `e^{2r}` uniform in log scale on
/// `[1, z]`.
pub fn random_pure_nts<R: Rng + ?Sized>(sigma_star: &DMatrix<f64>, z: f64, rng: &mut R) -> DMatrix<f64> {
    let d = sigma_star.nrows() / 2;
    let k = random_orthosymplectic(d, rng);
    let mut diag = DVector::zeros(2 * d);
    for i in 0..d {
        let s = if z > 1.0 { rng.random_range(0.0..z.ln()) } else { 0.0 };
        diag[i] = s.exp();
        diag[d + i] = (-s).exp();
    }
    let tilde = &k * DMatrix::from_diagonal(&diag) * k.transpose();
    let root = sigma_star.map(f64::sqrt);
    symmetrize(&(&root * tilde * &root))
}

/// Random symmetric positive-definite matrix with condition number at most ~`cond`.
pub fn random_spd<R: Rng + ?Sized>(n: usize, cond: f64, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let diag = DVector::from_fn(n, |_, _| cond.powf(rng.random_range(-0.5..0.5)));
    symmetrize(&(&q * DMatrix::from_diagonal(&diag) * q.transpose()))
}

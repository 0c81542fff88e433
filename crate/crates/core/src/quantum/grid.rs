use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::gaussian::{is_pure_gaussian, GaussianState, PURITY_TOL};

/// `n` equally spaced nodes `x_j = x_min + j dx`, `dx = (x_max - x_min) / n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositionGrid {
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
}

impl PositionGrid {
    pub fn new(n: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidArgument(format!("grid size {n} must be even and at least 4")));
        }
        if !(x_min < x_max) {
            return Err(Error::InvalidArgument("empty grid interval".into()));
        }
        Ok(Self { n, x_min, x_max })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Discrete momenta in FFT order.
    pub fn momenta(&self, hbar: f64) -> Vec<f64> {
        let n = self.n as i64;
        let dp = 2.0 * PI * hbar / (self.n as f64 * self.dx());
        (0..n).map(|k| if k < n / 2 { k } else { k - n } as f64 * dp).collect()
    }

    /// Largest representable momentum `pi hbar / dx`.
    pub fn p_max(&self, hbar: f64) -> f64 {
        PI * hbar / self.dx()
    }
}

/// Unitary discrete Fourier conjugation `X -> F X F^dagger` on square
/// matrices stored column-major.
#[derive(Clone)]
pub struct Spectral {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Spectral({})", self.n)
    }
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    /// Position to momentum representation.
    pub fn to_momentum(&self, m: &mut DMatrix<Complex64>) {
        self.conjugate(m, true);
    }

    /// Momentum to position representation.
    pub fn to_position(&self, m: &mut DMatrix<Complex64>) {
        self.conjugate(m, false);
    }

    fn conjugate(&self, m: &mut DMatrix<Complex64>, forward: bool) {
        let (left, right) = if forward { (&self.fwd, &self.inv) } else { (&self.inv, &self.fwd) };
        left.process(m.as_mut_slice());
        m.transpose_mut();
        right.process(m.as_mut_slice());
        m.transpose_mut();
        let s = 1.0 / self.n as f64;
        m.iter_mut().for_each(|v| *v *= s);
    }

    pub fn forward_vec(&self, v: &mut [Complex64]) {
        self.fwd.process(v);
    }
}

/// A density matrix on a position grid, stored as `R_jk = dx rho(x_j, x_k)`
/// so that `tr R = 1`.
#[derive(Clone, Debug)]
pub struct DensityMatrixGrid {
    pub grid: PositionGrid,
    pub rho: DMatrix<Complex64>,
    pub hbar: f64,
    pub mass: f64,
    pub time: f64,
}

impl DensityMatrixGrid {
    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    /// `max |R - R^dagger|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.grid.n;
        let mut worst = 0.0_f64;
        for j in 0..n {
            for k in j..n {
                worst = worst.max((self.rho[(j, k)] - self.rho[(k, j)].conj()).norm());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.rho.symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn position_density(&self) -> Vec<f64> {
        (0..self.grid.n).map(|j| self.rho[(j, j)].re).collect()
    }

    /// `(<x>, <x^2> - <x>^2)`.
    pub fn position_moments(&self) -> (f64, f64) {
        moments(&self.grid.nodes(), &self.position_density())
    }

    pub fn momentum_density(&self, spectral: &Spectral) -> Vec<f64> {
        let mut m = self.rho.clone();
        spectral.to_momentum(&mut m);
        (0..self.grid.n).map(|k| m[(k, k)].re).collect()
    }

    /// `(<p>, <p^2> - <p>^2)` with the spectral momentum operator.
    pub fn momentum_moments(&self, spectral: &Spectral) -> (f64, f64) {
        moments(&self.grid.momenta(self.hbar), &self.momentum_density(spectral))
    }

    /// `Re <(x - <x>)(p - <p>) + (p - <p>)(x - <x>)> / 2`.
    pub fn cross_moment(&self, spectral: &Spectral) -> f64 {
        // <XP> = sum_jk x_j R_jk P_kj; P = F^dagger diag(p) F.
        let n = self.grid.n;
        let p = self.grid.momenta(self.hbar);
        let mut pm = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            p.iter().map(|&v| Complex64::new(v, 0.0)),
        ));
        spectral.to_position(&mut pm);
        let x = self.grid.nodes();
        let (xm, _) = self.position_moments();
        let (pmean, _) = self.momentum_moments(spectral);
        let rp = &self.rho * &pm;
        let mut xp = Complex64::new(0.0, 0.0);
        for j in 0..n {
            xp += x[j] * rp[(j, j)];
        }
        // Symmetrized: Re tr(X P rho) equals Re <XP>; subtract mean product.
        xp.re - xm * pmean
    }

    /// Probability in the outer `frac` of the position and momentum ranges.
    pub fn edge_probability(&self, spectral: &Spectral, frac: f64) -> f64 {
        let n = self.grid.n;
        let w = ((n as f64 * frac).ceil() as usize).max(1);
        let pos = self.position_density();
        let mom = self.momentum_density(spectral);
        let edge_x: f64 = pos[..w].iter().chain(&pos[n - w..]).sum();
        // FFT order: the largest |p| sit around index n/2.
        let edge_p: f64 = mom[n / 2 - w..n / 2 + w].iter().sum();
        edge_x.max(0.0) + edge_p.max(0.0)
    }
}

fn moments(nodes: &[f64], weights: &[f64]) -> (f64, f64) {
    let total: f64 = weights.iter().sum();
    let mean = nodes.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / total;
    let var = nodes.iter().zip(weights).map(|(x, w)| (x - mean).powi(2) * w).sum::<f64>() / total;
    (mean, var)
}

/// Adds `weight * dx * rho_G(x_j, x_k)` for a (possibly mixed) Gaussian with
/// mean `(x0, p0)` and covariance `[[a, c], [c, b]]`.
pub(crate) fn add_gaussian(
    out: &mut DMatrix<Complex64>,
    grid: &PositionGrid,
    hbar: f64,
    weight: f64,
    mean: (f64, f64),
    cov: (f64, f64, f64),
) {
    let (x0, p0) = mean;
    let (a, b, c) = cov;
    let dx = grid.dx();
    let reach = 10.0 * a.sqrt();
    let j0 = (((x0 - reach - grid.x_min) / dx).floor().max(0.0)) as usize;
    let j1 = ((((x0 + reach - grid.x_min) / dx).ceil()) as usize).min(grid.n - 1);
    if j0 > j1 {
        return;
    }
    let norm = weight * dx / (2.0 * PI * a).sqrt();
    let cond = b - c * c / a;
    for k in j0..=j1 {
        let xk = grid.x(k);
        for j in j0..=j1 {
            let xj = grid.x(j);
            let big = 0.5 * (xj + xk) - x0;
            let y = xj - xk;
            let mag = norm * (-big * big / (2.0 * a) - cond * y * y / (2.0 * hbar * hbar)).exp();
            let phase = (p0 + c * big / a) * y / hbar;
            out[(j, k)] += Complex64::from_polar(mag, phase);
        }
    }
}

/// Checks that `x0 +- 6 sqrt(var)` lies inside the grid.
pub(crate) fn check_coverage(grid: &PositionGrid, x0: f64, var: f64) -> Result<()> {
    let s = 6.0 * var.sqrt();
    if x0 - s < grid.x_min || x0 + s > grid.x_max - grid.dx() {
        return Err(Error::GridCoverage(format!(
            "x = {x0:.4} +- {s:.4} leaves [{}, {}]",
            grid.x_min, grid.x_max
        )));
    }
    Ok(())
}

/// Pure Gaussian wave packet on the grid.
pub fn gaussian_to_grid(state: &GaussianState, grid: &PositionGrid, mass: f64) -> Result<DensityMatrixGrid> {
    if state.dims() != 1 {
        return Err(Error::DimensionMismatch { expected: 2, got: state.mean.len() });
    }
    if !is_pure_gaussian(&state.cov, state.hbar, PURITY_TOL)? {
        return Err(Error::NotPure("grid wave packets need a pure covariance".into()));
    }
    let (a, c, b) = (state.cov[(0, 0)], state.cov[(0, 1)], state.cov[(1, 1)]);
    let hbar = state.hbar;
    let expected = (hbar * hbar / 4.0 + c * c) / a;
    if ((b - expected) / b).abs() > 1e-8 {
        return Err(Error::NotPure(format!("sigma_pp = {b:e} but purity needs {expected:e}")));
    }
    check_coverage(grid, state.mean[0], a)?;
    let (x0, p0) = (state.mean[0], state.mean[1]);
    let psi: Vec<Complex64> = grid
        .nodes()
        .iter()
        .map(|&x| {
            let u = x - x0;
            let re = -u * u / (4.0 * a);
            let im = u * u * 2.0 * c / (hbar * 4.0 * a) + p0 * u / hbar;
            Complex64::new(re, im).exp()
        })
        .collect();
    let dx = grid.dx();
    let norm: f64 = psi.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx;
    let n = grid.n;
    let rho = DMatrix::from_fn(n, n, |j, k| psi[j] * psi[k].conj() * (dx / norm));
    Ok(DensityMatrixGrid { grid: *grid, rho, hbar, mass, time: 0.0 })
}

/// Band-limited interpolation onto a grid `factor` times finer over the same
/// interval: the momentum-representation matrix is zero padded.
pub fn refine_density(rho: &DensityMatrixGrid, factor: usize) -> Result<DensityMatrixGrid> {
    if factor == 0 {
        return Err(Error::InvalidArgument("refinement factor must be positive".into()));
    }
    if factor == 1 {
        return Ok(rho.clone());
    }
    let n = rho.grid.n;
    let m = n * factor;
    let mut hat = rho.rho.clone();
    Spectral::new(n).to_momentum(&mut hat);
    let place = |k: usize| if k < n / 2 { k } else { k + m - n };
    let mut fine = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
    for b in 0..n {
        for a in 0..n {
            fine[(place(a), place(b))] = hat[(a, b)];
        }
    }
    Spectral::new(m).to_position(&mut fine);
    let grid = PositionGrid::new(m, rho.grid.x_min, rho.grid.x_max)?;
    Ok(DensityMatrixGrid { grid, rho: fine, hbar: rho.hbar, mass: rho.mass, time: rho.time })
}

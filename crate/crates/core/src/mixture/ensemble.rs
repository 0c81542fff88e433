use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::classical::phase::{PhaseField, PhaseGrid};
use crate::error::{Error, Result};
use crate::gaussian::{symplectic_defect, GaussianState, NTS_TOL, PURITY_TOL};
use crate::linalg::{min_eigenvalue, sym_eigenvalues};
use crate::quantum::grid::{add_gaussian, DensityMatrixGrid, PositionGrid};
use crate::rng::{block_words, keyed};
use crate::scales::{HamiltonianModel, ScaleReport};

use super::particle::{cloud_extent, split_particle, step_particle, MixtureMode, Particle};

/// Largest total weight a rendering may drop at the grid edges.
pub const COVERAGE_TOL: f64 = 1e-6;

/// Gaussian probability outside `[lo, hi]`.
fn tail(mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let r = std::f64::consts::FRAC_1_SQRT_2 / sd;
    0.5 * (libm::erfc((mean - lo) * r) + libm::erfc((hi - mean) * r))
}

/// Knobs of the particle realization.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct MixtureOptions {
    pub mode: MixtureMode,
    /// Whitened cloud variance above which a particle is split.
    pub split_threshold: f64,
    /// Share of the variance along the split direction handed to the
    /// children's offsets.
    pub split_fraction: f64,
    pub max_particles: usize,
}

impl Default for MixtureOptions {
    fn default() -> Self {
        Self { mode: MixtureMode::Cloud, split_threshold: 1.0, split_fraction: 0.8, max_particles: 1000 }
    }
}

/// Running extremes over a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureStats {
    pub steps: u64,
    pub max_squeeze: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub max_defect_before: f64,
    pub max_defect_after: f64,
    pub projections: u64,
    pub max_projection: f64,
    pub splits: u64,
}

impl Default for MixtureStats {
    fn default() -> Self {
        Self {
            steps: 0,
            max_squeeze: 1.0,
            min_eigenvalue: 1.0,
            max_eigenvalue: 1.0,
            max_defect_before: 0.0,
            max_defect_after: 0.0,
            projections: 0,
            max_projection: 0.0,
            splits: 0,
        }
    }
}

/// Weighted pure Gaussians standing in for the distribution over
/// `(alpha, sigma)`.
#[derive(Clone, Debug)]
pub struct MixtureEnsemble {
    pub particles: Vec<Particle>,
    pub scales: ScaleReport,
    /// Squeeze bound in force.
    pub z: f64,
    pub seed: u64,
    pub time: f64,
    pub stats: MixtureStats,
}

impl MixtureEnsemble {
    /// Validates normalization, purity and the squeeze window.
    pub fn new(particles: Vec<Particle>, scales: ScaleReport, seed: u64) -> Result<Self> {
        let z = scales.z_in_force()?;
        if particles.is_empty() {
            return Err(Error::InvalidArgument("empty mixture".into()));
        }
        let n = 2 * scales.dims;
        let mut total = 0.0;
        let mut stats = MixtureStats::default();
        for (i, p) in particles.iter().enumerate() {
            if p.state.mean.len() != n || p.cloud.shape() != (n, n) {
                return Err(Error::DimensionMismatch { expected: n, got: p.state.mean.len() });
            }
            if !(p.weight >= 0.0) {
                return Err(Error::InvalidArgument(format!("particle {i} has weight {}", p.weight)));
            }
            total += p.weight;
            let s = scales.whiten(&p.state.cov);
            let defect = symplectic_defect(&s);
            if defect > PURITY_TOL {
                return Err(Error::NotPure(format!("particle {i}: symplectic defect {defect:.3e}")));
            }
            let ev = sym_eigenvalues(&s);
            let (lo, hi) = (ev[0], ev[n - 1]);
            if lo < 1.0 / z - NTS_TOL || hi > z + NTS_TOL {
                return Err(Error::TooSqueezed { min: lo, max: hi, z });
            }
            if min_eigenvalue(&p.cloud) < -1e-12 {
                return Err(Error::NotPositiveDefinite(min_eigenvalue(&p.cloud)));
            }
            stats.min_eigenvalue = stats.min_eigenvalue.min(lo);
            stats.max_eigenvalue = stats.max_eigenvalue.max(hi);
            stats.max_squeeze = stats.max_squeeze.max(hi.max(1.0 / lo));
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("weights sum to {total}")));
        }
        Ok(Self { particles, scales, z, seed, time: 0.0, stats })
    }

    /// A single coherent state at `alpha`.
    pub fn coherent(alpha: DVector<f64>, scales: ScaleReport, seed: u64) -> Result<Self> {
        let state = GaussianState::coherent(alpha, &scales)?;
        Self::new(vec![Particle::point(1.0, state)], scales, seed)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    /// Largest squeeze ratio among the current particles.
    pub fn max_squeeze(&self) -> f64 {
        self.particles.iter().map(|p| p.squeeze_ratio(&self.scales)).fold(1.0, f64::max)
    }

    /// Mixture mean and covariance (including cloud and centroid spread).
    pub fn moments(&self) -> (DVector<f64>, DMatrix<f64>) {
        let n = 2 * self.scales.dims;
        let mut mean = DVector::zeros(n);
        for p in &self.particles {
            mean += &p.state.mean * p.weight;
        }
        let mut cov = DMatrix::zeros(n, n);
        for p in &self.particles {
            let d = &p.state.mean - &mean;
            cov += (p.total_covariance() + &d * d.transpose()) * p.weight;
        }
        (mean, cov)
    }

    /// Advances every particle by `span` in steps of at most `dt`, splitting
    /// wide clouds between steps.
    pub fn advance(&mut self, model: &HamiltonianModel, span: f64, dt: f64, options: &MixtureOptions) -> Result<()> {
        let steps = (span / dt - 1e-9).ceil().max(0.0) as u64;
        if steps == 0 {
            return Ok(());
        }
        let h = span / steps as f64;
        let n = 2 * self.scales.dims;
        let words = block_words(n);
        let split = options.mode == MixtureMode::Cloud && model.sup3 > 0.0;
        for _ in 0..steps {
            let step = self.stats.steps;
            let (scales, z, seed, mode) = (&self.scales, self.z, self.seed, options.mode);
            let stepped: Vec<_> = self
                .particles
                .par_iter()
                .enumerate()
                .map(|(i, p)| {
                    let mut rng = keyed(seed, i as u64, step + 1, words);
                    step_particle(p, model, scales, z, h, mode, &mut rng)
                        .map_err(|e| match e {
                            Error::Invariant { what, .. } => Error::Invariant { step: step as usize + 1, what },
                            other => other,
                        })
                })
                .collect::<Result<_>>()?;
            let mut next = Vec::with_capacity(stepped.len());
            for (p, r) in stepped {
                let st = &mut self.stats;
                st.max_defect_before = st.max_defect_before.max(r.defect_before);
                st.max_defect_after = st.max_defect_after.max(r.defect_after);
                if r.projection > 0.0 {
                    st.projections += 1;
                    st.max_projection = st.max_projection.max(r.projection);
                }
                st.min_eigenvalue = st.min_eigenvalue.min(r.min_eigenvalue);
                st.max_eigenvalue = st.max_eigenvalue.max(r.max_eigenvalue);
                st.max_squeeze = st.max_squeeze.max(r.max_eigenvalue.max(1.0 / r.min_eigenvalue));
                next.push(p);
            }
            if split {
                next = self.split_wide(next, options);
            }
            self.particles = next;
            self.stats.steps += 1;
            self.time += h;
        }
        Ok(())
    }

    fn split_wide(&mut self, particles: Vec<Particle>, options: &MixtureOptions) -> Vec<Particle> {
        let mut count = particles.len();
        let mut out = Vec::with_capacity(count);
        let mut queue: Vec<Particle> = particles.into_iter().rev().collect();
        while let Some(p) = queue.pop() {
            if count + 2 <= options.max_particles && cloud_extent(&p, &self.scales).0 > options.split_threshold {
                count += 2;
                self.stats.splits += 1;
                let kids = split_particle(&p, &self.scales, options.split_fraction);
                queue.extend(kids.into_iter().rev());
            } else {
                out.push(p);
            }
        }
        out
    }

    /// `sum_i w_i rho_i` on a position grid, each particle rendered as the
    /// mixed Gaussian of its cloud.
    pub fn to_density_grid(&self, grid: &PositionGrid) -> Result<DensityMatrixGrid> {
        if self.scales.dims != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: self.scales.dims });
        }
        let hbar = self.scales.hbar;
        let mut rho = DMatrix::from_element(grid.n, grid.n, Complex64::new(0.0, 0.0));
        let p_max = grid.p_max(hbar);
        let mut lost = 0.0;
        for p in &self.particles {
            let c = p.total_covariance();
            lost += p.weight
                * (tail(p.state.mean[0], c[(0, 0)].sqrt(), grid.x_min, grid.x_max - grid.dx())
                    + tail(p.state.mean[1], c[(1, 1)].sqrt(), -p_max, p_max));
            add_gaussian(&mut rho, grid, hbar, p.weight, (p.state.mean[0], p.state.mean[1]), (c[(0, 0)], c[(1, 1)], c[(0, 1)]));
        }
        if lost > COVERAGE_TOL {
            return Err(Error::GridCoverage(format!("{lost:.3e} of the mixture lies outside the position grid")));
        }
        Ok(DensityMatrixGrid { grid: *grid, rho, hbar, mass: self.scales.mass, time: self.time })
    }

    /// `sum_i w_i N(alpha_i, sigma_i + C_i)` sampled at cell centers.
    pub fn to_phase_field(&self, grid: PhaseGrid) -> Result<PhaseField> {
        if self.scales.dims != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: self.scales.dims });
        }
        let mut field = PhaseField::zeros(grid);
        field.time = self.time;
        let mut lost = 0.0;
        for p in &self.particles {
            let c = p.total_covariance();
            let (mx, mp) = (p.state.mean[0], p.state.mean[1]);
            let (sx, sp) = (c[(0, 0)].sqrt(), c[(1, 1)].sqrt());
            lost += p.weight * (tail(mx, sx, grid.x_min, grid.x_max) + tail(mp, sp, grid.p_min, grid.p_max));
            let det = c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(0, 1)];
            let (ixx, ipp, ixp) = (c[(1, 1)] / det, c[(0, 0)] / det, -c[(0, 1)] / det);
            let norm = p.weight / (2.0 * PI * det.sqrt());
            let range = |m: f64, s: f64, lo: f64, h: f64, n: usize| {
                let a = (((m - 9.0 * s - lo) / h).floor().max(0.0)) as usize;
                let b = ((((m + 9.0 * s - lo) / h).ceil()).max(0.0) as usize).min(n);
                a..b
            };
            for i in range(mx, sx, grid.x_min, grid.dx(), grid.nx) {
                let dx = grid.x(i) - mx;
                for k in range(mp, sp, grid.p_min, grid.dp(), grid.np) {
                    let dp = grid.p(k) - mp;
                    let q = ixx * dx * dx + 2.0 * ixp * dx * dp + ipp * dp * dp;
                    field.values[i * grid.np + k] += norm * (-0.5 * q).exp();
                }
            }
        }
        if lost > COVERAGE_TOL {
            return Err(Error::GridCoverage(format!("{lost:.3e} of the mixture lies outside the phase grid")));
        }
        Ok(field)
    }

    /// Cell averages: rendered `refine` times finer, then block averaged.
    pub fn to_phase_cells(&self, grid: PhaseGrid, refine: usize) -> Result<PhaseField> {
        self.to_phase_field(grid.refined(refine))?.coarse_grain(refine)
    }
}

pub fn mixture_to_density_grid(ens: &MixtureEnsemble, grid: &PositionGrid) -> Result<DensityMatrixGrid> {
    ens.to_density_grid(grid)
}

pub fn mixture_to_phase_field(ens: &MixtureEnsemble, grid: PhaseGrid) -> Result<PhaseField> {
    ens.to_phase_field(grid)
}

/// Evolves to `t_final`, returning `snapshots` equally spaced ensembles after
/// the initial one.
pub fn evolve_mixture(
    ens: &MixtureEnsemble,
    model: &HamiltonianModel,
    t_final: f64,
    dt: f64,
    snapshots: usize,
    options: &MixtureOptions,
) -> Result<Vec<MixtureEnsemble>> {
    let n = snapshots.max(1);
    let mut cur = ens.clone();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        cur.advance(model, t_final / n as f64, dt, options)?;
        out.push(cur.clone());
    }
    Ok(out)
}

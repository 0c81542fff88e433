//! Orchestration: the three dynamics side by side, the breakdown
//! demonstration and the physical example.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classical::{
    evolve_langevin_ensemble, l1_distance, FpDiagnostics, FpSolver, LangevinEnsemble, PhaseField,
};
use crate::config::Experiment;
use crate::error::{Error, Result};
use crate::gaussian::{random_pure_nts, GaussianState};
use crate::harmonic_error::{harmonic_error_report, HarmonicErrorReport};
use crate::mixture::{MixtureEnsemble, MixtureStats, Particle};
use crate::quantum::{
    gaussian_to_grid, refine_density, trace_distance, wigner_transform_grid, DensityMatrixGrid, LindbladSolver, QuantumDiagnostics,
};
use crate::scales::{
    correspondence_time, ehrenfest_time, physical_example_time, theorem_epsilon, Bound, DiffusionSpec,
    HamiltonianModel, HBAR_SI,
};

/// One snapshot of a comparison run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub time: f64,
    pub t_over_tau: f64,
    pub epsilon: f64,
    pub trace_distance: f64,
    pub l1_distance: f64,
    pub pass: bool,
    pub particles: usize,
    pub max_squeeze: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub seed: u64,
    pub margin: f64,
    pub abs_tolerance: f64,
    pub bound_applicable: bool,
    pub hbar: f64,
    pub hbar_ratio: f64,
    pub d0: f64,
    pub z: f64,
    pub tau_h: f64,
    pub rows: Vec<ComparisonRow>,
    #[serde(skip)]
    pub mixture_stats: MixtureStats,
    #[serde(skip)]
    pub quantum: Vec<QuantumDiagnostics>,
    #[serde(skip)]
    pub classical: Vec<FpDiagnostics>,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn max_trace_distance(&self) -> f64 {
        self.rows.iter().map(|r| r.trace_distance).fold(0.0, f64::max)
    }

    pub fn max_l1_distance(&self) -> f64 {
        self.rows.iter().map(|r| r.l1_distance).fold(0.0, f64::max)
    }

    /// Largest `measured / epsilon(t)` over both distances, skipping
    /// snapshots with `epsilon = 0`.
    pub fn worst_ratio(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.epsilon > 0.0)
            .map(|r| r.trace_distance.max(r.l1_distance) / r.epsilon)
            .fold(0.0, f64::max)
    }
}

fn one_dim(exp: &Experiment) -> Result<()> {
    if exp.model.dims() != 1 || exp.position_grid.is_none() {
        return Err(Error::DimensionMismatch { expected: 1, got: exp.model.dims() });
    }
    Ok(())
}

/// `rho(t)` on the position grid at each snapshot time.
pub fn run_quantum(exp: &Experiment) -> Result<Vec<(DensityMatrixGrid, QuantumDiagnostics)>> {
    one_dim(exp)?;
    let grid = exp.position_grid.unwrap();
    let rho0 = gaussian_to_grid(&exp.initial, &grid, exp.model.mass)?;
    let solver = LindbladSolver::new(&exp.model, &exp.diffusion, &grid, exp.dt, exp.config.numerics.lindblad_method)?;
    solver.run(&rho0, &exp.times)
}

/// `f(t)` from `f(0) = W[rho(0)]`, solved `refine` times finer and returned as
/// cell averages on the phase grid.
pub fn run_classical(exp: &Experiment) -> Result<Vec<(PhaseField, FpDiagnostics)>> {
    one_dim(exp)?;
    let phase = exp.phase_grid.unwrap();
    let refine = exp.config.grid.refine;
    let fine = phase.refined(refine);
    let f0 = initial_mixture(exp)?.to_phase_field(fine)?;
    let solver = FpSolver::new(&exp.model, &exp.diffusion, fine, exp.fp_dt, exp.config.numerics.fp_scheme)?;
    solver
        .run(&f0, &exp.times)?
        .into_iter()
        .map(|(f, d)| Ok((f.coarse_grain(refine)?, d)))
        .collect()
}

pub fn initial_mixture(exp: &Experiment) -> Result<MixtureEnsemble> {
    MixtureEnsemble::new(vec![Particle::point(1.0, exp.initial.clone())], exp.scales.clone(), exp.config.numerics.seed)
}

/// The mixture at each snapshot time.
pub fn run_mixture(exp: &Experiment) -> Result<Vec<MixtureEnsemble>> {
    let mut ens = initial_mixture(exp)?;
    let mut out = Vec::with_capacity(exp.times.len());
    for &t in &exp.times {
        ens.advance(&exp.model, t - ens.time, exp.dt, &exp.mixture)?;
        out.push(ens.clone());
    }
    Ok(out)
}

/// Langevin samples drawn from the initial Gaussian and evolved to each
/// snapshot time.
pub fn run_langevin(exp: &Experiment) -> Result<Vec<LangevinEnsemble>> {
    let seed = exp.config.numerics.seed;
    let mut ens =
        LangevinEnsemble::gaussian(&exp.initial.mean, &exp.initial.cov, exp.config.numerics.langevin_samples, seed)?;
    let mut out = Vec::with_capacity(exp.times.len());
    for &t in &exp.times {
        ens = evolve_langevin_ensemble(&ens, &exp.model, &exp.diffusion, t - ens.time, exp.langevin_dt, seed)?;
        out.push(ens.clone());
    }
    Ok(out)
}

/// Runs all three dynamics from the same initial Gaussian and measures the
/// mixture against both references.
pub fn run_comparison(exp: &Experiment) -> Result<ComparisonReport> {
    one_dim(exp)?;
    let qgrid = exp.position_grid.unwrap();
    let phase = exp.phase_grid.unwrap();
    let refine = exp.config.grid.refine;
    let ((quantum, classical), mixture) =
        rayon::join(|| rayon::join(|| run_quantum(exp), || run_classical(exp)), || run_mixture(exp));
    let (quantum, classical, mixture) = (quantum?, classical?, mixture?);

    let n = &exp.config.numerics;
    let mut rows = Vec::with_capacity(exp.times.len());
    for (k, &t) in exp.times.iter().enumerate() {
        let ens = &mixture[k];
        let td = trace_distance(&ens.to_density_grid(&qgrid)?, &quantum[k].0)?;
        let l1 = l1_distance(&ens.to_phase_cells(phase, refine)?, &classical[k].0)?;
        let eps = theorem_epsilon(&exp.scales, t, 1)?;
        let allowed = eps * (1.0 + n.margin) + n.abs_tolerance;
        rows.push(ComparisonRow {
            time: t,
            t_over_tau: t / exp.scales.tau_h,
            epsilon: eps,
            trace_distance: td,
            l1_distance: l1,
            pass: td <= allowed && l1 <= allowed,
            particles: ens.len(),
            max_squeeze: ens.max_squeeze(),
        });
    }
    let last = mixture.last().map(|m| m.stats.clone()).unwrap_or_default();
    Ok(ComparisonReport {
        seed: n.seed,
        margin: n.margin,
        abs_tolerance: n.abs_tolerance,
        bound_applicable: exp.scales.bound_applicable(),
        hbar: exp.scales.hbar,
        hbar_ratio: exp.scales.hbar_ratio(),
        d0: exp.scales.d0,
        z: exp.scales.z_in_force()?,
        tau_h: exp.scales.tau_h,
        rows,
        mixture_stats: last,
        quantum: quantum.into_iter().map(|(_, d)| d).collect(),
        classical: classical.into_iter().map(|(_, d)| d).collect(),
    })
}

/// Wigner negativity at one snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NegativityRow {
    pub time: f64,
    pub t_over_tau: f64,
    pub min_wigner: f64,
    pub max_wigner: f64,
    /// `-min / max`.
    pub negativity: f64,
    /// Integral of the negative part of `W`.
    pub negative_volume: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BreakdownRun {
    pub d0: f64,
    pub rows: Vec<NegativityRow>,
}

impl BreakdownRun {
    pub fn max_negativity(&self) -> f64 {
        self.rows.iter().map(|r| r.negativity).fold(f64::NEG_INFINITY, f64::max)
    }

    /// First snapshot with negativity above `threshold`.
    pub fn onset(&self, threshold: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.negativity > threshold).map(|r| r.time)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BreakdownReport {
    pub hbar: f64,
    pub tau_h: f64,
    /// Instability rate at the barrier top, `sqrt(|V''|/m)`.
    pub lyapunov: f64,
    pub ehrenfest_time: f64,
    pub closed: BreakdownRun,
    pub diffusive: BreakdownRun,
    /// `(hbar / s_H, negativity onset)` at zero diffusion.
    pub onset_sweep: Vec<(f64, Option<f64>)>,
}

/// Negativity threshold, as a fraction of the Wigner peak.
pub const NEGATIVITY_ONSET: f64 = 0.1;

fn negativity_series(exp: &Experiment, diffusion: &DiffusionSpec, initial: &GaussianState) -> Result<Vec<NegativityRow>> {
    let grid = exp.position_grid.unwrap();
    let rho0 = gaussian_to_grid(initial, &grid, exp.model.mass)?;
    let mut solver = LindbladSolver::new(&exp.model, diffusion, &grid, exp.dt, exp.config.numerics.lindblad_method)?;
    solver.check_positivity = false;
    // Aliasing at this level does not move the negativity measure.
    solver.edge_tolerance = 1e-3;
    let snaps = solver.run(&rho0, &exp.times)?;
    snaps
        .iter()
        .map(|(rho, _)| {
            // On the original grid the transform only reaches half the
            // momentum range.
            let w = wigner_transform_grid(&refine_density(rho, 2)?);
            let (lo, hi) = (w.min(), w.max());
            let neg = w.values.iter().filter(|v| **v < 0.0).sum::<f64>() * w.grid.cell_area();
            Ok(NegativityRow {
                time: rho.time,
                t_over_tau: rho.time / exp.scales.tau_h,
                min_wigner: lo,
                max_wigner: hi,
                negativity: -lo / hi,
                negative_volume: -neg,
            })
        })
        .collect()
}

/// Closed (`D = 0`) versus diffusive evolution of the same Gaussian, tracking
/// Wigner negativity; also the onset time across `demo.hbar_ratios`.
pub fn run_breakdown_demo(exp: &Experiment) -> Result<BreakdownReport> {
    one_dim(exp)?;
    let hbar = exp.scales.hbar;
    let s_h = match exp.scales.s_h {
        Bound::Finite(s) => s,
        Bound::Infinite => exp.scales.a_h * (exp.model.hi[0] - exp.model.lo[0]).powi(2),
    };
    let lyapunov = barrier_rate(&exp.model);
    let t_e = if lyapunov > 0.0 { ehrenfest_time(lyapunov, s_h, hbar).unwrap_or(f64::NAN) } else { f64::INFINITY };
    let closed_spec = DiffusionSpec::new(hbar, 0.0, 0.0);
    let diffusive_spec = match exp.scales.s_h {
        Bound::Finite(_) => DiffusionSpec::from_d0(&exp.model, hbar, exp.config.demo.diffusive_d0)?,
        Bound::Infinite => DiffusionSpec::new(hbar, exp.config.demo.diffusive_d0, exp.config.demo.diffusive_d0),
    };
    let (closed, diffusive) = rayon::join(
        || negativity_series(exp, &closed_spec, &exp.initial),
        || negativity_series(exp, &diffusive_spec, &exp.initial),
    );
    let mut onset_sweep = Vec::new();
    for &r in &exp.config.demo.hbar_ratios {
        let h = r * s_h;
        let spec = DiffusionSpec::new(h, 0.0, 0.0);
        let initial = rescaled_initial(exp, h)?;
        let rows = negativity_series(exp, &spec, &initial)?;
        let run = BreakdownRun { d0: 0.0, rows };
        onset_sweep.push((r, run.onset(NEGATIVITY_ONSET)));
    }
    Ok(BreakdownReport {
        hbar,
        tau_h: exp.scales.tau_h,
        lyapunov,
        ehrenfest_time: t_e,
        closed: BreakdownRun { d0: 0.0, rows: closed? },
        diffusive: BreakdownRun { d0: diffusive_spec_d0(exp, &diffusive_spec), rows: diffusive? },
        onset_sweep,
    })
}

fn diffusive_spec_d0(exp: &Experiment, spec: &DiffusionSpec) -> f64 {
    exp.model.scales(spec).map(|s| s.d0).unwrap_or(f64::NAN)
}

/// The initial Gaussian with its covariance rescaled to a new `hbar`.
fn rescaled_initial(exp: &Experiment, hbar: f64) -> Result<GaussianState> {
    let k = hbar / exp.scales.hbar;
    GaussianState::new(exp.initial.mean.clone(), &exp.initial.cov * k, hbar)
}

/// `sqrt(max(-V'')/m)` over the domain; zero for convex potentials.
fn barrier_rate(model: &HamiltonianModel) -> f64 {
    let (lo, hi) = (model.lo[0], model.hi[0]);
    let n = 512;
    let worst = (0..=n)
        .map(|i| model.potential.hessian(&[lo + (hi - lo) * i as f64 / n as f64])[(0, 0)])
        .fold(f64::INFINITY, f64::min);
    if worst < 0.0 {
        (-worst / model.mass).sqrt()
    } else {
        0.0
    }
}

/// Bound and numerical values of the harmonic-approximation error at random
/// centroids and random pure covariances inside the squeeze window.
pub fn harmonic_error_sweep(exp: &Experiment, count: usize, n: usize) -> Result<Vec<HarmonicErrorReport>> {
    one_dim(exp)?;
    let z = exp.scales.z_in_force()?;
    let mut rng = ChaCha8Rng::seed_from_u64(exp.config.numerics.seed);
    let (lo, hi) = (exp.model.lo[0], exp.model.hi[0]);
    let p_scale = exp.scales.sigma_star[(1, 1)].sqrt() * 10.0;
    (0..count)
        .map(|_| {
            let sigma = random_pure_nts(&exp.scales.sigma_star, z, &mut rng);
            let sx = sigma[(0, 0)].sqrt();
            let margin = (8.0 * sx).min(0.25 * (hi - lo));
            let alpha =
                DVector::from_vec(vec![rng.random_range(lo + margin..hi - margin), rng.random_range(-p_scale..p_scale)]);
            harmonic_error_report(&alpha, &sigma, &exp.model, exp.scales.hbar, n)
        })
        .collect()
}

/// Order-of-magnitude correspondence times for a macroscopic grain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhysicalExample {
    pub mass_kg: f64,
    pub velocity_m_s: f64,
    pub length_m: f64,
    pub localization_rate: f64,
    pub time_s: f64,
    pub time_years: f64,
    /// `ln(s/hbar)/lambda` for `lambda = 1 / s`, `s = 1 kg m^2 / s`.
    pub ehrenfest_s: f64,
    /// `sqrt(s/hbar)/lambda` for the same inputs.
    pub correspondence_s: f64,
}

pub const SECONDS_PER_YEAR: f64 = 365.25 * 86_400.0;

/// A 10 micron dust grain (1e-11 kg) in sunlight, `Lambda ~ 1e25 m^-2 s^-1`,
/// moving at 1 m/s in a potential varying over 1 m.
pub fn physical_example() -> Result<PhysicalExample> {
    physical_example_with(1e-11, 1.0, 1.0, 1e25)
}

pub fn physical_example_with(mass: f64, velocity: f64, length: f64, rate: f64) -> Result<PhysicalExample> {
    let t = physical_example_time(mass, velocity, length, rate, HBAR_SI)?;
    Ok(PhysicalExample {
        mass_kg: mass,
        velocity_m_s: velocity,
        length_m: length,
        localization_rate: rate,
        time_s: t,
        time_years: t / SECONDS_PER_YEAR,
        ehrenfest_s: ehrenfest_time(1.0, 1.0, HBAR_SI)?,
        correspondence_s: correspondence_time(1.0, 1.0, HBAR_SI)?,
    })
}

/// Gaussian covariance in a form convenient for reports.
pub fn covariance_entries(cov: &DMatrix<f64>) -> Vec<f64> {
    let n = cov.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push(cov[(i, j)]);
        }
    }
    out
}

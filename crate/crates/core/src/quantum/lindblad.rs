use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scales::{DiffusionSpec, HamiltonianModel};

use super::grid::{DensityMatrixGrid, PositionGrid, Spectral};

/// Time integrator for the grid Lindblad equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LindbladMethod {
    /// Strang splitting into the position part (potential commutator plus
    /// position-coupling dissipator) and the momentum part (kinetic
    /// commutator plus momentum-coupling dissipator); each part is applied
    /// exactly as an entrywise factor in its own representation.
    #[default]
    Split,
    /// Classical explicit Runge-Kutta 4 on the full generator.
    Rk4,
}

/// Grid-level data shared by every evaluation of the generator.
#[derive(Clone, Debug)]
pub struct LindbladOperator {
    pub grid: PositionGrid,
    pub hbar: f64,
    pub mass: f64,
    pub diffusion: DiffusionSpec,
    spectral: Spectral,
    /// Generator entries in position representation.
    pos_gen: DMatrix<Complex64>,
    /// Generator entries in momentum representation (FFT order).
    mom_gen: DMatrix<Complex64>,
}

impl LindbladOperator {
    pub fn new(model: &HamiltonianModel, diffusion: &DiffusionSpec, grid: &PositionGrid) -> Result<Self> {
        if model.dims() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: model.dims() });
        }
        diffusion.validate()?;
        let hbar = diffusion.hbar;
        let n = grid.n;
        let x = grid.nodes();
        let v: Vec<f64> = x.iter().map(|&xi| model.potential.value(&[xi])).collect();
        let p = grid.momenta(hbar);
        let ih = Complex64::new(0.0, -1.0 / hbar);
        let kx = diffusion.d_p / (2.0 * hbar * hbar);
        let kp = diffusion.d_x / (2.0 * hbar * hbar);
        let m = model.mass;
        let pos_gen = DMatrix::from_fn(n, n, |j, k| ih * (v[j] - v[k]) - kx * (x[j] - x[k]).powi(2));
        let mom_gen = DMatrix::from_fn(n, n, |j, k| {
            ih * ((p[j] * p[j] - p[k] * p[k]) / (2.0 * m)) - kp * (p[j] - p[k]).powi(2)
        });
        Ok(Self { grid: *grid, hbar, mass: m, diffusion: *diffusion, spectral: Spectral::new(n), pos_gen, mom_gen })
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// `L[rho]` on the weighted grid matrix.
    pub fn apply(&self, rho: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        if rho.shape() != (self.grid.n, self.grid.n) {
            return Err(Error::DimensionMismatch { expected: self.grid.n, got: rho.nrows() });
        }
        let mut mom = rho.clone();
        self.spectral.to_momentum(&mut mom);
        mom.component_mul_assign(&self.mom_gen);
        self.spectral.to_position(&mut mom);
        Ok(rho.component_mul(&self.pos_gen) + mom)
    }

    /// Upper bound on the generator's spectral radius.
    pub fn spectral_radius(&self) -> f64 {
        let max_abs = |m: &DMatrix<Complex64>| m.iter().fold(0.0_f64, |a, v| a.max(v.norm()));
        max_abs(&self.pos_gen) + max_abs(&self.mom_gen)
    }

    /// Largest stable Runge-Kutta 4 step, with a safety factor.
    pub fn max_rk4_dt(&self) -> f64 {
        2.5 / self.spectral_radius()
    }

    fn factors(&self, dt: f64) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
        (self.pos_gen.map(|g| (g * (0.5 * dt)).exp()), self.mom_gen.map(|g| (g * dt).exp()))
    }
}

/// Fixed-step propagator with snapshot bookkeeping.
#[derive(Clone, Debug)]
pub struct LindbladSolver {
    pub op: LindbladOperator,
    pub method: LindbladMethod,
    pub dt: f64,
    /// Abort when the probability in the outer 1/32 of the position or
    /// momentum range exceeds this.
    pub edge_tolerance: f64,
    /// Check the minimum eigenvalue at each snapshot.
    pub check_positivity: bool,
}

/// Monitored quantities at one snapshot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantumDiagnostics {
    pub time: f64,
    pub step: usize,
    pub trace_error: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: Option<f64>,
    pub edge_probability: f64,
}

impl LindbladSolver {
    pub fn new(
        model: &HamiltonianModel,
        diffusion: &DiffusionSpec,
        grid: &PositionGrid,
        dt: f64,
        method: LindbladMethod,
    ) -> Result<Self> {
        let op = LindbladOperator::new(model, diffusion, grid)?;
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        if method == LindbladMethod::Rk4 && dt > op.max_rk4_dt() {
            return Err(Error::TimeStep { dt, max_dt: op.max_rk4_dt() });
        }
        Ok(Self { op, method, dt, edge_tolerance: 1e-6, check_positivity: true })
    }

    fn rk4_step(&self, rho: &mut DMatrix<Complex64>, dt: f64) -> Result<()> {
        let k1 = self.op.apply(rho)?;
        let k2 = self.op.apply(&(&*rho + &k1 * Complex64::from(0.5 * dt)))?;
        let k3 = self.op.apply(&(&*rho + &k2 * Complex64::from(0.5 * dt)))?;
        let k4 = self.op.apply(&(&*rho + &k3 * Complex64::from(dt)))?;
        *rho += (k1 + (k2 + k3) * Complex64::from(2.0) + k4) * Complex64::from(dt / 6.0);
        Ok(())
    }

    /// Evolves `rho0` and returns a snapshot at each of `times` (ascending,
    /// measured from `rho0.time`). Steps are shortened slightly so that every
    /// snapshot time is hit exactly.
    pub fn run(&self, rho0: &DensityMatrixGrid, times: &[f64]) -> Result<Vec<(DensityMatrixGrid, QuantumDiagnostics)>> {
        if rho0.grid != self.op.grid {
            return Err(Error::GridMismatch);
        }
        let mut rho = rho0.rho.clone();
        let mut t = rho0.time;
        let mut step = 0usize;
        let mut out = Vec::with_capacity(times.len());
        let mut cache: Option<(f64, DMatrix<Complex64>, DMatrix<Complex64>)> = None;
        for &target in times {
            if target < t - 1e-12 {
                return Err(Error::InvalidArgument("snapshot times must be ascending".into()));
            }
            let span = target - t;
            let steps = (span / self.dt - 1e-9).ceil().max(0.0) as usize;
            if steps > 0 {
                let h = span / steps as f64;
                match self.method {
                    LindbladMethod::Rk4 => {
                        for _ in 0..steps {
                            self.rk4_step(&mut rho, h)?;
                            step += 1;
                        }
                    }
                    LindbladMethod::Split => {
                        if cache.as_ref().map_or(true, |c| (c.0 - h).abs() > 1e-15 * h) {
                            let (a, b) = self.op.factors(h);
                            cache = Some((h, a, b));
                        }
                        let (_, half, full) = cache.as_ref().unwrap();
                        for _ in 0..steps {
                            rho.component_mul_assign(half);
                            self.op.spectral.to_momentum(&mut rho);
                            rho.component_mul_assign(full);
                            self.op.spectral.to_position(&mut rho);
                            rho.component_mul_assign(half);
                            step += 1;
                        }
                    }
                }
            }
            t = target;
            let snap = DensityMatrixGrid { grid: self.op.grid, rho: rho.clone(), hbar: self.op.hbar, mass: self.op.mass, time: t };
            let diag = self.check(&snap, step)?;
            out.push((snap, diag));
        }
        Ok(out)
    }

    fn check(&self, snap: &DensityMatrixGrid, step: usize) -> Result<QuantumDiagnostics> {
        let fail = |what: String| Err(Error::Invariant { step, what });
        let tr = snap.trace();
        let trace_error = (tr - Complex64::from(1.0)).norm();
        if trace_error > 1e-8 {
            return fail(format!("trace drifted to {tr}"));
        }
        let hermiticity = snap.hermiticity_defect();
        if hermiticity > 1e-10 {
            return fail(format!("hermiticity defect {hermiticity:.3e}"));
        }
        let min_eigenvalue = if self.check_positivity {
            let m = snap.eigenvalues()[0];
            if m < -1e-6 {
                return fail(format!("minimum eigenvalue {m:.3e}"));
            }
            Some(m)
        } else {
            None
        };
        let edge_probability = snap.edge_probability(&self.op.spectral, 1.0 / 32.0);
        if edge_probability > self.edge_tolerance {
            return fail(format!("probability {edge_probability:.3e} reached the grid edges"));
        }
        Ok(QuantumDiagnostics { time: snap.time, step, trace_error, hermiticity, min_eigenvalue, edge_probability })
    }
}

/// Evolves to `t_final`, returning `snapshots` equally spaced states after
/// the initial one.
pub fn evolve_lindblad(
    rho0: &DensityMatrixGrid,
    model: &HamiltonianModel,
    diffusion: &DiffusionSpec,
    t_final: f64,
    dt: f64,
    snapshots: usize,
    method: LindbladMethod,
) -> Result<Vec<DensityMatrixGrid>> {
    let solver = LindbladSolver::new(model, diffusion, &rho0.grid, dt, method)?;
    let times: Vec<f64> =
        (1..=snapshots.max(1)).map(|k| rho0.time + t_final * k as f64 / snapshots.max(1) as f64).collect();
    Ok(solver.run(rho0, &times)?.into_iter().map(|(s, _)| s).collect())
}

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scales::{DiffusionSpec, HamiltonianModel};

use super::phase::{PhaseField, PhaseGrid};

/// Spatial discretization of the frictionless Fokker-Planck equation
/// `df/dt = -(p/m) df/dx + V'(x) df/dp + (D_x/2) d2f/dx2 + (D_p/2) d2f/dp2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FpScheme {
    /// Periodic Fourier transport. Each directional substep is a pure shift
    /// plus heat kernel and is applied exactly; only the splitting error
    /// remains.
    #[default]
    Spectral,
    /// Flux-limited Lax-Wendroff advection with centered explicit diffusion
    /// and outflow boundaries.
    FiniteVolume,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FpDiagnostics {
    pub time: f64,
    pub step: usize,
    pub mass: f64,
    pub min_value: f64,
    /// Mass lost through the boundary (finite volume) or present in the outer
    /// 1/32 of the box (spectral, where it would wrap around).
    pub leaked: f64,
}

#[derive(Clone)]
pub struct FpSolver {
    pub grid: PhaseGrid,
    pub mass: f64,
    pub diffusion: DiffusionSpec,
    pub scheme: FpScheme,
    pub dt: f64,
    pub leak_tolerance: f64,
    force: Vec<f64>,
    momenta: Vec<f64>,
    fft_x: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
    fft_p: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
}

impl std::fmt::Debug for FpSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FpSolver").field("grid", &self.grid).field("scheme", &self.scheme).field("dt", &self.dt).finish()
    }
}

fn wavenumbers(n: usize, h: f64) -> Vec<f64> {
    let n_i = n as i64;
    (0..n_i).map(|k| 2.0 * PI * if k <= n_i / 2 { k } else { k - n_i } as f64 / (n as f64 * h)).collect()
}

/// Monotonized-central limited slope.
fn mc(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else {
        a.signum() * (2.0 * a.abs()).min(2.0 * b.abs()).min(0.5 * (a + b).abs())
    }
}

/// One Lax-Wendroff/MC step at constant velocity `v` on a line with zero
/// inflow.
fn fv_advect(line: &mut [f64], v: f64, tau: f64, h: f64, flux: &mut Vec<f64>) {
    let n = line.len();
    let c = v * tau / h;
    let get = |i: i64| if i < 0 || i >= n as i64 { 0.0 } else { line[i as usize] };
    flux.clear();
    // flux[i] sits on the face between cells i-1 and i.
    for face in 0..=n as i64 {
        let f = if v >= 0.0 {
            let i = face - 1;
            let s = mc(get(i) - get(i - 1), get(i + 1) - get(i));
            v * (get(i) + 0.5 * (1.0 - c) * s)
        } else {
            let i = face;
            let s = mc(get(i) - get(i - 1), get(i + 1) - get(i));
            v * (get(i) - 0.5 * (1.0 + c) * s)
        };
        flux.push(f);
    }
    for i in 0..n {
        line[i] -= tau / h * (flux[i + 1] - flux[i]);
    }
}

fn fv_diffuse(line: &mut [f64], kappa: f64, scratch: &mut Vec<f64>) {
    if kappa == 0.0 {
        return;
    }
    scratch.clear();
    scratch.extend_from_slice(line);
    let n = line.len();
    for i in 0..n {
        let l = if i > 0 { scratch[i - 1] } else { 0.0 };
        let r = if i + 1 < n { scratch[i + 1] } else { 0.0 };
        line[i] += kappa * (l - 2.0 * scratch[i] + r);
    }
}

impl FpSolver {
    pub fn new(
        model: &HamiltonianModel,
        diffusion: &DiffusionSpec,
        grid: PhaseGrid,
        dt: f64,
        scheme: FpScheme,
    ) -> Result<Self> {
        if model.dims() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: model.dims() });
        }
        diffusion.validate()?;
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let force = (0..grid.nx).map(|i| -model.potential.gradient(&[grid.x(i)])[0]).collect();
        let momenta = (0..grid.np).map(|k| grid.p(k)).collect();
        let mut planner = FftPlanner::new();
        let fft_x = (planner.plan_fft_forward(grid.nx), planner.plan_fft_inverse(grid.nx));
        let fft_p = (planner.plan_fft_forward(grid.np), planner.plan_fft_inverse(grid.np));
        let s = Self {
            grid,
            mass: model.mass,
            diffusion: *diffusion,
            scheme,
            dt,
            leak_tolerance: 1e-4,
            force,
            momenta,
            fft_x,
            fft_p,
        };
        if scheme == FpScheme::FiniteVolume && dt > s.max_dt() {
            return Err(Error::TimeStep { dt, max_dt: s.max_dt() });
        }
        Ok(s)
    }

    /// Largest stable step of the finite-volume scheme.
    pub fn max_dt(&self) -> f64 {
        let g = &self.grid;
        let vmax = self.momenta.iter().fold(0.0f64, |a, p| a.max(p.abs())) / self.mass;
        let fmax = self.force.iter().fold(0.0f64, |a, f| a.max(f.abs()));
        let mut lim = f64::INFINITY;
        // The x substeps are half steps.
        if vmax > 0.0 {
            lim = lim.min(2.0 * g.dx() / vmax);
        }
        if fmax > 0.0 {
            lim = lim.min(g.dp() / fmax);
        }
        if self.diffusion.d_x > 0.0 {
            lim = lim.min(2.0 * g.dx() * g.dx() / self.diffusion.d_x);
        }
        if self.diffusion.d_p > 0.0 {
            lim = lim.min(g.dp() * g.dp() / self.diffusion.d_p);
        }
        lim
    }

    fn x_step(&self, f: &mut [f64], tau: f64) {
        let (nx, np) = (self.grid.nx, self.grid.np);
        let h = self.grid.dx();
        let mut line = vec![0.0; nx];
        match self.scheme {
            FpScheme::Spectral => {
                let kx = wavenumbers(nx, h);
                let mut buf = vec![Complex64::new(0.0, 0.0); nx];
                for k in 0..np {
                    let v = self.momenta[k] / self.mass;
                    for i in 0..nx {
                        buf[i] = Complex64::new(f[i * np + k], 0.0);
                    }
                    self.fft_x.0.process(&mut buf);
                    for (b, &q) in buf.iter_mut().zip(&kx) {
                        let decay = (-0.5 * self.diffusion.d_x * q * q * tau).exp();
                        *b *= Complex64::from_polar(decay / nx as f64, -q * v * tau);
                    }
                    self.fft_x.1.process(&mut buf);
                    for i in 0..nx {
                        f[i * np + k] = buf[i].re;
                    }
                }
            }
            FpScheme::FiniteVolume => {
                let (mut flux, mut scratch) = (Vec::new(), Vec::new());
                let kappa = 0.5 * self.diffusion.d_x * tau / (h * h);
                for k in 0..np {
                    for i in 0..nx {
                        line[i] = f[i * np + k];
                    }
                    fv_advect(&mut line, self.momenta[k] / self.mass, tau, h, &mut flux);
                    fv_diffuse(&mut line, kappa, &mut scratch);
                    for i in 0..nx {
                        f[i * np + k] = line[i];
                    }
                }
            }
        }
    }

    fn p_step(&self, f: &mut [f64], tau: f64) {
        let np = self.grid.np;
        let h = self.grid.dp();
        match self.scheme {
            FpScheme::Spectral => {
                let kp = wavenumbers(np, h);
                let mut buf = vec![Complex64::new(0.0, 0.0); np];
                for (row, &force) in f.chunks_mut(np).zip(&self.force) {
                    for (b, &v) in buf.iter_mut().zip(row.iter()) {
                        *b = Complex64::new(v, 0.0);
                    }
                    self.fft_p.0.process(&mut buf);
                    for (b, &q) in buf.iter_mut().zip(&kp) {
                        let decay = (-0.5 * self.diffusion.d_p * q * q * tau).exp();
                        *b *= Complex64::from_polar(decay / np as f64, -q * force * tau);
                    }
                    self.fft_p.1.process(&mut buf);
                    for (v, b) in row.iter_mut().zip(&buf) {
                        *v = b.re;
                    }
                }
            }
            FpScheme::FiniteVolume => {
                let (mut flux, mut scratch) = (Vec::new(), Vec::new());
                let kappa = 0.5 * self.diffusion.d_p * tau / (h * h);
                for (row, &force) in f.chunks_mut(np).zip(&self.force) {
                    fv_advect(row, force, tau, h, &mut flux);
                    fv_diffuse(row, kappa, &mut scratch);
                }
            }
        }
    }

    /// Evolves `f0` and returns a snapshot at each of `times` (ascending,
    /// absolute). Steps are shortened so every snapshot is hit exactly.
    pub fn run(&self, f0: &PhaseField, times: &[f64]) -> Result<Vec<(PhaseField, FpDiagnostics)>> {
        if f0.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        let mass0 = f0.mass();
        let mut f = f0.values.clone();
        let mut t = f0.time;
        let mut step = 0usize;
        let mut out = Vec::with_capacity(times.len());
        for &target in times {
            if target < t - 1e-12 {
                return Err(Error::InvalidArgument("snapshot times must be ascending".into()));
            }
            let span = target - t;
            let steps = (span / self.dt - 1e-9).ceil().max(0.0) as usize;
            let h = if steps > 0 { span / steps as f64 } else { 0.0 };
            for _ in 0..steps {
                self.x_step(&mut f, 0.5 * h);
                self.p_step(&mut f, h);
                self.x_step(&mut f, 0.5 * h);
                step += 1;
                if self.scheme == FpScheme::FiniteVolume {
                    let m = f.iter().sum::<f64>() * self.grid.cell_area();
                    if mass0 - m > self.leak_tolerance {
                        return Err(Error::MassLeak(mass0 - m));
                    }
                }
            }
            t = target;
            let field = PhaseField { grid: self.grid, values: f.clone(), time: t };
            let mass = field.mass();
            let leaked = match self.scheme {
                FpScheme::FiniteVolume => mass0 - mass,
                FpScheme::Spectral => {
                    if (mass - mass0).abs() > 1e-6 {
                        return Err(Error::Invariant { step, what: format!("mass drifted to {mass}") });
                    }
                    field.edge_mass(1.0 / 32.0)
                }
            };
            if leaked > self.leak_tolerance {
                return Err(Error::MassLeak(leaked));
            }
            let diag = FpDiagnostics { time: t, step, mass, min_value: field.min(), leaked };
            out.push((field, diag));
        }
        Ok(out)
    }
}

/// Evolves to `t_final`, returning `snapshots` equally spaced fields after
/// the initial one.
pub fn evolve_fokker_planck(
    f0: &PhaseField,
    model: &HamiltonianModel,
    diffusion: &DiffusionSpec,
    t_final: f64,
    dt: f64,
    snapshots: usize,
    scheme: FpScheme,
) -> Result<Vec<PhaseField>> {
    let solver = FpSolver::new(model, diffusion, f0.grid, dt, scheme)?;
    let n = snapshots.max(1);
    let times: Vec<f64> = (1..=n).map(|k| f0.time + t_final * k as f64 / n as f64).collect();
    Ok(solver.run(f0, &times)?.into_iter().map(|(f, _)| f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::phase::l1_distance;
    use crate::potentials::Profile;
    use approx::assert_relative_eq;

    fn gauss(mx: f64, mp: f64, sx: f64, sp: f64) -> impl Fn(f64, f64) -> f64 {
        move |x, p| (-(x - mx).powi(2) / (2.0 * sx * sx) - (p - mp).powi(2) / (2.0 * sp * sp)).exp() / (2.0 * PI * sx * sp)
    }

    fn harmonic(half: f64) -> HamiltonianModel {
        HamiltonianModel::builtin(Profile::harmonic(1.0, 1.0), 1, 1.0, &[-half], &[half]).unwrap()
    }

    fn flat(mass: f64) -> HamiltonianModel {
        HamiltonianModel::builtin(Profile::Harmonic { stiffness: 1e-14 }, 1, mass, &[-10.0], &[10.0]).unwrap()
    }

    #[test]
    fn rigid_rotation_one_period() {
        let model = harmonic(8.0);
        let g = PhaseGrid::new(256, 256, (-8.0, 8.0), (-8.0, 8.0)).unwrap();
        let f0 = PhaseField::from_fn(g, gauss(2.0, 0.0, 1.0, 0.7));
        for (scheme, dt) in [(FpScheme::Spectral, 0.02), (FpScheme::FiniteVolume, 0.005)] {
            let out = evolve_fokker_planck(&f0, &model, &DiffusionSpec::new(1.0, 0.0, 0.0), 2.0 * PI, dt, 4, scheme).unwrap();
            // Quarter period: (x, p) -> (p, -x).
            let quarter = PhaseField::from_fn(g, gauss(0.0, -2.0, 0.7, 1.0));
            let d_q = l1_distance(&PhaseField { time: 0.0, ..out[0].clone() }, &quarter).unwrap();
            let d = l1_distance(&PhaseField { time: 0.0, ..out[3].clone() }, &f0).unwrap();
            assert!(d < 0.01 && d_q < 0.01, "{scheme:?}: {d} {d_q}");
            assert_relative_eq!(out[3].mass(), 1.0, epsilon = 1e-6);
            assert!(out[3].min() > -1e-9 || scheme == FpScheme::Spectral);
        }
    }

    #[test]
    fn matched_gaussian_is_stationary() {
        let model = harmonic(8.0);
        let g = PhaseGrid::new(128, 128, (-6.0, 6.0), (-6.0, 6.0)).unwrap();
        let f0 = PhaseField::from_fn(g, gauss(0.0, 0.0, 1.0, 1.0));
        let out = evolve_fokker_planck(&f0, &model, &DiffusionSpec::new(1.0, 0.0, 0.0), 2.0 * PI, 0.01, 1, FpScheme::FiniteVolume).unwrap();
        let d = l1_distance(&PhaseField { time: 0.0, ..out[0].clone() }, &f0).unwrap();
        assert!(d < 0.01, "{d}");
    }

    #[test]
    fn free_streaming_shear() {
        let model = flat(1.0);
        let g = PhaseGrid::new(256, 128, (-10.0, 10.0), (-5.0, 5.0)).unwrap();
        let f0 = PhaseField::from_fn(g, gauss(-1.0, 0.0, 0.8, 1.0));
        let t = 2.0;
        let exact = PhaseField::from_fn(g, |x, p| gauss(-1.0, 0.0, 0.8, 1.0)(x - p * t, p));
        for scheme in [FpScheme::Spectral, FpScheme::FiniteVolume] {
            let out = evolve_fokker_planck(&f0, &model, &DiffusionSpec::new(1.0, 0.0, 0.0), t, 0.02, 1, scheme).unwrap();
            let d = l1_distance(&PhaseField { time: 0.0, ..out[0].clone() }, &exact).unwrap();
            assert!(d < 0.01, "{scheme:?}: {d}");
        }
    }

    #[test]
    fn pure_diffusion_variance_rate() {
        let model = flat(1e12);
        let g = PhaseGrid::new(128, 128, (-8.0, 8.0), (-8.0, 8.0)).unwrap();
        let f0 = PhaseField::from_fn(g, gauss(0.0, 0.0, 0.7, 0.5));
        let (dx, dp, t) = (0.4, 0.9, 2.0);
        for scheme in [FpScheme::Spectral, FpScheme::FiniteVolume] {
            let out = evolve_fokker_planck(&f0, &model, &DiffusionSpec::new(1.0, dx, dp), t, 0.01, 1, scheme).unwrap();
            let vx = out[0].integrate_with(|x, _| x * x) - f0.integrate_with(|x, _| x * x);
            let vp = out[0].integrate_with(|_, p| p * p) - f0.integrate_with(|_, p| p * p);
            assert_relative_eq!(vx, dx * t, max_relative = 0.01);
            assert_relative_eq!(vp, dp * t, max_relative = 0.01);
        }
    }

    #[test]
    fn harmonic_moments_follow_covariance_ode() {
        // For V = x^2/2, m = 1: d<x2> = 2<xp> + Dx, d<xp> = <p2> - <x2>, d<p2> = -2<xp> + Dp.
        let model = harmonic(8.0);
        let g = PhaseGrid::new(128, 128, (-7.0, 7.0), (-7.0, 7.0)).unwrap();
        let f0 = PhaseField::from_fn(g, gauss(0.5, 0.0, 0.6, 0.9));
        let (dx, dp, t) = (0.1, 0.3, 1.5);
        let out = evolve_fokker_planck(&f0, &model, &DiffusionSpec::new(1.0, dx, dp), t, 0.005, 1, FpScheme::Spectral).unwrap();
        let mut s = [0.36, 0.0, 0.81];
        let n = 3000;
        let h = t / n as f64;
        let rhs = |s: [f64; 3]| [2.0 * s[1] + dx, s[2] - s[0], -2.0 * s[1] + dp];
        for _ in 0..n {
            let k1 = rhs(s);
            let k2 = rhs([s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1], s[2] + 0.5 * h * k1[2]]);
            let k3 = rhs([s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1], s[2] + 0.5 * h * k2[2]]);
            let k4 = rhs([s[0] + h * k3[0], s[1] + h * k3[1], s[2] + h * k3[2]]);
            for j in 0..3 {
                s[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        let f = &out[0];
        let mx = f.integrate_with(|x, _| x);
        let mp = f.integrate_with(|_, p| p);
        let cxx = f.integrate_with(|x, _| x * x) - mx * mx;
        let cxp = f.integrate_with(|x, p| x * p) - mx * mp;
        let cpp = f.integrate_with(|_, p| p * p) - mp * mp;
        assert_relative_eq!(mx, 0.5 * t.cos(), epsilon = 1e-4);
        assert_relative_eq!(cxx, s[0], max_relative = 0.01);
        assert_relative_eq!(cpp, s[2], max_relative = 0.01);
        assert!((cxp - s[1]).abs() < 0.01 * s[0].max(s[2]));
    }

    #[test]
    fn cfl_violation_is_rejected_with_suggestion() {
        let model = harmonic(8.0);
        let g = PhaseGrid::new(64, 64, (-8.0, 8.0), (-8.0, 8.0)).unwrap();
        match FpSolver::new(&model, &DiffusionSpec::new(1.0, 0.0, 0.0), g, 1.0, FpScheme::FiniteVolume) {
            Err(Error::TimeStep { max_dt, .. }) => {
                assert!(max_dt < 1.0);
                assert!(FpSolver::new(&model, &DiffusionSpec::new(1.0, 0.0, 0.0), g, max_dt, FpScheme::FiniteVolume).is_ok());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn leak_is_detected() {
        let model = flat(1.0);
        let g = PhaseGrid::new(64, 64, (-4.0, 4.0), (-4.0, 4.0)).unwrap();
        let f0 = PhaseField::from_fn(g, gauss(2.5, 2.0, 0.5, 0.5));
        let r = evolve_fokker_planck(&f0, &model, &DiffusionSpec::new(1.0, 0.0, 0.0), 2.0, 0.02, 1, FpScheme::FiniteVolume);
        assert!(matches!(r, Err(Error::MassLeak(_))), "{r:?}");
        let r = evolve_fokker_planck(&f0, &model, &DiffusionSpec::new(1.0, 0.0, 0.0), 2.0, 0.02, 1, FpScheme::Spectral);
        assert!(matches!(r, Err(Error::MassLeak(_))), "{r:?}");
    }
}

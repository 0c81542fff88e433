use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{block_words, keyed};
use crate::scales::{DiffusionSpec, HamiltonianModel};

use super::phase::{PhaseField, PhaseGrid};

/// `M` phase-space points stored row-wise as `(x_1..x_d, p_1..p_d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LangevinEnsemble {
    pub dims: usize,
    pub samples: Vec<f64>,
    pub seed: u64,
    /// Steps taken so far; keys the noise of the next step.
    pub step: u64,
    pub time: f64,
}

impl LangevinEnsemble {
    /// Independent draws from `N(mean, cov)`.
    pub fn gaussian(mean: &DVector<f64>, cov: &DMatrix<f64>, count: usize, seed: u64) -> Result<Self> {
        let n = mean.len();
        if n % 2 != 0 || cov.shape() != (n, n) {
            return Err(Error::DimensionMismatch { expected: n, got: cov.nrows() });
        }
        let chol = nalgebra::Cholesky::new(cov.clone()).ok_or(Error::NotPositiveDefinite(0.0))?;
        let l = chol.l();
        let words = block_words(n);
        let mut samples = vec![0.0; count * n];
        samples.par_chunks_mut(n).enumerate().for_each(|(idx, row)| {
            let mut rng = keyed(seed, idx as u64, 0, words);
            let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let s = mean + &l * z;
            row.copy_from_slice(s.as_slice());
        });
        Ok(Self { dims: n / 2, samples, seed, step: 0, time: 0.0 })
    }

    pub fn len(&self) -> usize {
        self.samples.len() / (2 * self.dims)
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let n = 2 * self.dims;
        &self.samples[i * n..(i + 1) * n]
    }

    pub fn mean(&self) -> DVector<f64> {
        let n = 2 * self.dims;
        let mut m = DVector::zeros(n);
        for row in self.samples.chunks(n) {
            m += DVector::from_column_slice(row);
        }
        m / self.len() as f64
    }

    /// Unbiased sample covariance.
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = 2 * self.dims;
        let m = self.mean();
        let mut c = DMatrix::zeros(n, n);
        for row in self.samples.chunks(n) {
            let d = DVector::from_column_slice(row) - &m;
            c += &d * d.transpose();
        }
        c / (self.len() as f64 - 1.0)
    }

    /// Normalized histogram of a one-dimensional ensemble. Samples outside
    /// the box are dropped, so the mass falls short by the escaped fraction.
    pub fn histogram(&self, grid: PhaseGrid) -> Result<PhaseField> {
        if self.dims != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: self.dims });
        }
        let mut f = PhaseField::zeros(grid);
        f.time = self.time;
        let w = 1.0 / (self.len() as f64 * grid.cell_area());
        for row in self.samples.chunks(2) {
            if let Some((i, k)) = grid.locate(row[0], row[1]) {
                f.values[i * grid.np + k] += w;
            }
        }
        Ok(f)
    }
}

/// Euler-Maruyama for `dx = (p/m) dt + sqrt(D_x dt) xi_1`,
/// `dp = -grad V dt + sqrt(D_p dt) xi_2`. The noise of sample `i` at step `s`
/// comes from stream `i`, block `s + 1` of `seed`.
pub fn evolve_langevin_ensemble(
    ens: &LangevinEnsemble,
    model: &HamiltonianModel,
    diffusion: &DiffusionSpec,
    t: f64,
    dt: f64,
    seed: u64,
) -> Result<LangevinEnsemble> {
    let d = ens.dims;
    model.check_dims(d)?;
    diffusion.validate()?;
    if !(dt > 0.0) || t < 0.0 {
        return Err(Error::InvalidArgument(format!("bad time step {dt} for span {t}")));
    }
    let steps = (t / dt - 1e-9).ceil().max(0.0) as u64;
    let h = if steps > 0 { t / steps as f64 } else { 0.0 };
    let (sx, sp) = ((diffusion.d_x * h).sqrt(), (diffusion.d_p * h).sqrt());
    let words = block_words(2 * d);
    let inv_m = 1.0 / model.mass;
    let start = ens.step;
    let mut samples = ens.samples.clone();
    samples.par_chunks_mut(2 * d).enumerate().for_each(|(idx, row)| {
        for s in 0..steps {
            let mut rng = keyed(seed, idx as u64, start + s + 1, words);
            let grad = model.potential.gradient(&row[..d]);
            for k in 0..d {
                let xi: f64 = StandardNormal.sample(&mut rng);
                row[k] += row[d + k] * inv_m * h + sx * xi;
            }
            for k in 0..d {
                let xi: f64 = StandardNormal.sample(&mut rng);
                row[d + k] += -grad[k] * h + sp * xi;
            }
        }
    });
    Ok(LangevinEnsemble { dims: d, samples, seed, step: start + steps, time: ens.time + t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::fokker_planck::{evolve_fokker_planck, FpScheme};
    use crate::classical::phase::l1_distance;
    use crate::potentials::Profile;
    use std::f64::consts::PI;

    fn harmonic() -> HamiltonianModel {
        HamiltonianModel::builtin(Profile::harmonic(1.0, 1.0), 1, 1.0, &[-20.0], &[20.0]).unwrap()
    }

    #[test]
    fn deterministic_limit_tracks_rk4() {
        let model = HamiltonianModel::builtin(Profile::DoubleWell { a: 1.0, b: 1.0 }, 1, 1.0, &[-3.0], &[3.0]).unwrap();
        let mean = DVector::from_vec(vec![0.3, 0.8]);
        let ens = LangevinEnsemble::gaussian(&mean, &(DMatrix::identity(2, 2) * 1e-30), 1, 1).unwrap();
        let t = 1.0;
        let fine = evolve_langevin_ensemble(&ens, &model, &DiffusionSpec::new(1.0, 0.0, 0.0), t, 1e-4, 1).unwrap();
        let coarse = evolve_langevin_ensemble(&ens, &model, &DiffusionSpec::new(1.0, 0.0, 0.0), t, 1e-3, 1).unwrap();
        // RK4 reference.
        let f = |s: [f64; 2]| [s[1], -model.potential.gradient(&[s[0]])[0]];
        let mut s = [0.3, 0.8];
        let n = 10000;
        let h = t / n as f64;
        for _ in 0..n {
            let k1 = f(s);
            let k2 = f([s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1]]);
            let k3 = f([s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1]]);
            let k4 = f([s[0] + h * k3[0], s[1] + h * k3[1]]);
            for j in 0..2 {
                s[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        let e_fine = (fine.sample(0)[0] - s[0]).abs() + (fine.sample(0)[1] - s[1]).abs();
        let e_coarse = (coarse.sample(0)[0] - s[0]).abs() + (coarse.sample(0)[1] - s[1]).abs();
        assert!(e_fine < 1e-3, "{e_fine}");
        assert!(e_coarse > 5.0 * e_fine && e_coarse < 20.0 * e_fine, "{e_coarse} {e_fine}");
    }

    #[test]
    fn harmonic_covariance_within_three_standard_errors() {
        let (dx, dp, t) = (0.2, 0.4, 1.0);
        let mean = DVector::from_vec(vec![1.0, 0.0]);
        let c0 = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3]);
        let ens = LangevinEnsemble::gaussian(&mean, &c0, 40000, 11).unwrap();
        let dt = 1e-3;
        let out = evolve_langevin_ensemble(&ens, &harmonic(), &DiffusionSpec::new(1.0, dx, dp), t, dt, 11).unwrap();
        // Exact Euler-Maruyama covariance recursion C <- A C A^T + diag(Dx, Dp) dt.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, dt, -dt, 1.0]);
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![dx * dt, dp * dt]));
        let mut c = c0.clone();
        for _ in 0..(t / dt).round() as usize {
            c = &a * &c * a.transpose() + &q;
        }
        let emp = out.covariance();
        let m = out.len() as f64;
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            let se = ((c[(i, i)] * c[(j, j)] + c[(i, j)].powi(2)) / m).sqrt();
            assert!((emp[(i, j)] - c[(i, j)]).abs() < 3.0 * se, "{i}{j}: {} vs {} (se {se})", emp[(i, j)], c[(i, j)]);
        }
        assert_eq!(out.len(), 40000);
        assert_eq!(out.seed, 11);
    }

    #[test]
    fn splitting_the_run_changes_nothing() {
        let ens = LangevinEnsemble::gaussian(&DVector::from_vec(vec![0.0, 1.0]), &DMatrix::identity(2, 2), 100, 5).unwrap();
        let diff = DiffusionSpec::new(1.0, 0.1, 0.1);
        let once = evolve_langevin_ensemble(&ens, &harmonic(), &diff, 0.5, 0.01, 5).unwrap();
        let half = evolve_langevin_ensemble(&ens, &harmonic(), &diff, 0.25, 0.01, 5).unwrap();
        let twice = evolve_langevin_ensemble(&half, &harmonic(), &diff, 0.25, 0.01, 5).unwrap();
        for (a, b) in once.samples.iter().zip(&twice.samples) {
            assert!((a - b).abs() < 1e-12);
        }
        let other = evolve_langevin_ensemble(&ens, &harmonic(), &diff, 0.5, 0.01, 6).unwrap();
        assert_ne!(once.samples, other.samples);
    }

    #[test]
    fn histogram_converges_to_grid_solution() {
        let model = HamiltonianModel::builtin(Profile::DoubleWell { a: 1.0, b: 1.0 }, 1, 1.0, &[-3.0], &[3.0]).unwrap();
        let diff = DiffusionSpec::new(1.0, 0.02, 0.05);
        let (mx, mp, s) = (0.8, 0.0, 0.25);
        let t = 1.0;
        let fine = PhaseGrid::new(256, 256, (-2.5, 2.5), (-2.5, 2.5)).unwrap();
        let f0 = PhaseField::from_fn(fine, |x, p| {
            (-((x - mx).powi(2) + (p - mp).powi(2)) / (2.0 * s * s)).exp() / (2.0 * PI * s * s)
        });
        let grid_sol = evolve_fokker_planck(&f0, &model, &diff, t, 0.002, 1, FpScheme::Spectral).unwrap();
        let reference = grid_sol[0].coarse_grain(8).unwrap();
        let coarse = reference.grid;
        let mut dists = Vec::new();
        for m in [50000usize, 200000] {
            let ens = LangevinEnsemble::gaussian(&DVector::from_vec(vec![mx, mp]), &(DMatrix::identity(2, 2) * s * s), m, 3).unwrap();
            let out = evolve_langevin_ensemble(&ens, &model, &diff, t, 0.002, 3).unwrap();
            let h = out.histogram(coarse).unwrap();
            dists.push(l1_distance(&h, &PhaseField { time: h.time, ..reference.clone() }).unwrap());
        }
        // Quadrupling M halves the statistical L1.
        let ratio = dists[0] / dists[1];
        assert!(ratio > 1.5 && ratio < 2.6, "{dists:?}");
        assert!(dists[1] < 0.05, "{dists:?}");
    }
}

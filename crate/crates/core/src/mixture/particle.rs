use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gaussian::{purify, symplectic_defect, GaussianState};
use crate::linalg::{max_abs, min_eigenvalue, sym_apply, sym_eigen, sym_eigenvalues, symmetrize};
use crate::potentials::{flow_vector, whitened_hamiltonian_matrix};
use crate::scales::{HamiltonianModel, ScaleReport};

use super::split::{effective_z, split_whitened, whitened_diffusion};

/// Symplectic defect above which a covariance is projected back onto the
/// pure states.
pub const PROJECTION_THRESHOLD: f64 = 1e-10;

/// Slack on the squeeze window after projection.
pub const NTS_SLACK: f64 = 1e-6;

/// Largest step relative to `tau_H`.
pub const MAX_STEP: f64 = 1e-2;

/// How the centroid diffusion is realized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixtureMode {
    /// Each particle carries a Gaussian cloud of centroids whose covariance
    /// is propagated along the linearized flow and fed by `S_D`. Clouds that
    /// grow past the split threshold are replaced by three Gauss-Hermite
    /// children.
    #[default]
    Cloud,
    /// Point particles receiving Gaussian kicks with covariance
    /// `int S_D dt` at every step.
    Stochastic,
}

/// One weighted Gaussian of the mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct Particle {
    pub weight: f64,
    pub state: GaussianState,
    /// Covariance of the centroid cloud; zero for point particles.
    pub cloud: DMatrix<f64>,
}

impl Particle {
    pub fn point(weight: f64, state: GaussianState) -> Self {
        let n = state.mean.len();
        Self { weight, state, cloud: DMatrix::zeros(n, n) }
    }

    /// `max(lambda_max, 1/lambda_min)` of the whitened covariance.
    pub fn squeeze_ratio(&self, scales: &ScaleReport) -> f64 {
        let ev = sym_eigenvalues(&scales.whiten(&self.state.cov));
        ev[ev.len() - 1].max(1.0 / ev[0])
    }

    /// Covariance of the mixed Gaussian obtained by averaging over the cloud.
    pub fn total_covariance(&self) -> DMatrix<f64> {
        &self.state.cov + &self.cloud
    }
}

/// Per-step monitoring.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    pub defect_before: f64,
    pub defect_after: f64,
    /// Largest entry of the whitened projection displacement.
    pub projection: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub substeps: usize,
}

struct Rhs<'a> {
    model: &'a HamiltonianModel,
    scales: &'a ScaleReport,
    d: DMatrix<f64>,
    z: f64,
    pinned: bool,
}

struct State {
    a: DVector<f64>,
    s: DMatrix<f64>,
    y: DMatrix<f64>,
}

impl State {
    fn axpy(&self, h: f64, k: &State) -> State {
        State { a: &self.a + &k.a * h, s: &self.s + &k.s * h, y: &self.y + &k.y * h }
    }
}

impl Rhs<'_> {
    fn eval(&self, st: &State) -> Result<State> {
        let f = whitened_hamiltonian_matrix(self.model, &st.a, self.scales);
        let (sz, sd) = if self.pinned {
            let n = f.nrows();
            (DMatrix::zeros(n, n), &f + f.transpose() + &self.d)
        } else {
            split_whitened(&f, &st.s, &self.d, self.scales.broadening_rate, self.z)?
        };
        let y = &f * &st.y + &st.y * f.transpose() + sd;
        Ok(State { a: flow_vector(self.model, &st.a), s: sz, y })
    }

    /// Rough bound on the stiffness of the covariance equation.
    fn stiffness(&self) -> f64 {
        let base = 2.0 / self.scales.tau_h;
        if self.pinned {
            return base;
        }
        let ze = effective_z(self.z);
        base + 2.0 * self.scales.broadening_rate * (ze + 1.0 / ze) / (1.0 - ze.powi(-2))
    }
}

/// Whether the squeeze window has collapsed onto `sigma*`.
pub fn is_pinned(z: f64) -> bool {
    z <= 1.0 + 1e-12
}

/// Advances one particle by `dt`. The centroid follows the classical flow,
/// the covariance follows `S_Z` with RK4 and is projected back to purity
/// when needed, and the `S_D` diffusion either widens the cloud or kicks the
/// centroid with noise drawn from `rng`.
pub fn step_particle<R: Rng + ?Sized>(
    particle: &Particle,
    model: &HamiltonianModel,
    scales: &ScaleReport,
    z: f64,
    dt: f64,
    mode: MixtureMode,
    rng: &mut R,
) -> Result<(Particle, StepReport)> {
    let n = particle.state.mean.len();
    model.check_dims(n / 2)?;
    let max_dt = MAX_STEP * scales.tau_h * (1.0 + 1e-9);
    if !(dt > 0.0) || dt > max_dt {
        return Err(Error::TimeStep { dt, max_dt });
    }
    let pinned = is_pinned(z);
    let rhs = Rhs { model, scales, d: whitened_diffusion(scales), z, pinned };
    let substeps = ((dt * rhs.stiffness() / 0.5).ceil() as usize).max(1);
    let h = dt / substeps as f64;
    let mut st = State {
        a: particle.state.mean.clone(),
        s: if pinned { DMatrix::identity(n, n) } else { scales.whiten(&particle.state.cov) },
        y: match mode {
            MixtureMode::Cloud => scales.whiten(&particle.cloud),
            MixtureMode::Stochastic => DMatrix::zeros(n, n),
        },
    };
    for _ in 0..substeps {
        let k1 = rhs.eval(&st)?;
        let k2 = rhs.eval(&st.axpy(0.5 * h, &k1))?;
        let k3 = rhs.eval(&st.axpy(0.5 * h, &k2))?;
        let k4 = rhs.eval(&st.axpy(h, &k3))?;
        st.a += (&k1.a + (&k2.a + &k3.a) * 2.0 + &k4.a) * (h / 6.0);
        st.s += (&k1.s + (&k2.s + &k3.s) * 2.0 + &k4.s) * (h / 6.0);
        st.y += (&k1.y + (&k2.y + &k3.y) * 2.0 + &k4.y) * (h / 6.0);
    }
    let mut report = StepReport { substeps, ..Default::default() };

    let mut s = symmetrize(&st.s);
    report.defect_before = symplectic_defect(&s);
    if report.defect_before > PROJECTION_THRESHOLD {
        let p = purify(&s, 2.0);
        report.projection = max_abs(&(&p - &s));
        s = p;
    }
    report.defect_after = symplectic_defect(&s);
    let ev = sym_eigenvalues(&s);
    report.min_eigenvalue = ev[0];
    report.max_eigenvalue = ev[n - 1];
    if ev[0] < 1.0 / z - NTS_SLACK || ev[n - 1] > z + NTS_SLACK {
        return Err(Error::TooSqueezed { min: ev[0], max: ev[n - 1], z });
    }

    let y = symmetrize(&st.y);
    let floor = -1e-9 * (1.0 + max_abs(&y));
    let ymin = min_eigenvalue(&y);
    if ymin < floor {
        return Err(Error::Invariant { step: 0, what: format!("centroid diffusion has eigenvalue {ymin:.3e}") });
    }
    let unwhite = scales.unwhiten_diag();
    let mut alpha = st.a;
    let cloud = match mode {
        MixtureMode::Cloud => scales.unwhiten(&sym_apply(&y, |v| v.max(0.0))),
        MixtureMode::Stochastic => {
            let root = sym_apply(&y, |v| v.max(0.0).sqrt());
            let xi = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            alpha += (root * xi).component_mul(&unwhite);
            DMatrix::zeros(n, n)
        }
    };
    let d = n / 2;
    if !model.in_domain(&alpha.as_slice()[..d]) {
        return Err(Error::OutsideDomain { x: alpha.as_slice()[..d].to_vec() });
    }
    let sigma = if pinned { scales.sigma_star.clone() } else { scales.unwhiten(&s) };
    let state = GaussianState { mean: alpha, cov: sigma, hbar: scales.hbar };
    Ok((Particle { weight: particle.weight, state, cloud }, report))
}

/// Largest eigenvalue of the whitened cloud and its eigenvector.
pub fn cloud_extent(particle: &Particle, scales: &ScaleReport) -> (f64, DVector<f64>) {
    let (vals, vecs) = sym_eigen(&scales.whiten(&particle.cloud));
    let n = vals.len();
    (vals[n - 1], vecs.column(n - 1).into_owned())
}

/// Replaces the cloud along its widest whitened direction by three
/// Gauss-Hermite children carrying weights `1/6, 2/3, 1/6`. A fraction
/// `fraction` of the variance along that direction moves into the spread of
/// the children; mean and covariance of the cloud are preserved.
pub fn split_particle(particle: &Particle, scales: &ScaleReport, fraction: f64) -> Vec<Particle> {
    let (lambda, u) = cloud_extent(particle, scales);
    let shift_tilde = &u * (fraction * lambda).sqrt();
    let shift = shift_tilde.component_mul(&scales.unwhiten_diag());
    let rest_tilde = scales.whiten(&particle.cloud) - &shift_tilde * shift_tilde.transpose();
    let rest = scales.unwhiten(&sym_apply(&rest_tilde, |v| v.max(0.0)));
    let root3 = 3f64.sqrt();
    [(-root3, 1.0 / 6.0), (0.0, 2.0 / 3.0), (root3, 1.0 / 6.0)]
        .iter()
        .map(|&(node, w)| {
            let mut state = particle.state.clone();
            state.mean += &shift * node;
            Particle { weight: particle.weight * w, state, cloud: rest.clone() }
        })
        .collect()
}

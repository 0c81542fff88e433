//! Experiment configuration files (TOML).
//!
//! ```toml
//! [model]
//! potential = "double-well"   # harmonic | double-well | cosine | cubic
//! params = [1.0, 1.0]
//! mass = 1.0
//! domain = [-3.0, 3.0]
//!
//! [diffusion]
//! hbar_ratio = 1e-3           # or hbar = ...
//! threshold_multiple = 3.0    # or d0 = ..., or d_x = ... and d_p = ...
//! threshold_epsilon = 0.3
//! threshold_time = 5.0
//!
//! [initial]
//! center = [1.0, 0.0]
//!
//! [numerics]
//! t_final = 5.0               # times are in units of tau_H
//! snapshots = 10
//! ```
//!
//! Every error names the line it refers to.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::classical::{FpScheme, PhaseGrid};
use crate::error::{Error, Result};
use crate::gaussian::{nts_check, GaussianState};
use crate::mixture::{MixtureMode, MixtureOptions};
use crate::potentials::Profile;
use crate::quantum::{LindbladMethod, PositionGrid};
use crate::scales::{diffusion_threshold, Bound, DiffusionSpec, HamiltonianModel, ScaleReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub diffusion: DiffusionConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub demo: DemoConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub potential: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "one_usize")]
    pub dims: usize,
    /// Box `[lo, hi]` applied in every dimension.
    pub domain: [f64; 2],
}

/// Exactly one of `hbar`, `hbar_ratio`; exactly one of `d_x`+`d_p`, `d0`,
/// `threshold_multiple`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    /// `hbar / s_H`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d0: Option<f64>,
    /// `D0` as a multiple of the threshold for `threshold_epsilon` at
    /// `threshold_time`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_multiple: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_time: Option<f64>,
    #[serde(default)]
    pub effective_position_diffusion: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub center: Vec<f64>,
    /// Row-major covariance; defaults to the coherent `sigma*`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    /// Scales `sigma*` to `diag(r sigma*_x, sigma*_p / r)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub squeeze: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    pub t_final: f64,
    pub snapshots: usize,
    pub dt: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fp_dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub langevin_dt: Option<f64>,
    pub particles: usize,
    pub langevin_samples: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_cap: Option<f64>,
    pub margin: f64,
    /// Absolute slack on top of `epsilon(t) (1 + margin)`.
    pub abs_tolerance: f64,
    pub mixture_mode: MixtureMode,
    pub split_threshold: f64,
    pub split_fraction: f64,
    pub fp_scheme: FpScheme,
    pub lindblad_method: LindbladMethod,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        let mix = MixtureOptions::default();
        Self {
            t_final: 5.0,
            snapshots: 10,
            dt: 0.01,
            fp_dt: None,
            langevin_dt: None,
            particles: 1000,
            langevin_samples: 100_000,
            seed: 0,
            z_cap: None,
            margin: 0.1,
            abs_tolerance: 1e-3,
            mixture_mode: mix.mode,
            split_threshold: mix.split_threshold,
            split_fraction: mix.split_fraction,
            fp_scheme: FpScheme::default(),
            lindblad_method: LindbladMethod::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n: usize,
    /// Defaults to the model domain.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<[f64; 2]>,
    pub phase_n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_x: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_p: Option<[f64; 2]>,
    /// The grid Fokker-Planck run uses `refine` times finer cells, then
    /// coarse-grains.
    pub refine: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 256, x: None, phase_n: 128, phase_x: None, phase_p: None, refine: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemoConfig {
    /// `D0` of the diffusive run; the zero-diffusion run always uses 0.
    pub diffusive_d0: f64,
    /// `hbar / s_H` values for the negativity-onset sweep.
    pub hbar_ratios: Vec<f64>,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self { diffusive_d0: 0.05, hbar_ratios: vec![] }
    }
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

/// A problem found while validating, attached to a key.
#[derive(Clone, Debug, PartialEq)]
struct Issue {
    section: &'static str,
    key: &'static str,
    message: String,
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn issue(section: &'static str, key: &'static str, message: impl Into<String>) -> Issue {
    Issue { section, key, message: message.into() }
}

/// Everything a run needs, in physical units.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: HamiltonianModel,
    pub diffusion: DiffusionSpec,
    pub scales: ScaleReport,
    pub initial: GaussianState,
    pub t_final: f64,
    pub dt: f64,
    pub fp_dt: f64,
    pub langevin_dt: f64,
    /// Snapshot times after `t = 0`.
    pub times: Vec<f64>,
    /// One-dimensional models only.
    pub position_grid: Option<PositionGrid>,
    pub phase_grid: Option<PhaseGrid>,
    pub mixture: MixtureOptions,
}

impl ExperimentConfig {
    /// Parses and validates.
    pub fn parse(src: &str) -> Result<Self> {
        let cfg = Self::parse_raw(src)?;
        cfg.check(src)?;
        Ok(cfg)
    }

    /// Parses syntax and field types only, so overrides can be applied
    /// before [`ExperimentConfig::check`].
    pub fn parse_raw(src: &str) -> Result<Self> {
        toml::from_str(src).map_err(|e| {
            let line = e.span().map(|s| line_of_offset(src, s.start)).unwrap_or(1);
            Error::Config(format!("line {line}: {}", e.message().trim()))
        })
    }

    /// Validates, pointing errors at the line of `src` holding the key.
    pub fn check(&self, src: &str) -> Result<()> {
        self.build().map(|_| ()).map_err(|i| anchored(src, &i))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (cfg, src) = Self::load_raw(path)?;
        cfg.check(&src).map_err(|e| with_path(path, e))?;
        Ok(cfg)
    }

    /// Unvalidated config and its source text.
    pub fn load_raw(path: &Path) -> Result<(Self, String)> {
        let src = std::fs::read_to_string(path)?;
        let cfg = Self::parse_raw(&src).map_err(|e| with_path(path, e))?;
        Ok((cfg, src))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Resolves to physical quantities. Errors name the offending key but no
    /// line; use [`ExperimentConfig::parse`] on the source for that.
    pub fn resolve(&self) -> Result<Experiment> {
        self.build().map_err(|i| Error::Config(format!("[{}] {}: {}", i.section, i.key, i.message)))
    }

    fn build(&self) -> std::result::Result<Experiment, Issue> {
        let m = &self.model;
        if !(m.mass > 0.0 && m.mass.is_finite()) {
            return Err(issue("model", "mass", "must be positive"));
        }
        if m.dims == 0 {
            return Err(issue("model", "dims", "must be at least 1"));
        }
        if !(m.domain[0] < m.domain[1]) || !m.domain.iter().all(|v| v.is_finite()) {
            return Err(issue("model", "domain", "needs lo < hi"));
        }
        let profile = Profile::from_name(&m.potential, &m.params, m.mass)
            .map_err(|e| issue("model", if m.potential_known() { "params" } else { "potential" }, e.to_string()))?;
        let lo = vec![m.domain[0]; m.dims];
        let hi = vec![m.domain[1]; m.dims];
        let model = HamiltonianModel::builtin(profile, m.dims, m.mass, &lo, &hi)
            .map_err(|e| issue("model", "potential", e.to_string()))?;

        let diffusion = self.resolve_diffusion(&model)?;
        let scales = model
            .scales(&diffusion)
            .map_err(|e| issue("diffusion", "hbar", e.to_string()))?
            .with_z_cap(self.numerics.z_cap);
        if let Some(cap) = self.numerics.z_cap {
            if !(cap >= 1.0) {
                return Err(issue("numerics", "z_cap", "must be at least 1"));
            }
        }
        if scales.z_in_force().is_err() {
            return Err(issue(
                "diffusion",
                "d0",
                "zero diffusion leaves the squeeze bound unbounded and the error bound inapplicable; set numerics.z_cap to proceed",
            ));
        }
        let z = scales.z_in_force().unwrap_or(1.0);

        let d = m.dims;
        let ini = &self.initial;
        if ini.center.len() != 2 * d {
            return Err(issue("initial", "center", format!("needs {} entries (x then p)", 2 * d)));
        }
        if !model.in_domain(&ini.center[..d]) {
            return Err(issue("initial", "center", "position lies outside the model domain"));
        }
        let cov = match (&ini.covariance, ini.squeeze) {
            (Some(_), Some(_)) => return Err(issue("initial", "squeeze", "give either covariance or squeeze")),
            (Some(rows), None) => {
                if rows.len() != 2 * d || rows.iter().any(|r| r.len() != 2 * d) {
                    return Err(issue("initial", "covariance", format!("needs a {0}x{0} matrix", 2 * d)));
                }
                DMatrix::from_fn(2 * d, 2 * d, |i, j| rows[i][j])
            }
            (None, r) => {
                let r = r.unwrap_or(1.0);
                if !(r > 0.0) {
                    return Err(issue("initial", "squeeze", "must be positive"));
                }
                let mut c = scales.sigma_star.clone();
                for k in 0..d {
                    c[(k, k)] *= r;
                    c[(d + k, d + k)] /= r;
                }
                c
            }
        };
        let cov_key = if ini.squeeze.is_some() { "squeeze" } else { "covariance" };
        let initial = GaussianState::new(DVector::from_column_slice(&ini.center), cov, diffusion.hbar)
            .map_err(|e| issue("initial", cov_key, e.to_string()))?;
        if !initial.is_pure(1e-8) {
            return Err(issue("initial", cov_key, "must describe a pure Gaussian state"));
        }
        if !nts_check(&initial.cov, &scales.sigma_star, z * (1.0 + 1e-9)) {
            return Err(issue("initial", cov_key, format!("squeezed beyond z = {z:.6}")));
        }

        let n = &self.numerics;
        let tau = scales.tau_h;
        if !(n.t_final > 0.0) {
            return Err(issue("numerics", "t_final", "must be positive"));
        }
        if n.snapshots == 0 {
            return Err(issue("numerics", "snapshots", "must be at least 1"));
        }
        for (key, v) in [("dt", Some(n.dt)), ("fp_dt", n.fp_dt), ("langevin_dt", n.langevin_dt)] {
            if let Some(v) = v {
                if !(v > 0.0 && v <= n.t_final) {
                    return Err(issue("numerics", key, "must lie in (0, t_final]"));
                }
            }
        }
        if n.particles == 0 {
            return Err(issue("numerics", "particles", "must be at least 1"));
        }
        if !(n.margin >= 0.0) {
            return Err(issue("numerics", "margin", "must be nonnegative"));
        }
        if !(n.abs_tolerance >= 0.0) {
            return Err(issue("numerics", "abs_tolerance", "must be nonnegative"));
        }
        if !(n.split_threshold > 0.0) {
            return Err(issue("numerics", "split_threshold", "must be positive"));
        }
        if !(n.split_fraction > 0.0 && n.split_fraction < 1.0) {
            return Err(issue("numerics", "split_fraction", "must lie in (0, 1)"));
        }
        let t_final = n.t_final * tau;
        let times = (1..=n.snapshots).map(|k| t_final * k as f64 / n.snapshots as f64).collect();

        let (position_grid, phase_grid) = if d == 1 { self.grids(&model, &scales, &initial)? } else { (None, None) };
        if self.demo.hbar_ratios.iter().any(|r| !(*r > 0.0)) {
            return Err(issue("demo", "hbar_ratios", "must be positive"));
        }
        if !(self.demo.diffusive_d0 > 0.0) {
            return Err(issue("demo", "diffusive_d0", "must be positive"));
        }

        Ok(Experiment {
            config: self.clone(),
            model,
            diffusion,
            scales,
            initial,
            t_final,
            dt: n.dt * tau,
            fp_dt: n.fp_dt.unwrap_or(n.dt) * tau,
            langevin_dt: n.langevin_dt.unwrap_or(n.dt) * tau,
            times,
            position_grid,
            phase_grid,
            mixture: MixtureOptions {
                mode: n.mixture_mode,
                split_threshold: n.split_threshold,
                split_fraction: n.split_fraction,
                max_particles: n.particles,
            },
        })
    }

    fn resolve_diffusion(&self, model: &HamiltonianModel) -> std::result::Result<DiffusionSpec, Issue> {
        let c = &self.diffusion;
        let probe = |hbar: f64| {
            model.scales(&DiffusionSpec::new(hbar, 0.0, 0.0)).map_err(|e| issue("diffusion", "hbar", e.to_string()))
        };
        let hbar = match (c.hbar, c.hbar_ratio) {
            (Some(h), None) => h,
            (None, Some(r)) => {
                if !(r > 0.0) {
                    return Err(issue("diffusion", "hbar_ratio", "must be positive"));
                }
                match probe(1.0)?.s_h {
                    Bound::Finite(s) => r * s,
                    Bound::Infinite => {
                        return Err(issue("diffusion", "hbar_ratio", "undefined for a harmonic potential; give hbar"))
                    }
                }
            }
            (Some(_), Some(_)) => return Err(issue("diffusion", "hbar_ratio", "give either hbar or hbar_ratio")),
            (None, None) => return Err(issue("diffusion", "hbar", "missing; give hbar or hbar_ratio")),
        };
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(issue("diffusion", "hbar", "must be positive"));
        }
        let explicit = c.d_x.is_some() || c.d_p.is_some();
        let modes = explicit as u8 + c.d0.is_some() as u8 + c.threshold_multiple.is_some() as u8;
        if modes > 1 {
            return Err(issue("diffusion", "d0", "give exactly one of d_x/d_p, d0, threshold_multiple"));
        }
        let from_d0 = |d0: f64, key: &'static str| {
            if !(d0 >= 0.0) {
                return Err(issue("diffusion", key, "must be nonnegative"));
            }
            DiffusionSpec::from_d0(model, hbar, d0).map_err(|e| issue("diffusion", key, e.to_string()))
        };
        let mut spec = if explicit {
            let (dx, dp) = match (c.d_x, c.d_p) {
                (Some(x), Some(p)) => (x, p),
                (None, _) => return Err(issue("diffusion", "d_x", "d_x and d_p go together")),
                (_, None) => return Err(issue("diffusion", "d_p", "d_x and d_p go together")),
            };
            if !(dx >= 0.0) {
                return Err(issue("diffusion", "d_x", "must be nonnegative"));
            }
            if !(dp >= 0.0) {
                return Err(issue("diffusion", "d_p", "must be nonnegative"));
            }
            DiffusionSpec::new(hbar, dx, dp)
        } else if let Some(d0) = c.d0 {
            from_d0(d0, "d0")?
        } else if let Some(k) = c.threshold_multiple {
            if !(k > 0.0) {
                return Err(issue("diffusion", "threshold_multiple", "must be positive"));
            }
            let eps = c.threshold_epsilon.ok_or_else(|| issue("diffusion", "threshold_epsilon", "required"))?;
            let t = c.threshold_time.ok_or_else(|| issue("diffusion", "threshold_time", "required"))?;
            let s = probe(hbar)?;
            let thr = diffusion_threshold(&s, eps, t * s.tau_h, model.dims())
                .map_err(|e| issue("diffusion", "threshold_epsilon", e.to_string()))?;
            from_d0(k * thr, "threshold_multiple")?
        } else {
            DiffusionSpec::new(hbar, 0.0, 0.0)
        };
        spec.effective_position_diffusion = c.effective_position_diffusion;
        Ok(spec)
    }

    fn grids(
        &self,
        model: &HamiltonianModel,
        scales: &ScaleReport,
        initial: &GaussianState,
    ) -> std::result::Result<(Option<PositionGrid>, Option<PhaseGrid>), Issue> {
        let g = &self.grid;
        let dom = self.model.domain;
        let x = g.x.unwrap_or(dom);
        if g.n < 16 {
            return Err(issue("grid", "n", "must be at least 16"));
        }
        let pos = PositionGrid::new(g.n, x[0], x[1]).map_err(|e| issue("grid", "x", e.to_string()))?;
        if g.phase_n < 4 {
            return Err(issue("grid", "phase_n", "must be at least 4"));
        }
        if g.refine == 0 {
            return Err(issue("grid", "refine", "must be at least 1"));
        }
        let px = g.phase_x.unwrap_or(dom);
        let pp = match g.phase_p {
            Some(p) => p,
            None => {
                // Momentum reachable from rest inside the domain, plus room
                // for the initial spread.
                let span = 64;
                let v: Vec<f64> = (0..=span)
                    .map(|i| model.potential.value(&[dom[0] + (dom[1] - dom[0]) * i as f64 / span as f64]))
                    .collect();
                let vmin = v.iter().cloned().fold(f64::INFINITY, f64::min);
                let e0 = model.potential.value(&[initial.mean[0]]) + initial.mean[1].powi(2) / (2.0 * model.mass);
                let pmax = (2.0 * model.mass * (e0 - vmin)).max(0.0).sqrt()
                    + 8.0 * initial.cov[(1, 1)].sqrt().max(scales.sigma_star[(1, 1)].sqrt());
                [-pmax, pmax]
            }
        };
        let phase = PhaseGrid::new(g.phase_n, g.phase_n, (px[0], px[1]), (pp[0], pp[1]))
            .map_err(|e| issue("grid", "phase_p", e.to_string()))?;
        Ok((Some(pos), Some(phase)))
    }
}

impl ModelConfig {
    fn potential_known(&self) -> bool {
        matches!(self.potential.as_str(), "harmonic" | "double-well" | "cosine" | "cubic")
    }
}

fn line_of_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]`, else of the section header, else 1.
fn locate(src: &str, section: &str, key: &str) -> usize {
    let mut current = "";
    let mut header = None;
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.split(']').next()) {
            current = name.trim();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim().trim_matches('"') == key {
                    return i + 1;
                }
            }
        }
    }
    header.unwrap_or(1)
}

fn anchored(src: &str, i: &Issue) -> Error {
    Error::Config(format!("line {}: [{}] {}: {}", locate(src, i.section, i.key), i.section, i.key, i.message))
}

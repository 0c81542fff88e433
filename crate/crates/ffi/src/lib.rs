//! C ABI over `qclab`.
//!
//! Every function returns a [`QclabStatus`]; on failure the message is
//! available from [`qclab_last_error`] on the same thread. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use qclab::config::{Experiment, ExperimentConfig};
use qclab::experiment::{initial_mixture, physical_example_with, run_comparison, ComparisonReport};
use qclab::mixture::MixtureEnsemble;
use qclab::potentials::Profile;
use qclab::scales::{ehrenfest_time, theorem_epsilon, Bound, DiffusionSpec, HamiltonianModel, ScaleReport};
use qclab::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QclabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidModel = 3,
    Config = 4,
    /// Squeeze bound unbounded, covariance outside the window, epsilon
    /// below its floor.
    Precondition = 5,
    GridCoverage = 6,
    /// A monitored invariant failed during integration.
    Numerical = 7,
    Io = 8,
    OutOfRange = 9,
    Panic = 10,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> QclabStatus {
    match e {
        Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::NotSymmetric(_) => {
            QclabStatus::InvalidArgument
        }
        Error::InvalidModel(_) | Error::NoSemiclassicalRegime { .. } => QclabStatus::InvalidModel,
        Error::Config(_) => QclabStatus::Config,
        Error::UnboundedSqueeze
        | Error::TooSqueezed { .. }
        | Error::EpsilonBelowFloor { .. }
        | Error::NotPositiveDefinite(_)
        | Error::NotPure(_)
        | Error::OutsideDomain { .. }
        | Error::TimeStep { .. } => QclabStatus::Precondition,
        Error::GridCoverage(_) | Error::GridMismatch => QclabStatus::GridCoverage,
        Error::Invariant { .. } | Error::MassLeak(_) | Error::NegativeDiffusion(_) => QclabStatus::Numerical,
        Error::Io(_) => QclabStatus::Io,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (QclabStatus, String)>) -> QclabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QclabStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            QclabStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn st(self) -> Result<T, (QclabStatus, String)>;
}

impl<T> OrStatus<T> for qclab::Result<T> {
    fn st(self) -> Result<T, (QclabStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (QclabStatus, String) {
    (QclabStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (QclabStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (QclabStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (QclabStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (QclabStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failure on this thread; empty if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qclab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Scale constants. Infinite values are reported as `INFINITY`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QclabScales {
    pub hbar: f64,
    pub d_x: f64,
    pub d_p: f64,
    pub tau_h: f64,
    pub a_h: f64,
    pub s_h: f64,
    pub x_h: f64,
    pub p_h: f64,
    pub d0: f64,
    pub z: f64,
}

fn finite_or_inf(b: Bound) -> f64 {
    b.finite().unwrap_or(f64::INFINITY)
}

impl From<&ScaleReport> for QclabScales {
    fn from(s: &ScaleReport) -> Self {
        Self {
            hbar: s.hbar,
            d_x: s.diffusion.d_x,
            d_p: s.diffusion.d_p,
            tau_h: s.tau_h,
            a_h: s.a_h,
            s_h: finite_or_inf(s.s_h),
            x_h: finite_or_inf(s.x_h),
            p_h: finite_or_inf(s.p_h),
            d0: s.d0,
            z: finite_or_inf(s.z),
        }
    }
}

/// Scales of a one-dimensional built-in potential on `[lo, hi]`.
///
/// # Safety
/// `potential` must be a NUL-terminated string, `params` must point to
/// `n_params` values (or be null when `n_params == 0`) and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn qclab_scales_compute(
    potential: *const c_char,
    params: *const f64,
    n_params: usize,
    mass: f64,
    lo: f64,
    hi: f64,
    hbar: f64,
    d_x: f64,
    d_p: f64,
    out: *mut QclabScales,
) -> QclabStatus {
    guard(|| {
        let name = str_arg(potential, "potential")?;
        let params = if n_params == 0 {
            &[][..]
        } else if params.is_null() {
            return Err(null("params"));
        } else {
            std::slice::from_raw_parts(params, n_params)
        };
        let out = out_ref(out, "out")?;
        let profile = Profile::from_name(name, params, mass).st()?;
        let model = HamiltonianModel::builtin(profile, 1, mass, &[lo], &[hi]).st()?;
        let scales = model.scales(&DiffusionSpec::new(hbar, d_x, d_p)).st()?;
        *out = QclabScales::from(&scales);
        Ok(())
    })
}

/// `lambda^-1 ln(s / hbar)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qclab_ehrenfest_time(lyapunov: f64, action: f64, hbar: f64, out: *mut f64) -> QclabStatus {
    guard(|| {
        *out_ref(out, "out")? = ehrenfest_time(lyapunov, action, hbar).st()?;
        Ok(())
    })
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QclabPhysicalExample {
    pub time_s: f64,
    pub time_years: f64,
    pub ehrenfest_s: f64,
    pub correspondence_s: f64,
}

/// Correspondence time of a grain of `mass` kg at `velocity` m/s in a
/// potential varying over `length` m, with localization rate `rate`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qclab_physical_example(
    mass: f64,
    velocity: f64,
    length: f64,
    rate: f64,
    out: *mut QclabPhysicalExample,
) -> QclabStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let p = physical_example_with(mass, velocity, length, rate).st()?;
        *out = QclabPhysicalExample {
            time_s: p.time_s,
            time_years: p.time_years,
            ehrenfest_s: p.ehrenfest_s,
            correspondence_s: p.correspondence_s,
        };
        Ok(())
    })
}

/// A validated experiment.
pub struct QclabExperiment(Experiment);

fn resolve(cfg: qclab::Result<ExperimentConfig>) -> Result<*mut QclabExperiment, (QclabStatus, String)> {
    let exp = cfg.and_then(|c| c.resolve()).st()?;
    Ok(Box::into_raw(Box::new(QclabExperiment(exp))))
}

/// Parses an experiment from TOML text.
///
/// # Safety
/// `toml` must be NUL-terminated and `out` writable. On success `*out`
/// owns a handle to release with [`qclab_experiment_free`].
#[no_mangle]
pub unsafe extern "C" fn qclab_experiment_from_toml(toml: *const c_char, out: *mut *mut QclabExperiment) -> QclabStatus {
    guard(|| {
        let src = str_arg(toml, "toml")?;
        let out = out_ref(out, "out")?;
        *out = resolve(ExperimentConfig::parse(src))?;
        Ok(())
    })
}

/// Loads an experiment file.
///
/// # Safety
/// As [`qclab_experiment_from_toml`], with `path` a file path.
#[no_mangle]
pub unsafe extern "C" fn qclab_experiment_load(path: *const c_char, out: *mut *mut QclabExperiment) -> QclabStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_ref(out, "out")?;
        *out = resolve(ExperimentConfig::load(Path::new(path)))?;
        Ok(())
    })
}

/// # Safety
/// `exp` must come from this library and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn qclab_experiment_free(exp: *mut QclabExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// # Safety
/// `exp` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qclab_experiment_scales(exp: *const QclabExperiment, out: *mut QclabScales) -> QclabStatus {
    guard(|| {
        let exp = handle(exp, "exp")?;
        let out = out_ref(out, "out")?;
        let mut s = QclabScales::from(&exp.0.scales);
        if s.z.is_infinite() {
            if let Some(c) = exp.0.scales.z_cap {
                s.z = c;
            }
        }
        *out = s;
        Ok(())
    })
}

/// Error budget `epsilon(t)`; `t` in physical units.
///
/// # Safety
/// `exp` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qclab_experiment_epsilon(exp: *const QclabExperiment, t: f64, out: *mut f64) -> QclabStatus {
    guard(|| {
        let exp = handle(exp, "exp")?;
        *out_ref(out, "out")? = theorem_epsilon(&exp.0.scales, t, exp.0.model.dims()).st()?;
        Ok(())
    })
}

/// Number of snapshot times; they are written to `times` when it is not
/// null and `capacity` suffices.
///
/// # Safety
/// `exp` must be a live handle, `times` null or valid for `capacity`
/// values, `count` writable.
#[no_mangle]
pub unsafe extern "C" fn qclab_experiment_times(
    exp: *const QclabExperiment,
    times: *mut f64,
    capacity: usize,
    count: *mut usize,
) -> QclabStatus {
    guard(|| {
        let exp = handle(exp, "exp")?;
        let ts = &exp.0.times;
        *out_ref(count, "count")? = ts.len();
        if !times.is_null() {
            if capacity < ts.len() {
                return Err((QclabStatus::OutOfRange, format!("capacity {capacity} < {}", ts.len())));
            }
            std::slice::from_raw_parts_mut(times, ts.len()).copy_from_slice(ts);
        }
        Ok(())
    })
}

/// A Gaussian-mixture trajectory.
pub struct QclabMixture {
    ens: MixtureEnsemble,
    exp: Experiment,
}

/// Starts the mixture from the experiment's initial state.
///
/// # Safety
/// `exp` must be a live handle and `out` writable. The mixture does not
/// borrow `exp`.
#[no_mangle]
pub unsafe extern "C" fn qclab_mixture_new(exp: *const QclabExperiment, out: *mut *mut QclabMixture) -> QclabStatus {
    guard(|| {
        let exp = handle(exp, "exp")?;
        let out = out_ref(out, "out")?;
        let ens = initial_mixture(&exp.0).st()?;
        *out = Box::into_raw(Box::new(QclabMixture { ens, exp: exp.0.clone() }));
        Ok(())
    })
}

/// # Safety
/// `mix` must come from this library and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn qclab_mixture_free(mix: *mut QclabMixture) {
    if !mix.is_null() {
        drop(Box::from_raw(mix));
    }
}

/// Advances by `span` (physical time) with the experiment's step size.
///
/// # Safety
/// `mix` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qclab_mixture_advance(mix: *mut QclabMixture, span: f64) -> QclabStatus {
    guard(|| {
        let m = mix.as_mut().ok_or_else(|| null("mix"))?;
        m.ens.advance(&m.exp.model, span, m.exp.dt, &m.exp.mixture).st()
    })
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QclabMixtureSummary {
    pub time: f64,
    pub particles: usize,
    pub total_weight: f64,
    pub max_squeeze: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub max_defect_after_projection: f64,
}

/// # Safety
/// `mix` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qclab_mixture_summary(mix: *const QclabMixture, out: *mut QclabMixtureSummary) -> QclabStatus {
    guard(|| {
        let m = handle(mix, "mix")?;
        let st = &m.ens.stats;
        *out_ref(out, "out")? = QclabMixtureSummary {
            time: m.ens.time,
            particles: m.ens.len(),
            total_weight: m.ens.total_weight(),
            max_squeeze: st.max_squeeze,
            min_eigenvalue: st.min_eigenvalue,
            max_eigenvalue: st.max_eigenvalue,
            max_defect_after_projection: st.max_defect_after,
        };
        Ok(())
    })
}

/// Particle `index`: weight, centroid (`2d` values, positions first) and
/// covariance (`2d x 2d`, row-major).
///
/// # Safety
/// `mix` must be a live handle; `alpha` and `cov` must hold `alpha_len`
/// and `cov_len` values.
#[no_mangle]
pub unsafe extern "C" fn qclab_mixture_particle(
    mix: *const QclabMixture,
    index: usize,
    weight: *mut f64,
    alpha: *mut f64,
    alpha_len: usize,
    cov: *mut f64,
    cov_len: usize,
) -> QclabStatus {
    guard(|| {
        let m = handle(mix, "mix")?;
        let p = m
            .ens
            .particles
            .get(index)
            .ok_or_else(|| (QclabStatus::OutOfRange, format!("particle {index} of {}", m.ens.len())))?;
        let n = p.state.mean.len();
        if alpha.is_null() || cov.is_null() {
            return Err(null("alpha or cov"));
        }
        if alpha_len < n || cov_len < n * n {
            return Err((QclabStatus::OutOfRange, format!("buffers need {n} and {} values", n * n)));
        }
        *out_ref(weight, "weight")? = p.weight;
        std::slice::from_raw_parts_mut(alpha, n).copy_from_slice(p.state.mean.as_slice());
        let c = std::slice::from_raw_parts_mut(cov, n * n);
        for i in 0..n {
            for j in 0..n {
                c[i * n + j] = p.state.cov[(i, j)];
            }
        }
        Ok(())
    })
}

/// Results of a full three-way comparison.
pub struct QclabComparison(ComparisonReport);

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QclabComparisonRow {
    pub time: f64,
    pub t_over_tau: f64,
    pub epsilon: f64,
    pub trace_distance: f64,
    pub l1_distance: f64,
    pub pass: bool,
    pub particles: usize,
    pub max_squeeze: f64,
}

/// Runs the quantum, classical and mixture dynamics (one-dimensional
/// models only).
///
/// # Safety
/// `exp` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qclab_run_comparison(exp: *const QclabExperiment, out: *mut *mut QclabComparison) -> QclabStatus {
    guard(|| {
        let exp = handle(exp, "exp")?;
        let out = out_ref(out, "out")?;
        *out = Box::into_raw(Box::new(QclabComparison(run_comparison(&exp.0).st()?)));
        Ok(())
    })
}

/// # Safety
/// `cmp` must come from this library and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn qclab_comparison_free(cmp: *mut QclabComparison) {
    if !cmp.is_null() {
        drop(Box::from_raw(cmp));
    }
}

/// Number of snapshots, and whether every one passed.
///
/// # Safety
/// `cmp` must be a live handle; `len` and `passed` writable.
#[no_mangle]
pub unsafe extern "C" fn qclab_comparison_info(
    cmp: *const QclabComparison,
    len: *mut usize,
    passed: *mut bool,
) -> QclabStatus {
    guard(|| {
        let c = handle(cmp, "cmp")?;
        *out_ref(len, "len")? = c.0.rows.len();
        *out_ref(passed, "passed")? = c.0.passed();
        Ok(())
    })
}

/// # Safety
/// `cmp` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qclab_comparison_row(
    cmp: *const QclabComparison,
    index: usize,
    out: *mut QclabComparisonRow,
) -> QclabStatus {
    guard(|| {
        let c = handle(cmp, "cmp")?;
        let r = c.0.rows.get(index).ok_or_else(|| (QclabStatus::OutOfRange, format!("row {index}")))?;
        *out_ref(out, "out")? = QclabComparisonRow {
            time: r.time,
            t_over_tau: r.t_over_tau,
            epsilon: r.epsilon,
            trace_distance: r.trace_distance,
            l1_distance: r.l1_distance,
            pass: r.pass,
            particles: r.particles,
            max_squeeze: r.max_squeeze,
        };
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qclab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

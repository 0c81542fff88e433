//! File formats. Every writer is deterministic: same inputs, same bytes.
//!
//! | file | layout |
//! |---|---|
//! | `scales.csv` | `tau_H,a_H,s_H,x_H,p_H,D0,z,epsilon(t)` |
//! | density snapshot | text header (`N`, `domain`, `hbar`, `t`, ...) ending in `end\n`, then `N*N` complex entries as little-endian `f64` pairs, row-major |
//! | phase CSV | `x,p,value` |
//! | Langevin ensemble | text header with `seed`, then `count * 2d` little-endian `f64` |
//! | mixture CSV | `weight,alpha_*,sigma_ij (upper triangle),squeeze` |
//! | harmonic-error CSV | `x,p,sigma_xx,sigma_xp,sigma_pp,hbar,bound_quantum,bound_classical,numeric_quantum,numeric_classical,ratio_quantum,ratio_classical` |
//! | comparison CSV | `time,t_over_tau,epsilon,trace_distance,l1_distance,pass,particles,max_squeeze` |
//! | negativity CSV | `run,time,t_over_tau,min_wigner,max_wigner,negativity,negative_volume` |

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::json;

use crate::classical::{LangevinEnsemble, PhaseField};
use crate::error::{Error, Result};
use crate::experiment::{covariance_entries, BreakdownReport, ComparisonReport, PhysicalExample};
use crate::harmonic_error::HarmonicErrorReport;
use crate::mixture::MixtureEnsemble;
use crate::quantum::{DensityMatrixGrid, PositionGrid};
use crate::scales::{theorem_epsilon, Bound, ScaleReport};

pub const SCALES_HEADER: &str = "tau_H,a_H,s_H,x_H,p_H,D0,z,epsilon(t)";
pub const PHASE_HEADER: &str = "x,p,value";
pub const HARMONIC_HEADER: &str = "x,p,sigma_xx,sigma_xp,sigma_pp,hbar,bound_quantum,bound_classical,numeric_quantum,numeric_classical,ratio_quantum,ratio_classical";
pub const COMPARISON_HEADER: &str = "time,t_over_tau,epsilon,trace_distance,l1_distance,pass,particles,max_squeeze";
pub const NEGATIVITY_HEADER: &str = "run,time,t_over_tau,min_wigner,max_wigner,negativity,negative_volume";

const DENSITY_MAGIC: &str = "qclab-density 1";
const LANGEVIN_MAGIC: &str = "qclab-langevin 1";

/// Shortest round-trip form, with an exponent outside `[1e-4, 1e15)`.
pub struct F(pub f64);

impl std::fmt::Display for F {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a = self.0.abs();
        if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
            write!(f, "{}", self.0)
        } else {
            write!(f, "{:e}", self.0)
        }
    }
}

fn bound(b: Bound) -> String {
    match b {
        Bound::Finite(v) => F(v).to_string(),
        Bound::Infinite => "inf".into(),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// One row; `epsilon(t)` is evaluated at `t` (physical units).
pub fn scales_csv(scales: &ScaleReport, t: f64) -> String {
    let eps = theorem_epsilon(scales, t, scales.dims).map(|e| F(e).to_string()).unwrap_or_else(|_| "inf".into());
    let z = match (scales.z, scales.z_cap) {
        (Bound::Infinite, Some(c)) => F(c).to_string(),
        (z, _) => bound(z),
    };
    format!(
        "{SCALES_HEADER}\n{},{},{},{},{},{},{},{}\n",
        F(scales.tau_h),
        F(scales.a_h),
        bound(scales.s_h),
        bound(scales.x_h),
        bound(scales.p_h),
        F(scales.d0),
        z,
        eps
    )
}

/// Human-readable fixed-field table.
pub fn scales_table(scales: &ScaleReport, times: &[f64]) -> String {
    let mut s = String::new();
    let rows: [(&str, String); 10] = [
        ("hbar", F(scales.hbar).to_string()),
        ("D_x", F(scales.diffusion.d_x).to_string()),
        ("D_p", F(scales.diffusion.d_p).to_string()),
        ("tau_H", F(scales.tau_h).to_string()),
        ("a_H", F(scales.a_h).to_string()),
        ("s_H", bound(scales.s_h)),
        ("x_H", bound(scales.x_h)),
        ("p_H", bound(scales.p_h)),
        ("D0", F(scales.d0).to_string()),
        ("z", bound(scales.z)),
    ];
    for (k, v) in rows {
        let _ = writeln!(s, "{k:<12}{v:>24}");
    }
    if let Some(c) = scales.z_cap {
        let _ = writeln!(s, "{:<12}{:>24}", "z_cap", F(c));
    }
    for &t in times {
        let e = theorem_epsilon(scales, t, scales.dims).map(|e| format!("{e:.6e}")).unwrap_or_else(|_| "inf".into());
        let _ = writeln!(s, "{:<12}{:>24}", format!("eps({:.3})", t / scales.tau_h), e);
    }
    s
}

pub fn write_scales_csv(path: &Path, scales: &ScaleReport, t: f64) -> Result<()> {
    write_file(path, scales_csv(scales, t).as_bytes())
}

pub fn density_bytes(rho: &DensityMatrixGrid) -> Vec<u8> {
    let n = rho.grid.n;
    let mut out = format!(
        "{DENSITY_MAGIC}\nN {n}\ndomain {} {}\nhbar {}\nt {}\nmass {}\nlayout f64le re,im row-major\nend\n",
        rho.grid.x_min, rho.grid.x_max, rho.hbar, rho.time, rho.mass
    )
    .into_bytes();
    out.reserve(16 * n * n);
    for j in 0..n {
        for k in 0..n {
            let c = rho.rho[(j, k)];
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }
    }
    out
}

pub fn write_density(path: &Path, rho: &DensityMatrixGrid) -> Result<()> {
    write_file(path, &density_bytes(rho))
}

/// Reads the text header up to `end`, as `key -> rest of line`.
fn read_header<R: BufRead>(r: &mut R, magic: &str) -> Result<Vec<(String, String)>> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != magic {
        return Err(Error::Config(format!("expected header {magic:?}, found {:?}", line.trim_end())));
    }
    let mut fields = Vec::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Config("header not terminated by `end`".into()));
        }
        let l = line.trim_end();
        if l == "end" {
            return Ok(fields);
        }
        let (k, v) = l.split_once(' ').unwrap_or((l, ""));
        fields.push((k.to_string(), v.to_string()));
    }
}

fn field<T: std::str::FromStr>(fields: &[(String, String)], key: &str) -> Result<T> {
    fields
        .iter()
        .find(|(k, _)| k == key)
        .and_then(|(_, v)| v.parse().ok())
        .ok_or_else(|| Error::Config(format!("header field `{key}` missing or malformed")))
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; 8 * count];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn read_density(path: &Path) -> Result<DensityMatrixGrid> {
    let mut r = BufReader::new(fs::File::open(path)?);
    let h = read_header(&mut r, DENSITY_MAGIC)?;
    let n: usize = field(&h, "N")?;
    let domain: String = field(&h, "domain")?;
    let mut d = domain.split_whitespace().map(str::parse::<f64>);
    let (lo, hi) = match (d.next(), d.next()) {
        (Some(Ok(a)), Some(Ok(b))) => (a, b),
        _ => return Err(Error::Config("header field `domain` malformed".into())),
    };
    let raw = read_f64s(&mut r, 2 * n * n)?;
    let rho = DMatrix::from_fn(n, n, |j, k| {
        let i = 2 * (j * n + k);
        Complex64::new(raw[i], raw[i + 1])
    });
    Ok(DensityMatrixGrid {
        grid: PositionGrid::new(n, lo, hi)?,
        rho,
        hbar: field(&h, "hbar")?,
        mass: field(&h, "mass")?,
        time: field(&h, "t")?,
    })
}

pub fn phase_csv(f: &PhaseField) -> String {
    let mut s = String::with_capacity(48 * f.values.len() + 16);
    s.push_str(PHASE_HEADER);
    s.push('\n');
    for i in 0..f.grid.nx {
        for k in 0..f.grid.np {
            let _ = writeln!(s, "{},{},{}", F(f.grid.x(i)), F(f.grid.p(k)), F(f.at(i, k)));
        }
    }
    s
}

pub fn write_phase_csv(path: &Path, f: &PhaseField) -> Result<()> {
    write_file(path, phase_csv(f).as_bytes())
}

pub fn langevin_bytes(ens: &LangevinEnsemble) -> Vec<u8> {
    let mut out = format!(
        "{LANGEVIN_MAGIC}\nseed {}\ndims {}\ncount {}\nstep {}\nt {}\nlayout f64le x..,p.. per sample\nend\n",
        ens.seed,
        ens.dims,
        ens.len(),
        ens.step,
        ens.time
    )
    .into_bytes();
    out.reserve(8 * ens.samples.len());
    for v in &ens.samples {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_langevin(path: &Path, ens: &LangevinEnsemble) -> Result<()> {
    write_file(path, &langevin_bytes(ens))
}

pub fn read_langevin(path: &Path) -> Result<LangevinEnsemble> {
    let mut r = BufReader::new(fs::File::open(path)?);
    let h = read_header(&mut r, LANGEVIN_MAGIC)?;
    let dims: usize = field(&h, "dims")?;
    let count: usize = field(&h, "count")?;
    Ok(LangevinEnsemble {
        dims,
        samples: read_f64s(&mut r, 2 * dims * count)?,
        seed: field(&h, "seed")?,
        step: field(&h, "step")?,
        time: field(&h, "t")?,
    })
}

pub fn mixture_header(dims: usize) -> String {
    let n = 2 * dims;
    let mut cols = vec!["weight".to_string()];
    cols.extend((0..dims).map(|i| format!("alpha_x{i}")));
    cols.extend((0..dims).map(|i| format!("alpha_p{i}")));
    for i in 0..n {
        for j in i..n {
            cols.push(format!("sigma_{i}{j}"));
        }
    }
    cols.push("squeeze".into());
    cols.join(",")
}

pub fn mixture_csv(ens: &MixtureEnsemble) -> String {
    let mut s = mixture_header(ens.scales.dims);
    s.push('\n');
    for p in &ens.particles {
        let mut row = vec![F(p.weight).to_string()];
        row.extend(p.state.mean.iter().map(|v| F(*v).to_string()));
        row.extend(covariance_entries(&p.state.cov).iter().map(|v| F(*v).to_string()));
        row.push(F(p.squeeze_ratio(&ens.scales)).to_string());
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn write_mixture_csv(path: &Path, ens: &MixtureEnsemble) -> Result<()> {
    write_file(path, mixture_csv(ens).as_bytes())
}

/// JSON summary of a mixture run.
pub fn mixture_summary(ens: &MixtureEnsemble) -> String {
    let st = &ens.stats;
    let v = json!({
        "time": ens.time,
        "particles": ens.len(),
        "total_weight": ens.total_weight(),
        "seed": ens.seed,
        "z": ens.z,
        "max_squeeze": st.max_squeeze,
        "min_whitened_eigenvalue": st.min_eigenvalue,
        "max_whitened_eigenvalue": st.max_eigenvalue,
        "symplectic_defect": {
            "max_before_projection": st.max_defect_before,
            "max_after_projection": st.max_defect_after,
            "projections": st.projections,
            "max_projection": st.max_projection,
        },
        "steps": st.steps,
        "splits": st.splits,
    });
    serde_json::to_string_pretty(&v).expect("plain values serialize") + "\n"
}

pub fn harmonic_csv(reports: &[HarmonicErrorReport]) -> String {
    let mut s = format!("{HARMONIC_HEADER}\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            F(r.alpha[0]),
            F(r.alpha[1]),
            F(r.sigma[(0, 0)]),
            F(r.sigma[(0, 1)]),
            F(r.sigma[(1, 1)]),
            F(r.hbar),
            F(r.bound_quantum),
            F(r.bound_classical),
            F(r.numeric_quantum),
            F(r.numeric_classical),
            F(r.ratio_quantum()),
            F(r.ratio_classical())
        );
    }
    s
}

pub fn comparison_csv(report: &ComparisonReport) -> String {
    let mut s = format!("{COMPARISON_HEADER}\n");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            F(r.time),
            F(r.t_over_tau),
            F(r.epsilon),
            F(r.trace_distance),
            F(r.l1_distance),
            r.pass as u8,
            r.particles,
            F(r.max_squeeze)
        );
    }
    s
}

/// Text summary of a comparison.
pub fn comparison_summary(report: &ComparisonReport) -> String {
    let st = &report.mixture_stats;
    let max_edge = report.quantum.iter().map(|d| d.edge_probability).fold(0.0, f64::max);
    let max_trace_err = report.quantum.iter().map(|d| d.trace_error).fold(0.0, f64::max);
    let max_leak = report.classical.iter().map(|d| d.leaked).fold(0.0, f64::max);
    let min_f = report.classical.iter().map(|d| d.min_value).fold(f64::INFINITY, f64::min);
    let v = json!({
        "passed": report.passed(),
        "seed": report.seed,
        "margin": report.margin,
        "abs_tolerance": report.abs_tolerance,
        "bound_applicable": report.bound_applicable,
        "hbar": report.hbar,
        "hbar_over_s_H": report.hbar_ratio,
        "D0": report.d0,
        "z": report.z,
        "tau_H": report.tau_h,
        "snapshots": report.rows.len(),
        "max_trace_distance": report.max_trace_distance(),
        "max_l1_distance": report.max_l1_distance(),
        "worst_ratio": report.worst_ratio(),
        "mixture": {
            "max_squeeze": st.max_squeeze,
            "max_defect_after_projection": st.max_defect_after,
            "splits": st.splits,
        },
        "quantum": { "max_edge_probability": max_edge, "max_trace_error": max_trace_err },
        "classical": { "max_leak": max_leak, "min_value": if min_f.is_finite() { min_f } else { 0.0 } },
    });
    serde_json::to_string_pretty(&v).expect("plain values serialize") + "\n"
}

pub fn negativity_csv(report: &BreakdownReport) -> String {
    let mut s = format!("{NEGATIVITY_HEADER}\n");
    for (name, run) in [("closed", &report.closed), ("diffusive", &report.diffusive)] {
        for r in &run.rows {
            let _ = writeln!(
                s,
                "{name},{},{},{},{},{},{}",
                F(r.time),
                F(r.t_over_tau),
                F(r.min_wigner),
                F(r.max_wigner),
                F(r.negativity),
                F(r.negative_volume)
            );
        }
    }
    s
}

pub fn breakdown_summary(report: &BreakdownReport) -> String {
    let sweep: Vec<_> =
        report.onset_sweep.iter().map(|(r, t)| json!({ "hbar_over_s_H": r, "onset_time": t })).collect();
    let v = json!({
        "hbar": report.hbar,
        "tau_H": report.tau_h,
        "lyapunov": report.lyapunov,
        "ehrenfest_time": report.ehrenfest_time,
        "closed_max_negativity": report.closed.max_negativity(),
        "diffusive_D0": report.diffusive.d0,
        "diffusive_max_negativity": report.diffusive.max_negativity(),
        "onset_sweep": sweep,
    });
    serde_json::to_string_pretty(&v).expect("plain values serialize") + "\n"
}

pub fn physical_summary(p: &PhysicalExample) -> String {
    serde_json::to_string_pretty(p).expect("plain values serialize") + "\n"
}

const COMPARE_PLOT: &str = r#"import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("comparison.csv")))
t = [float(r["t_over_tau"]) for r in rows]
fig, ax = plt.subplots()
ax.plot(t, [float(r["epsilon"]) for r in rows], "k-", label="epsilon(t)")
ax.plot(t, [float(r["trace_distance"]) for r in rows], "o-", label="trace distance")
ax.plot(t, [float(r["l1_distance"]) for r in rows], "s-", label="L1 distance")
ax.set_xlabel("t / tau_H")
ax.set_ylabel("distance")
ax.legend()
fig.savefig("comparison.png", dpi=150)
"#;

const NEGATIVITY_PLOT: &str = r#"import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("negativity.csv")))
fig, ax = plt.subplots()
for run in ("closed", "diffusive"):
    sel = [r for r in rows if r["run"] == run]
    ax.plot([float(r["t_over_tau"]) for r in sel], [float(r["negativity"]) for r in sel], label=run)
ax.axhline(0.1, color="k", ls=":")
ax.set_xlabel("t / tau_H")
ax.set_ylabel("-min W / max W")
ax.legend()
fig.savefig("negativity.png", dpi=150)
"#;

/// `comparison.csv`, `summary.json` and a plotting script in `dir`.
pub fn emit_plots(report: &ComparisonReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let files = [
        (dir.join("comparison.csv"), comparison_csv(report)),
        (dir.join("summary.json"), comparison_summary(report)),
        (dir.join("plot_comparison.py"), COMPARE_PLOT.to_string()),
    ];
    write_all(files)
}

pub fn emit_breakdown(report: &BreakdownReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let files = [
        (dir.join("negativity.csv"), negativity_csv(report)),
        (dir.join("summary.json"), breakdown_summary(report)),
        (dir.join("plot_negativity.py"), NEGATIVITY_PLOT.to_string()),
    ];
    write_all(files)
}

fn write_all<const N: usize>(files: [(PathBuf, String); N]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::with_capacity(N);
    for (path, body) in files {
        write_file(&path, body.as_bytes())?;
        out.push(path);
    }
    Ok(out)
}

/// Writes a text file, creating parent directories.
pub fn write_text(path: &Path, body: &str) -> Result<()> {
    write_file(path, body.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::PhaseGrid;
    use crate::experiment::ComparisonRow;
    use crate::mixture::MixtureStats;

    fn report(rows: Vec<ComparisonRow>) -> ComparisonReport {
        ComparisonReport {
            seed: 1,
            margin: 0.1,
            abs_tolerance: 1e-3,
            bound_applicable: true,
            hbar: 1.0,
            hbar_ratio: 0.0,
            d0: 0.0,
            z: 1.0,
            tau_h: 1.0,
            rows,
            mixture_stats: MixtureStats::default(),
            quantum: vec![],
            classical: vec![],
        }
    }

    fn row(t: f64) -> ComparisonRow {
        ComparisonRow {
            time: t,
            t_over_tau: t,
            epsilon: 0.1,
            trace_distance: 0.01,
            l1_distance: 0.02,
            pass: true,
            particles: 3,
            max_squeeze: 1.5,
        }
    }

    #[test]
    fn empty_series_is_header_only() {
        assert_eq!(comparison_csv(&report(vec![])), format!("{COMPARISON_HEADER}\n"));
    }

    #[test]
    fn one_snapshot_one_row() {
        let csv = comparison_csv(&report(vec![row(0.5)]));
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], "0.5,0.5,0.1,0.01,0.02,1,3,1.5");
    }

    #[test]
    fn emitted_files_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let r = report(vec![row(0.5), row(1.0)]);
        let a = emit_plots(&r, &dir.path().join("a")).unwrap();
        let b = emit_plots(&r, &dir.path().join("b")).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
    }

    #[test]
    fn density_round_trip() {
        let grid = PositionGrid::new(4, -1.0, 1.0).unwrap();
        let rho = DensityMatrixGrid {
            grid,
            rho: DMatrix::from_fn(4, 4, |j, k| Complex64::new(j as f64 * 0.1, k as f64 - 0.5)),
            hbar: 0.25,
            mass: 2.0,
            time: 1.5,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rho.bin");
        write_density(&path, &rho).unwrap();
        let back = read_density(&path).unwrap();
        assert_eq!(back.rho, rho.rho);
        assert_eq!((back.hbar, back.mass, back.time), (0.25, 2.0, 1.5));
        assert_eq!(back.grid, rho.grid);
    }

    #[test]
    fn langevin_round_trip() {
        let ens = LangevinEnsemble { dims: 1, samples: vec![0.5, -1.0, 2.0, 3.0], seed: 42, step: 7, time: 0.3 };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ens.bin");
        write_langevin(&path, &ens).unwrap();
        assert_eq!(read_langevin(&path).unwrap(), ens);
        let head = fs::read(&path).unwrap();
        assert!(String::from_utf8_lossy(&head[..60]).contains("seed 42"));
    }

    #[test]
    fn phase_csv_layout() {
        let g = PhaseGrid::new(2, 3, (0.0, 2.0), (0.0, 3.0)).unwrap();
        let f = PhaseField::from_fn(g, |x, p| x + 10.0 * p);
        let csv = phase_csv(&f);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], PHASE_HEADER);
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[1], "0.5,0.5,5.5");
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.0, 1.5, -5.9e-19, 1e20, 3.3e-5, 0.1 + 0.2] {
            assert_eq!(F(v).to_string().parse::<f64>().unwrap(), v);
        }
        assert_eq!(F(-5.9e-19).to_string(), "-5.9e-19");
    }

    #[test]
    fn mixture_header_columns() {
        assert_eq!(
            mixture_header(1),
            "weight,alpha_x0,alpha_p0,sigma_00,sigma_01,sigma_11,squeeze"
        );
        assert_eq!(mixture_header(2).split(',').count(), 1 + 4 + 10 + 1);
    }
}

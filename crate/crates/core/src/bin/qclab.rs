use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qclab::config::{Experiment, ExperimentConfig};
use qclab::experiment::{
    harmonic_error_sweep, physical_example_with, run_breakdown_demo, run_classical, run_comparison, run_langevin,
    run_mixture, run_quantum,
};
use qclab::io;
use qclab::quantum::{refine_density, wigner_transform_grid};
use qclab::Result;

#[derive(Parser)]
#[command(name = "qclab", version, about = "Quantum, classical and Gaussian-mixture dynamics side by side")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Relative slack on epsilon(t) for pass/fail.
    #[arg(long, value_name = "FRAC")]
    margin: Option<f64>,
    /// Add the effective position diffusion of a momentum-only environment.
    #[arg(long)]
    effective_diffusion: bool,
    /// Squeeze bound to use when D0 = 0 leaves z unbounded.
    #[arg(long, value_name = "X")]
    z_cap: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Scale constants and epsilon(t).
    Scales(Common),
    /// Lindblad evolution on the position grid.
    EvolveQuantum(Common),
    /// Grid Fokker-Planck evolution.
    EvolveClassical(Common),
    /// Langevin ensemble.
    EvolveLangevin(Common),
    /// Gaussian-mixture trajectory.
    EvolveMixture(Common),
    /// Harmonic-approximation error against its bounds at random states.
    HarmonicError {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        count: usize,
        /// Quadrature grid size.
        #[arg(long, default_value_t = 256)]
        n: usize,
    },
    /// Mixture against both references, with epsilon(t).
    Compare(Common),
    /// Wigner negativity with and without diffusion.
    BreakdownDemo(Common),
    /// Correspondence time of a dust grain in sunlight.
    PhysicalExample {
        #[arg(long, default_value_t = 1e-11)]
        mass: f64,
        #[arg(long, default_value_t = 1.0)]
        velocity: f64,
        #[arg(long, default_value_t = 1.0)]
        length: f64,
        /// Localization rate Lambda in m^-2 s^-1.
        #[arg(long, default_value_t = 1e25)]
        rate: f64,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

fn load(c: &Common) -> Result<(Experiment, PathBuf)> {
    let (mut cfg, src) = ExperimentConfig::load_raw(&c.config)?;
    if let Some(s) = c.seed {
        cfg.numerics.seed = s;
    }
    if let Some(m) = c.margin {
        cfg.numerics.margin = m;
    }
    if c.effective_diffusion {
        cfg.diffusion.effective_position_diffusion = true;
    }
    if c.z_cap.is_some() {
        cfg.numerics.z_cap = c.z_cap;
    }
    if let Some(o) = &c.out {
        cfg.output.dir = o.to_string_lossy().into_owned();
    }
    cfg.check(&src).map_err(|e| match e {
        qclab::Error::Config(m) => qclab::Error::Config(format!("{}: {m}", c.config.display())),
        other => other,
    })?;
    let exp = cfg.resolve()?;
    let dir = PathBuf::from(&exp.config.output.dir);
    io::write_text(&dir.join("config.toml"), &exp.config.to_toml_string()?)?;
    Ok((exp, dir))
}

fn snap(dir: &Path, stem: &str, k: usize, ext: &str) -> PathBuf {
    dir.join(format!("{stem}_{k:04}.{ext}"))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Scales(c) => {
            let (exp, dir) = load(&c)?;
            print!("{}", io::scales_table(&exp.scales, &exp.times));
            io::write_scales_csv(&dir.join("scales.csv"), &exp.scales, exp.t_final)?;
        }
        Command::EvolveQuantum(c) => {
            let (exp, dir) = load(&c)?;
            for (k, (rho, d)) in run_quantum(&exp)?.iter().enumerate() {
                io::write_density(&snap(&dir, "rho", k, "bin"), rho)?;
                let w = wigner_transform_grid(&refine_density(rho, 2)?);
                io::write_phase_csv(&snap(&dir, "wigner", k, "csv"), &w)?;
                println!(
                    "t/tau {:8.3}  trace err {:.2e}  hermiticity {:.2e}  edge {:.2e}  min W {:.3e}",
                    rho.time / exp.scales.tau_h,
                    d.trace_error,
                    d.hermiticity,
                    d.edge_probability,
                    w.min()
                );
            }
        }
        Command::EvolveClassical(c) => {
            let (exp, dir) = load(&c)?;
            for (k, (f, d)) in run_classical(&exp)?.iter().enumerate() {
                io::write_phase_csv(&snap(&dir, "phase", k, "csv"), f)?;
                println!(
                    "t/tau {:8.3}  mass {:.12}  min {:.2e}  leaked {:.2e}",
                    f.time / exp.scales.tau_h,
                    d.mass,
                    d.min_value,
                    d.leaked
                );
            }
        }
        Command::EvolveLangevin(c) => {
            let (exp, dir) = load(&c)?;
            for (k, e) in run_langevin(&exp)?.iter().enumerate() {
                io::write_langevin(&snap(&dir, "langevin", k, "bin"), e)?;
                let (m, cov) = (e.mean(), e.covariance());
                println!(
                    "t/tau {:8.3}  mean ({:.4}, {:.4})  var ({:.4e}, {:.4e})",
                    e.time / exp.scales.tau_h,
                    m[0],
                    m[m.len() / 2],
                    cov[(0, 0)],
                    cov[(m.len() / 2, m.len() / 2)]
                );
            }
        }
        Command::EvolveMixture(c) => {
            let (exp, dir) = load(&c)?;
            let snaps = run_mixture(&exp)?;
            for (k, ens) in snaps.iter().enumerate() {
                io::write_mixture_csv(&snap(&dir, "mixture", k, "csv"), ens)?;
                println!(
                    "t/tau {:8.3}  particles {:5}  max squeeze {:.4}",
                    ens.time / exp.scales.tau_h,
                    ens.len(),
                    ens.max_squeeze()
                );
            }
            if let Some(last) = snaps.last() {
                let s = io::mixture_summary(last);
                io::write_text(&dir.join("summary.json"), &s)?;
                print!("{s}");
            }
        }
        Command::HarmonicError { common, count, n } => {
            let (exp, dir) = load(&common)?;
            let reports = harmonic_error_sweep(&exp, count, n)?;
            io::write_text(&dir.join("harmonic_error.csv"), &io::harmonic_csv(&reports))?;
            let worst_q = reports.iter().map(|r| r.ratio_quantum()).fold(0.0, f64::max);
            let worst_c = reports.iter().map(|r| r.ratio_classical()).fold(0.0, f64::max);
            println!("{count} states  worst numeric/bound: quantum {worst_q:.4}  classical {worst_c:.4}");
        }
        Command::Compare(c) => {
            let (exp, dir) = load(&c)?;
            let report = run_comparison(&exp)?;
            for r in &report.rows {
                println!(
                    "t/tau {:8.3}  eps {:.4e}  trace {:.4e}  L1 {:.4e}  {}",
                    r.t_over_tau,
                    r.epsilon,
                    r.trace_distance,
                    r.l1_distance,
                    if r.pass { "pass" } else { "FAIL" }
                );
            }
            io::emit_plots(&report, &dir)?;
            print!("{}", io::comparison_summary(&report));
            return Ok(report.passed());
        }
        Command::BreakdownDemo(c) => {
            let (exp, dir) = load(&c)?;
            let report = run_breakdown_demo(&exp)?;
            io::emit_breakdown(&report, &dir)?;
            print!("{}", io::breakdown_summary(&report));
        }
        Command::PhysicalExample { mass, velocity, length, rate, out } => {
            let p = physical_example_with(mass, velocity, length, rate)?;
            let s = io::physical_summary(&p);
            if let Some(dir) = out {
                io::write_text(&dir.join("physical_example.json"), &s)?;
            }
            print!("{s}");
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

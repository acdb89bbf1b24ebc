//! Command-line front end: `simulate`, `sweep` and `oracle-compare`.
//!
//! Exit status: 0 success, 1 bad config or unmet precondition, 2 numerical
//! failure, 3 I/O failure, 4 oracle deviation above tolerance.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::parse_config;
use crate::kernels::{kernel_values, KernelError};
use crate::model::{from_cycles, to_cycles, ConfigError, Sample, SimConfig, Trajectory};
use crate::oracles::{brute_force_kernel, single_excitation_at, DiscretizedBath, KernelKind, OracleError, DEFAULT_MODES};
use crate::propagator::{propagate, PropagationError};

pub const CSV_HEADER: &str = "t,t_cycles,np,rho11,re_rho10,im_rho10,abs_rho10,gamma11,re_gamma10,im_gamma10,eta11";

/// Probe times of the sweep summary, in cycles.
pub const SWEEP_PROBES: [f64; 3] = [0.2, 0.5, 1.0];

/// Largest coupling accepted by the exact oracle comparison.
pub const ORACLE_MAX_ALPHA: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(name = "tclpulse", version, about = "TCL2 qubit decay under periodic pi pulses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Override the RK4 substep count of the config.
    #[arg(long, global = true)]
    pub substeps: Option<usize>,
    /// Override the relative quadrature tolerance of the config.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate one config and write its trajectory.
    Simulate {
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run one config per pulse interval (in cycles, or `none`).
    Sweep {
        config: PathBuf,
        /// Pulse intervals in cycles of 2pi/omega0, comma separated; `none` is always added
        #[arg(long, value_delimiter = ',', required = true)]
        dt: Vec<String>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Compare the TCL2 result against an independent oracle.
    OracleCompare {
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = OracleChoice::Exact)]
        oracle: OracleChoice,
        /// Bath modes of the exact oracle.
        #[arg(long, default_value_t = DEFAULT_MODES)]
        modes: usize,
        #[arg(long, default_value_t = 1e-3)]
        tol_rho11: f64,
        #[arg(long, default_value_t = 2e-3)]
        tol_rho10: f64,
        /// Relative tolerance of the kernel brute-force comparison.
        #[arg(long, default_value_t = 1e-6)]
        tol_kernel: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleChoice {
    /// Exact single-excitation dynamics of a discretized bath (kT = 0).
    Exact,
    /// Brute-force double integrals of the kernels.
    Kernels,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Deviation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Precondition(_) => 1,
            CliError::Oracle(OracleError::NonZeroTemperature(_) | OracleError::NotPure) => 1,
            CliError::Propagation(PropagationError::Config(_)) => 1,
            CliError::Propagation(_) | CliError::Kernel(_) | CliError::Oracle(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Deviation(_) => 4,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a config and applies the command-line overrides.
pub fn load_config(path: &Path, substeps: Option<usize>, tol: Option<f64>) -> Result<SimConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let config_err = |source| CliError::Config {
        path: path.to_path_buf(),
        source,
    };
    let mut c = parse_config(&text).map_err(config_err)?;
    if substeps.is_some() {
        c.numerics.substeps = substeps;
    }
    if let Some(t) = tol {
        c.numerics.rel_tol = t;
    }
    c.validate().map_err(config_err)?;
    Ok(c)
}

fn num(v: f64) -> String {
    format!("{v:.14e}")
}

/// One CSV row of a sample, in [`CSV_HEADER`] order.
pub fn csv_row(s: &Sample) -> String {
    let k = s.kernels.unwrap_or(crate::model::KernelValues::zero(s.t, s.pulse_count));
    [
        num(s.t),
        num(to_cycles(s.t)),
        s.pulse_count.to_string(),
        num(s.state.rho11),
        num(s.state.rho10.re),
        num(s.state.rho10.im),
        num(s.state.rho10.norm()),
        num(k.gamma11),
        num(k.gamma10.re),
        num(k.gamma10.im),
        num(k.eta11),
    ]
    .join(",")
}

fn write_lines<I: IntoIterator<Item = String>>(path: &Path, header: &str, rows: I) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{header}").map_err(io_err(path))?;
    for row in rows {
        writeln!(w, "{row}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    write_lines(path, CSV_HEADER, traj.samples.iter().map(csv_row))
}

/// `header=value` pairs of the final row, as printed after a run.
pub fn summary_line(s: &Sample) -> String {
    CSV_HEADER
        .split(',')
        .zip(csv_row(s).split(','))
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn run_simulate(config: &Path, output: &Path, substeps: Option<usize>, tol: Option<f64>) -> Result<String, CliError> {
    let c = load_config(config, substeps, tol)?;
    let traj = propagate(&c)?;
    write_trajectory_csv(output, &traj)?;
    let last = traj.last().expect("trajectory has the initial sample");
    let mut summary = format!("final {}", summary_line(last));
    let d = &traj.diagnostics;
    if d.positivity_violations > 0 {
        summary.push_str(&format!(
            "\nwarning: {} samples outside the physical region, first at t={}",
            d.positivity_violations,
            d.first_violation_t.unwrap_or(f64::NAN)
        ));
    }
    Ok(summary)
}

/// Parses a sweep interval given in cycles; `none`/`off` is the no-pulse run.
pub fn parse_dt(raw: &str) -> Result<Option<f64>, CliError> {
    let raw = raw.trim();
    if matches!(raw.to_ascii_lowercase().as_str(), "none" | "off") {
        return Ok(None);
    }
    match raw.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(Some(v)),
        _ => Err(CliError::Precondition(format!("--dt expects positive cycle counts or `none`, got `{raw}`"))),
    }
}

fn run_label(dt_cycles: Option<f64>) -> String {
    match dt_cycles {
        Some(v) => format!("dt_{v}"),
        None => "no_pulse".to_string(),
    }
}

pub fn run_sweep(config: &Path, dts: &[String], output_dir: &Path, substeps: Option<usize>, tol: Option<f64>) -> Result<String, CliError> {
    let base = load_config(config, substeps, tol)?;
    let mut intervals: Vec<Option<f64>> = dts.iter().map(|d| parse_dt(d)).collect::<Result<_, _>>()?;
    if !intervals.contains(&None) {
        intervals.push(None);
    }
    let configs: Vec<(Option<f64>, SimConfig)> = intervals
        .iter()
        .map(|&dt| {
            let c = base.clone().with_pulse_interval(dt.map(from_cycles));
            c.validate()
                .map(|_| (dt, c))
                .map_err(|source| CliError::Config {
                    path: config.to_path_buf(),
                    source,
                })
        })
        .collect::<Result<_, _>>()?;
    fs::create_dir_all(output_dir).map_err(io_err(output_dir))?;

    let runs: Vec<(Option<f64>, Trajectory)> = configs
        .par_iter()
        .map(|(dt, c)| {
            let traj = propagate(c)?;
            let path = output_dir.join(format!("{}.csv", run_label(*dt)));
            write_trajectory_csv(&path, &traj)?;
            Ok((*dt, traj))
        })
        .collect::<Result<_, CliError>>()?;

    let horizon = to_cycles(base.t_final);
    let mut probes: Vec<f64> = SWEEP_PROBES.iter().copied().filter(|&p| p < horizon).collect();
    probes.push(horizon);
    let mut rows = Vec::new();
    for (dt, traj) in &runs {
        for &p in &probes {
            let t = from_cycles(p).min(base.t_final);
            let s = traj.state_at(t).expect("probe inside the horizon");
            rows.push(format!(
                "{},{},{},{},{},{}",
                run_label(*dt),
                dt.map_or("none".to_string(), num),
                num(t),
                num(p),
                num(s.rho11),
                num(s.rho10.norm())
            ));
        }
    }
    let summary = output_dir.join("summary.csv");
    write_lines(&summary, "run,dt_cycles,t,t_cycles,rho11,abs_rho10", rows)?;
    Ok(format!("wrote {} runs and {}", runs.len(), summary.display()))
}

pub struct CompareSettings {
    pub oracle: OracleChoice,
    pub modes: usize,
    pub tol_rho11: f64,
    pub tol_rho10: f64,
    pub tol_kernel: f64,
}

pub fn run_oracle_compare(
    config: &Path,
    output: &Path,
    settings: &CompareSettings,
    substeps: Option<usize>,
    tol: Option<f64>,
) -> Result<String, CliError> {
    let c = load_config(config, substeps, tol)?;
    match settings.oracle {
        OracleChoice::Exact => compare_exact(&c, output, settings),
        OracleChoice::Kernels => compare_kernels(&c, output, settings),
    }
}

fn compare_exact(c: &SimConfig, output: &Path, settings: &CompareSettings) -> Result<String, CliError> {
    if c.kt != 0.0 {
        return Err(CliError::Precondition(format!(
            "the exact oracle needs kt = 0 (got {}); use --oracle kernels for finite temperature",
            c.kt
        )));
    }
    if c.alpha > ORACLE_MAX_ALPHA {
        return Err(CliError::Precondition(format!(
            "the exact oracle comparison needs alpha <= {ORACLE_MAX_ALPHA} (got {})",
            c.alpha
        )));
    }
    let traj = propagate(c)?;
    let bath = DiscretizedBath::for_oracle(c, settings.modes)?;
    let exact = single_excitation_at(c, &bath, &traj.times())?;
    let (mut d11, mut d10) = (0.0f64, 0.0f64);
    let rows: Vec<String> = traj
        .samples
        .iter()
        .zip(&exact.samples)
        .map(|(a, b)| {
            let e11 = a.state.rho11 - b.state.rho11;
            let e10 = a.state.rho10.norm() - b.state.rho10.norm();
            d11 = d11.max(e11.abs());
            d10 = d10.max(e10.abs());
            [
                num(a.t),
                num(to_cycles(a.t)),
                a.pulse_count.to_string(),
                num(a.state.rho11),
                num(b.state.rho11),
                num(a.state.rho10.norm()),
                num(b.state.rho10.norm()),
                num(e11),
                num(e10),
            ]
            .join(",")
        })
        .collect();
    write_lines(
        output,
        "t,t_cycles,np,rho11_tcl2,rho11_exact,abs_rho10_tcl2,abs_rho10_exact,d_rho11,d_abs_rho10",
        rows,
    )?;
    let report = format!("max |d rho11| = {d11:.3e} (tol {:e}), max |d |rho10|| = {d10:.3e} (tol {:e})", settings.tol_rho11, settings.tol_rho10);
    if d11 <= settings.tol_rho11 && d10 <= settings.tol_rho10 {
        Ok(report)
    } else {
        Err(CliError::Deviation(report))
    }
}

/// Number of kernel comparison times, spread evenly over (0, t_final].
pub const KERNEL_COMPARE_POINTS: usize = 8;

fn compare_kernels(c: &SimConfig, output: &Path, settings: &CompareSettings) -> Result<String, CliError> {
    let times: Vec<f64> = (1..=KERNEL_COMPARE_POINTS)
        .map(|i| c.t_final * i as f64 / KERNEL_COMPARE_POINTS as f64)
        .collect();
    let brute_tol = (settings.tol_kernel * 1e-2).max(1e-11);
    let rows: Vec<Vec<(String, f64)>> = times
        .par_iter()
        .map(|&t| -> Result<Vec<(String, f64)>, CliError> {
            let k = kernel_values(c, t)?;
            let mut out = Vec::new();
            let kinds = [
                (KernelKind::Gamma11, "gamma11", k.gamma11.into()),
                (KernelKind::Gamma10, "gamma10", k.gamma10),
                (KernelKind::Eta11, "eta11", k.eta11.into()),
            ];
            for (kind, name, analytic) in kinds {
                if kind == KernelKind::Eta11 && c.kt == 0.0 {
                    continue;
                }
                let brute = brute_force_kernel(c, t, kind, brute_tol)?;
                let dev = if analytic == brute { 0.0 } else { (analytic - brute).norm() / brute.norm() };
                let row = [
                    num(t),
                    num(to_cycles(t)),
                    name.to_string(),
                    num(analytic.re),
                    num(analytic.im),
                    num(brute.re),
                    num(brute.im),
                    num(dev),
                ]
                .join(",");
                out.push((row, dev));
            }
            Ok(out)
        })
        .collect::<Result<_, _>>()?;
    let flat: Vec<(String, f64)> = rows.into_iter().flatten().collect();
    let worst = flat.iter().map(|r| r.1).fold(0.0, f64::max);
    write_lines(
        output,
        "t,t_cycles,kernel,analytic_re,analytic_im,brute_re,brute_im,rel_dev",
        flat.into_iter().map(|r| r.0),
    )?;
    let report = format!("max relative kernel deviation = {worst:.3e} (tol {:e})", settings.tol_kernel);
    if worst <= settings.tol_kernel {
        Ok(report)
    } else {
        Err(CliError::Deviation(report))
    }
}

/// Parses arguments, runs the command, prints the outcome and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Simulate { config, output } => run_simulate(config, output, cli.substeps, cli.tol),
        Command::Sweep { config, dt, output } => run_sweep(config, dt, output, cli.substeps, cli.tol),
        Command::OracleCompare {
            config,
            output,
            oracle,
            modes,
            tol_rho11,
            tol_rho10,
            tol_kernel,
        } => {
            let settings = CompareSettings {
                oracle: *oracle,
                modes: *modes,
                tol_rho11: *tol_rho11,
                tol_rho10: *tol_rho10,
                tol_kernel: *tol_kernel,
            };
            run_oracle_compare(config, output, &settings, cli.substeps, cli.tol)
        }
    };
    match result {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

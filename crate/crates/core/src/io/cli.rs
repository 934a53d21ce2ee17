//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 simulation
//! failure, 3 invariant or energy-decay violation.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use super::config::{load_config, Resolved, RunConfig};
use super::csv::{profile_file_name, write_iv_curve, write_ledger, write_profile};
use super::svg::{emit_svg_plot, Axes, Series};
use crate::discretization::Mesh;
use crate::energy::EnergyLedger;
use crate::error::Error;
use crate::experiments::{compare_models, is_monotone, potential_sweep, variant_pair, SnapshotPair, SweepResult};
use crate::physics::{ModelSpec, Variant};
use crate::stepper::{Simulation, State};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SIMULATION: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "VDPCM_OUT_DIR";
const FALLBACK_OUT_DIR: &str = "vdpcm-out";

#[derive(Debug, Parser)]
#[command(name = "vdpcm", version, about = "Oxide-layer corrosion simulator with free-energy accounting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one model to `t_end`, exporting profiles and the energy ledger.
    Run(Common),
    /// Steady-state current over a range of applied potentials.
    Sweep(Common),
    /// Run both model variants side by side.
    Compare(Common),
    /// Integrate and fail with exit code 3 if the total free energy increases.
    CheckEnergy(Common),
    /// Parse and validate a configuration.
    ValidateConfig(Common),
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// TOML configuration; the shipped defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of cells.
    #[arg(long)]
    mesh: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-end", allow_negative_numbers = true)]
    t_end: Option<f64>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Accepted for compatibility; every run is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum VariantArg {
    Vdpcm,
    Legacy,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Vdpcm => Variant::Vdpcm,
            VariantArg::Legacy => Variant::Legacy,
        }
    }
}

/// A failed command: exit code plus message for standard error.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: e.to_string(),
        }
    }
}

/// Maps a library error to its exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::EnergyIncrease { .. } | Error::Invariant(_) => EXIT_VIOLATION,
        Error::Config(_) | Error::InvalidParameter { .. } | Error::InitialData { .. } => EXIT_USAGE,
        _ => EXIT_SIMULATION,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Run(c) => run(c),
        Command::Sweep(c) => sweep(c),
        Command::Compare(c) => compare(c),
        Command::CheckEnergy(c) => check_energy(c),
        Command::ValidateConfig(c) => validate_config(c),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

struct Prepared {
    config: RunConfig,
    resolved: Resolved,
    out: PathBuf,
}

fn prepare(c: &Common) -> Result<Prepared, Failure> {
    let mut config = match &c.config {
        Some(p) => load_config(p).map_err(Failure::usage)?,
        None => RunConfig::shipped(),
    };
    if let Some(n) = c.mesh {
        config.mesh.n_cells = n;
    }
    if let Some(dt) = c.dt {
        config.solver.dt = dt;
    }
    if let Some(t) = c.t_end {
        config.run.t_end = t;
    }
    if let Some(v) = c.variant {
        config.model.variant = v.into();
    }
    if c.jobs == Some(0) {
        return Err(Failure::usage("--jobs must be at least 1"));
    }
    let resolved = config.validate().map_err(Failure::usage)?;
    let out = c
        .out
        .clone()
        .or_else(|| config.output.dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR));
    Ok(Prepared { config, resolved, out })
}

fn create_dir(p: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(p).map_err(|e| Failure {
        code: EXIT_SIMULATION,
        message: format!("cannot create {}: {e}", p.display()),
    })
}

fn jobs(c: &Common) -> usize {
    c.jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn profile_series(state: &State) -> Vec<Series> {
    let x: Vec<f64> = (0..state.n_cells())
        .map(|k| (k as f64 + 0.5) / state.n_cells() as f64)
        .collect();
    vec![
        Series::from_xy("u1", &x, &state.u1),
        Series::from_xy("u2", &x, &state.u2),
        Series::from_xy("v0", &x, &state.v0),
    ]
}

fn plot_profile(dir: &Path, state: &State, title: &str) -> Result<(), Error> {
    let name = profile_file_name(state.time).replace(".csv", ".svg");
    emit_svg_plot(&profile_series(state), &Axes::new(title, "x", "value"), &dir.join(name))
}

fn plot_ledger(dir: &Path, ledger: &EnergyLedger) -> Result<(), Error> {
    if ledger.is_empty() {
        return Ok(());
    }
    let t = &ledger.times;
    let series = [
        Series::from_xy("psi_tot", t, &ledger.psi_tot),
        Series::from_xy("psi", t, &ledger.psi),
    ];
    emit_svg_plot(&series, &Axes::new("free energy", "t", "energy"), &dir.join("energy.svg"))
}

/// Integrates through the snapshot times to `t_end`, exporting a profile at
/// each of them. On failure the ledger so far is still written.
fn integrate(p: &Prepared, snapshot_times: &[f64]) -> Result<Simulation, (Error, EnergyLedger)> {
    let r = &p.resolved;
    let mut sim = Simulation::new(r.spec.clone(), r.mesh, p.config.solver.clone(), r.initial.clone())
        .map_err(|e| (e, EnergyLedger::default()))?;
    let export = |sim: &Simulation| write_profile(&p.out.join(profile_file_name(sim.state().time)), sim.state(), &r.spec, &r.mesh);
    export(&sim).map_err(|e| (e, sim.ledger().clone()))?;
    let mut stops: Vec<f64> = snapshot_times
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t < p.config.run.t_end)
        .collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    stops.push(p.config.run.t_end);
    for t in stops {
        sim.advance(t).map_err(|e| (e, sim.ledger().clone()))?;
        export(&sim).map_err(|e| (e, sim.ledger().clone()))?;
    }
    Ok(sim)
}

fn run(c: &Common) -> CmdResult {
    let p = prepare(c)?;
    create_dir(&p.out)?;
    let sim = match integrate(&p, &p.config.run.snapshot_times) {
        Ok(sim) => sim,
        Err((e, ledger)) => {
            let _ = write_ledger(&p.out.join("ledger.csv"), &ledger);
            return Err(e.into());
        }
    };
    write_ledger(&p.out.join("ledger.csv"), sim.ledger())?;
    plot_ledger(&p.out, sim.ledger())?;
    plot_profile(&p.out, sim.state(), &format!("profiles at t = {}", sim.state().time))?;
    eprintln!(
        "run: {} steps to t = {}, psi_tot {:.6e}",
        sim.steps(),
        sim.state().time,
        sim.ledger().last().map_or(f64::NAN, |e| e.psi_tot)
    );
    Ok(())
}

#[derive(Serialize)]
struct EnergyReport {
    steps: usize,
    t_end: f64,
    tolerance: f64,
    max_increase: f64,
    max_balance_residual: f64,
    identity_error: f64,
    nonincreasing: bool,
}

fn check_energy(c: &Common) -> CmdResult {
    let p = prepare(c)?;
    create_dir(&p.out)?;
    let sim = match integrate(&p, &[]) {
        Ok(sim) => sim,
        Err((e, ledger)) => {
            let _ = write_ledger(&p.out.join("ledger.csv"), &ledger);
            return Err(e.into());
        }
    };
    let ledger = sim.ledger();
    write_ledger(&p.out.join("ledger.csv"), ledger)?;
    plot_ledger(&p.out, ledger)?;
    let tolerance = p.config.solver.energy_tolerance();
    let report = EnergyReport {
        steps: sim.steps(),
        t_end: sim.state().time,
        tolerance,
        max_increase: ledger.max_increase(),
        max_balance_residual: ledger.max_balance_residual(),
        identity_error: ledger.identity_error(),
        nonincreasing: ledger.max_increase() <= tolerance,
    };
    write_json(&p.out.join("energy_report.json"), &report)?;
    eprintln!(
        "check-energy: {} steps, max increase {:.3e}, max balance residual {:.3e} (tolerance {:.1e})",
        report.steps, report.max_increase, report.max_balance_residual, tolerance
    );
    if !report.nonincreasing {
        return Err(Failure {
            code: EXIT_VIOLATION,
            message: format!("total free energy increased by {:.3e}", report.max_increase),
        });
    }
    Ok(())
}

fn plot_iv(path: &Path, curves: &[(&str, &SweepResult)], p: &Prepared) -> Result<(), Error> {
    let s = &p.config.sweep;
    let series: Vec<Series> = curves
        .iter()
        .map(|(label, r)| {
            let pts = r
                .plotted()
                .into_iter()
                .map(|(v, i)| (s.axis_scale * v + s.axis_offset, i))
                .collect();
            Series::new(*label, pts)
        })
        .collect();
    emit_svg_plot(&series, &Axes::new("steady total current", &s.axis_label, "current"), path)
}

fn report_sweep(label: &str, r: &SweepResult) {
    for pt in r.points.iter().filter(|pt| !pt.converged) {
        eprintln!(
            "{label}: V = {} did not reach a steady state{}",
            pt.v,
            pt.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()
        );
    }
}

fn sweep(c: &Common) -> CmdResult {
    let p = prepare(c)?;
    create_dir(&p.out)?;
    let r = &p.resolved;
    let cfg = p.config.sweep.solver(&p.config.solver);
    let result = potential_sweep(
        &p.config.sweep.grid(),
        &r.spec,
        &r.mesh,
        &cfg,
        &p.config.initial,
        p.config.sweep.t_max,
        jobs(c),
    )?;
    write_iv_curve(&p.out.join("iv_curve.csv"), &result)?;
    report_sweep(r.spec.variant.name(), &result);
    if result.plotted().is_empty() {
        return Err(Failure {
            code: EXIT_SIMULATION,
            message: "no sweep point reached a steady state".into(),
        });
    }
    plot_iv(&p.out.join("iv_curve.svg"), &[(r.spec.variant.name(), &result)], &p)?;
    eprintln!(
        "sweep: {}/{} points steady, monotone: {}",
        result.plotted().len(),
        result.points.len(),
        is_monotone(&result.currents())
    );
    Ok(())
}

/// Profiles are named by the requested time; the state may be an earlier
/// steady state standing in for it.
fn write_variant(dir: &Path, states: &[(f64, &State)], iv: &SweepResult, spec: &ModelSpec, mesh: &Mesh) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    write_iv_curve(&dir.join("iv_curve.csv"), iv)?;
    for (t, s) in states {
        write_profile(&dir.join(profile_file_name(*t)), s, spec, mesh)?;
    }
    Ok(())
}

fn compare(c: &Common) -> CmdResult {
    let p = prepare(c)?;
    create_dir(&p.out)?;
    let r = &p.resolved;
    let (vd, lg) = variant_pair(&r.spec);
    let cfg = p.config.sweep.solver(&p.config.solver);
    let times = &p.config.compare.snapshot_times;
    let cmp = compare_models(
        &vd,
        &lg,
        &r.mesh,
        &cfg,
        &p.config.initial,
        times,
        &p.config.sweep.grid(),
        p.config.sweep.t_max,
        jobs(c),
    )?;
    let pick = |f: fn(&SnapshotPair) -> Option<&State>| -> Vec<(f64, &State)> {
        cmp.snapshots.iter().filter_map(|s| f(s).map(|st| (s.t, st))).collect()
    };
    write_variant(&p.out.join("vdpcm"), &pick(|s| s.vdpcm.as_ref()), &cmp.iv_vdpcm, &vd, &r.mesh)?;
    write_variant(&p.out.join("legacy"), &pick(|s| s.legacy.as_ref()), &cmp.iv_legacy, &lg, &r.mesh)?;
    write_json(&p.out.join("comparison_report.json"), &cmp)?;
    report_sweep("vdpcm", &cmp.iv_vdpcm);
    report_sweep("legacy", &cmp.iv_legacy);
    if !cmp.iv_vdpcm.plotted().is_empty() && !cmp.iv_legacy.plotted().is_empty() {
        plot_iv(
            &p.out.join("iv_comparison.svg"),
            &[("vdpcm", &cmp.iv_vdpcm), ("legacy", &cmp.iv_legacy)],
            &p,
        )?;
    }
    for pair in &cmp.snapshots {
        let (Some(a), Some(b)) = (&pair.vdpcm, &pair.legacy) else { continue };
        let mut series = Vec::new();
        for (tag, s) in [("vdpcm", a), ("legacy", b)] {
            for mut one in profile_series(s) {
                one.label = format!("{} {tag}", one.label);
                series.push(one);
            }
        }
        let title = format!("profiles at t = {}", pair.t);
        let name = format!("profiles_{}.svg", pair.t);
        emit_svg_plot(&series, &Axes::new(&title, "x", "value"), &p.out.join(name))?;
    }
    eprintln!(
        "compare: max relative IV difference {:.3e}, monotone vdpcm {} legacy {}",
        cmp.iv_max_relative_difference, cmp.iv_monotone_vdpcm, cmp.iv_monotone_legacy
    );
    Ok(())
}

fn validate_config(c: &Common) -> CmdResult {
    let p = prepare(c)?;
    let r = &p.resolved;
    println!(
        "ok: {} model, {} cells, dt {}, t_end {}",
        r.spec.variant.name(),
        r.mesh.n_cells,
        p.config.solver.dt,
        p.config.run.t_end
    );
    Ok(())
}

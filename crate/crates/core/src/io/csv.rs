//! CSV export with round-trip exact floats and LF line endings.

use std::path::Path;

use crate::discretization::Mesh;
use crate::energy::EnergyLedger;
use crate::error::Result;
use crate::experiments::SweepResult;
use crate::physics::{ModelSpec, Species};
use crate::stepper::State;

pub const PROFILE_COLUMNS: [&str; 9] = ["x", "u1", "u2", "u0", "v0", "v1", "v2", "xi1", "xi2"];
pub const IV_COLUMNS: [&str; 4] = ["V", "current", "t_steady", "converged"];

/// 17 significant digits: enough to reproduce every `f64` bit for bit.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a header and rows. Every row must have as many fields as the header.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = ::csv::WriterBuilder::new()
        .terminator(::csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn float_rows<const N: usize>(rows: impl IntoIterator<Item = [f64; N]>) -> Vec<Vec<String>> {
    rows.into_iter()
        .map(|r| r.iter().map(|&x| format_float(x)).collect())
        .collect()
}

/// One row per cell: position, densities, potentials and electrochemical potentials.
pub fn write_profile(path: &Path, state: &State, spec: &ModelSpec, mesh: &Mesh) -> Result<()> {
    mesh.check_len(state.n_cells())?;
    let xi1 = state.xi(Species::Cation, spec);
    let xi2 = state.xi(Species::Electron, spec);
    let rows = (0..mesh.n_cells).map(|k| {
        [
            mesh.center(k),
            state.u1[k],
            state.u2[k],
            state.u0[k],
            state.v0[k],
            state.v1[k],
            state.v2[k],
            xi1[k],
            xi2[k],
        ]
    });
    write_csv(path, &PROFILE_COLUMNS, &float_rows(rows))
}

pub fn write_ledger(path: &Path, ledger: &EnergyLedger) -> Result<()> {
    write_csv(path, &EnergyLedger::COLUMNS, &float_rows(ledger.rows()))
}

/// `t_steady` is left empty for points that did not reach a steady state.
pub fn write_iv_curve(path: &Path, sweep: &SweepResult) -> Result<()> {
    let rows: Vec<Vec<String>> = sweep
        .points
        .iter()
        .map(|p| {
            vec![
                format_float(p.v),
                format_float(p.current),
                p.t_steady.map(format_float).unwrap_or_default(),
                p.converged.to_string(),
            ]
        })
        .collect();
    write_csv(path, &IV_COLUMNS, &rows)
}

/// File name for a profile at time `t`, e.g. `profiles_0.5.csv`.
pub fn profile_file_name(t: f64) -> String {
    format!("profiles_{t}.csv")
}

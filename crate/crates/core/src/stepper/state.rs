//! Simulation state and its construction from densities or equilibrium data.

use serde::{Deserialize, Serialize};

use crate::discretization::mesh::Mesh;
use crate::discretization::poisson::{
    poisson_diagonal, poisson_row, solve_poisson, solve_tridiagonal, traces_of,
};
use crate::error::{Error, Result};
use crate::physics::{
    charge_density, density, statistics_e_inv, statistics_e_prime, truncate, ModelSpec, Species,
    Variant,
};

/// Cell-centered densities and potentials at one time level.
///
/// `xi_interface[i][Γ]` is the electrochemical potential of species `i` at
/// interface `Γ`, the quantity the interface reaction laws act on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub time: f64,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub u0: Vec<f64>,
    pub v0: Vec<f64>,
    pub v0_trace: [f64; 2],
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub xi_interface: [[f64; 2]; 2],
}

impl State {
    /// Builds a state from potentials, with densities `ū e(T_M v)`.
    pub fn from_potentials(
        time: f64,
        v0: Vec<f64>,
        v: [Vec<f64>; 2],
        xi_interface: [[f64; 2]; 2],
        spec: &ModelSpec,
        mesh: &Mesh,
        truncation: Option<f64>,
    ) -> Result<State> {
        mesh.check_len(v0.len())?;
        let [v1, v2] = v;
        mesh.check_len(v1.len())?;
        mesh.check_len(v2.len())?;
        let occ = |s: Species, x: f64| {
            let x = truncation.map_or(x, |m| truncate(x, m));
            density(spec, s, x)
        };
        let u1: Vec<f64> = v1.iter().map(|&x| occ(Species::Cation, x)).collect();
        let u2: Vec<f64> = v2.iter().map(|&x| occ(Species::Electron, x)).collect();
        let u0 = u1
            .iter()
            .zip(&u2)
            .map(|(&a, &b)| charge_density(a, b, spec))
            .collect();
        let v0_trace = traces_of(&v0, spec, mesh);
        Ok(State {
            time,
            u1,
            u2,
            u0,
            v0,
            v0_trace,
            v1,
            v2,
            xi_interface,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.v0.len()
    }

    pub fn potential(&self, species: Species) -> &[f64] {
        match species {
            Species::Cation => &self.v1,
            Species::Electron => &self.v2,
        }
    }

    pub fn density(&self, species: Species) -> &[f64] {
        match species {
            Species::Cation => &self.u1,
            Species::Electron => &self.u2,
        }
    }

    /// Electrochemical potential `v_i + z_i v0` per cell.
    pub fn xi(&self, species: Species, spec: &ModelSpec) -> Vec<f64> {
        let z = spec.charge(species);
        self.potential(species)
            .iter()
            .zip(&self.v0)
            .map(|(v, p)| v + z * p)
            .collect()
    }

    /// Largest `|u0 - (z1 u1 + z2 u2 + ρ_hl)|` over cells.
    pub fn charge_identity_error(&self, spec: &ModelSpec) -> f64 {
        self.u0
            .iter()
            .zip(self.u1.iter().zip(&self.u2))
            .map(|(q, (&a, &b))| (q - charge_density(a, b, spec)).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|u - ū e(v)|/ū` over cells and species.
    pub fn statistics_error(&self, spec: &ModelSpec) -> f64 {
        let mut err: f64 = 0.0;
        for s in Species::ALL {
            let ubar = spec.ubar[s.index()];
            for (u, &v) in self.density(s).iter().zip(self.potential(s)) {
                err = err.max((u - density(spec, s, v)).abs() / ubar);
            }
        }
        err
    }

    /// Checks `0 < u1 < ū1`, `0 < u2`, finiteness, the charge identity and the
    /// statistics coupling.
    pub fn check_invariants(&self, spec: &ModelSpec) -> Result<()> {
        let t = self.time;
        for (k, &u) in self.u1.iter().enumerate() {
            if !(u > 0.0 && u < spec.ubar[0]) {
                return Err(Error::Invariant(format!(
                    "u1 = {u} in cell {k} at t = {t} leaves (0, {})",
                    spec.ubar[0]
                )));
            }
        }
        for (k, &u) in self.u2.iter().enumerate() {
            if !(u > 0.0 && u.is_finite()) {
                return Err(Error::Invariant(format!("u2 = {u} in cell {k} at t = {t} is not positive")));
            }
        }
        let all_finite = self
            .v0
            .iter()
            .chain(&self.v1)
            .chain(&self.v2)
            .chain(&self.v0_trace)
            .all(|x| x.is_finite());
        if !all_finite {
            return Err(Error::Invariant(format!("non-finite potential at t = {t}")));
        }
        let charge = self.charge_identity_error(spec);
        if charge > 1e-13 {
            return Err(Error::Invariant(format!("charge identity off by {charge:e} at t = {t}")));
        }
        Ok(())
    }
}

fn admissible(species: Species, cell: usize, u: f64, ubar: f64) -> Result<f64> {
    let ok = match species {
        Species::Cation => u > 0.0 && u < ubar,
        Species::Electron => u > 0.0 && u.is_finite(),
    };
    if !ok {
        let bounds = match species {
            Species::Cation => format!("0 < u1 < {ubar}"),
            Species::Electron => "0 < u2 < inf".to_string(),
        };
        return Err(Error::InitialData {
            species,
            cell,
            value: u,
            bounds,
        });
    }
    statistics_e_inv(species, u / ubar)
}

/// Consistent state at `t = 0` from admissible initial densities.
///
/// Interface potentials start from the adjacent cell value combined with the
/// interface value of `v0`.
pub fn initial_state(u1_in: &[f64], u2_in: &[f64], spec: &ModelSpec, mesh: &Mesh) -> Result<State> {
    mesh.check_len(u1_in.len())?;
    mesh.check_len(u2_in.len())?;
    let v1 = u1_in
        .iter()
        .enumerate()
        .map(|(k, &u)| admissible(Species::Cation, k, u, spec.ubar[0]))
        .collect::<Result<Vec<_>>>()?;
    let v2 = u2_in
        .iter()
        .enumerate()
        .map(|(k, &u)| admissible(Species::Electron, k, u, spec.ubar[1]))
        .collect::<Result<Vec<_>>>()?;
    let u1: Vec<f64> = v1.iter().map(|&v| density(spec, Species::Cation, v)).collect();
    let u2: Vec<f64> = v2.iter().map(|&v| density(spec, Species::Electron, v)).collect();
    let u0: Vec<f64> = u1
        .iter()
        .zip(&u2)
        .map(|(&a, &b)| charge_density(a, b, spec))
        .collect();
    let pot = solve_poisson(&u0, spec, mesh)?;
    let n = mesh.n_cells;
    let mut xi_interface = [[0.0; 2]; 2];
    for s in Species::ALL {
        let v = if s == Species::Cation { &v1 } else { &v2 };
        let z = spec.charge(s);
        xi_interface[s.index()] = [
            v[0] + z * pot.traces[0],
            v[n - 1] + z * pot.traces[1],
        ];
    }
    Ok(State {
        time: 0.0,
        u1,
        u2,
        u0,
        v0: pot.cells,
        v0_trace: pot.traces,
        v1,
        v2,
        xi_interface,
    })
}

/// Thermal equilibrium for compatible interface data (`ξ_i^0 = ξ_i^1`).
///
/// Each electrochemical potential is the constant `ξ_i^Γ`; `v0` solves the
/// resulting nonlinear Poisson-Boltzmann problem by Newton's method.
pub fn equilibrium_state(spec: &ModelSpec, mesh: &Mesh) -> Result<State> {
    if spec.variant != Variant::Vdpcm {
        return Err(Error::VariantMisuse("equilibrium_state", "vdpcm"));
    }
    let xi = [spec.xi_ext[0][0], spec.xi_ext[1][0]];
    for s in 0..2 {
        let gap = (spec.xi_ext[s][0] - spec.xi_ext[s][1]).abs();
        if gap > 1e-12 * (1.0 + xi[s].abs()) {
            return Err(Error::param(
                "xi_ext",
                format!(
                    "equilibrium needs equal outer potentials at both interfaces, species {} differs by {gap:e}",
                    s + 1
                ),
            ));
        }
    }
    let n = mesh.n_cells;
    let h = mesh.h;
    let g = spec.lambda2 / h;
    let net_charge = |v0: f64| -> (f64, f64) {
        let mut q = spec.rho_hl;
        let mut dq = 0.0;
        for s in Species::ALL {
            let z = spec.charge(s);
            let v = xi[s.index()] - z * v0;
            q += z * density(spec, s, v);
            dq -= z * z * spec.ubar[s.index()] * statistics_e_prime(s, v);
        }
        (q, dq)
    };
    let residual = |v0: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|k| poisson_row(k, v0, net_charge(v0[k]).0, spec, mesh))
            .collect()
    };
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut v0 = vec![0.0; n];
    let mut r = residual(&v0);
    let mut iterations = 0;
    while norm(&r) > 1e-14 {
        iterations += 1;
        if iterations > 100 {
            return Err(Error::NewtonFailed {
                iterations,
                residual: norm(&r),
            });
        }
        let diag: Vec<f64> = (0..n)
            .map(|k| poisson_diagonal(k, spec, mesh) - h * net_charge(v0[k]).1)
            .collect();
        let off = vec![-g; n - 1];
        let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        let dx = solve_tridiagonal(&off, &diag, &off, &rhs)?;
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = v0.iter().zip(&dx).map(|(a, d)| a + lambda * d).collect();
            let rt = residual(&trial);
            if norm(&rt) < norm(&r) || lambda < 1e-6 {
                v0 = trial;
                r = rt;
                break;
            }
            lambda *= 0.5;
        }
        if lambda < 1e-6 && iterations > 50 {
            break;
        }
    }
    let v = [
        v0.iter().map(|&p| xi[0] - spec.charge(Species::Cation) * p).collect(),
        v0.iter().map(|&p| xi[1] - spec.charge(Species::Electron) * p).collect(),
    ];
    State::from_potentials(0.0, v0, v, [[xi[0]; 2], [xi[1]; 2]], spec, mesh, None)
}

//! Free energies, dissipation and the energy ledger.
//!
//! The discrete Landau energy of the potentials and the discrete Helmholtz
//! energy of the densities are exact convex conjugates of each other, so their
//! duality gap vanishes at every state produced by the stepper.

use serde::{Deserialize, Serialize};

use crate::discretization::mesh::Mesh;
use crate::discretization::poisson::{half_cell_conductance, solve_poisson, traces_of};
use crate::error::Result;
use crate::physics::{charge_density, softplus, Interface, ModelSpec, Scalar, Species};
use crate::stepper::residual::{Layout, StepContext, StepFluxes};
use crate::stepper::{SolverConfig, State};

/// Primitive `φ_i` of the statistics function with `φ_i(0) = 0`.
pub fn phi_species<D: Scalar>(species: Species, v: D) -> D {
    match species {
        Species::Cation => softplus(v) - std::f64::consts::LN_2,
        Species::Electron => v.exp_m1(),
    }
}

/// Entropy density `ψ_i` of a normalized density; `+∞` outside the domain.
pub fn psi_species(species: Species, w: f64) -> f64 {
    let xlogx = |x: f64| if x == 0.0 { 0.0 } else { x * x.ln() };
    match species {
        Species::Cation if (0.0..=1.0).contains(&w) => {
            xlogx(w) + xlogx(1.0 - w) + std::f64::consts::LN_2
        }
        Species::Electron if w >= 0.0 && w.is_finite() => xlogx(w) - w + 1.0,
        _ => f64::INFINITY,
    }
}

/// Landau energy of the electrostatic potential alone:
/// `Σ λ²/2 |Δv0|²/h + Σ_Γ (λ²/h |v0_cell - v0(Γ)|² + β/2 v0(Γ)² - f v0(Γ))`.
pub fn electrostatic_landau(v0: &[f64], spec: &ModelSpec, mesh: &Mesh) -> f64 {
    let traces = traces_of(v0, spec, mesh);
    let n = v0.len();
    let g = spec.lambda2 / mesh.h;
    let c = half_cell_conductance(spec, mesh);
    let mut e = 0.0;
    for k in 0..n - 1 {
        e += 0.5 * g * (v0[k + 1] - v0[k]).powi(2);
    }
    for (gamma, cell) in [(0, 0), (1, n - 1)] {
        let b = traces[gamma];
        e += 0.5 * c * (v0[cell] - b).powi(2) + 0.5 * spec.beta[gamma] * b * b - spec.f[gamma] * b;
    }
    e
}

/// Landau free energy `Φ(v)` of a state's potentials.
pub fn landau_energy(state: &State, spec: &ModelSpec, mesh: &Mesh) -> f64 {
    let mut e = electrostatic_landau(&state.v0, spec, mesh);
    for s in Species::ALL {
        let ubar = spec.ubar[s.index()];
        e += state
            .potential(s)
            .iter()
            .map(|&v| mesh.h * ubar * phi_species(s, v))
            .sum::<f64>();
    }
    e
}

/// Electrostatic part of the Helmholtz energy:
/// the gradient terms of `v0*(u0)` plus `Σ_Γ β/2 v0*(Γ)²`.
pub fn electrostatic_helmholtz(u0: &[f64], spec: &ModelSpec, mesh: &Mesh) -> Result<f64> {
    let sol = solve_poisson(u0, spec, mesh)?;
    let v = &sol.cells;
    let n = v.len();
    let g = spec.lambda2 / mesh.h;
    let c = half_cell_conductance(spec, mesh);
    let mut e = 0.0;
    for k in 0..n - 1 {
        e += 0.5 * g * (v[k + 1] - v[k]).powi(2);
    }
    for (gamma, cell) in [(0, 0), (1, n - 1)] {
        let b = sol.traces[gamma];
        e += 0.5 * c * (v[cell] - b).powi(2) + 0.5 * spec.beta[gamma] * b * b;
    }
    Ok(e)
}

/// Helmholtz free energy `Ψ(u)`; infinite when a density leaves its domain.
pub fn helmholtz_energy(u1: &[f64], u2: &[f64], spec: &ModelSpec, mesh: &Mesh) -> Result<f64> {
    mesh.check_len(u1.len())?;
    mesh.check_len(u2.len())?;
    let u0: Vec<f64> = u1
        .iter()
        .zip(u2)
        .map(|(&a, &b)| charge_density(a, b, spec))
        .collect();
    let mut e = electrostatic_helmholtz(&u0, spec, mesh)?;
    for (s, u) in [(Species::Cation, u1), (Species::Electron, u2)] {
        let ubar = spec.ubar[s.index()];
        e += u.iter().map(|&x| mesh.h * ubar * psi_species(s, x / ubar)).sum::<f64>();
    }
    Ok(e)
}

/// `Φ(v) + Ψ(u) - Σ_K h (u0 v0 + u1 v1 + u2 v2)`; zero iff `u = E v`.
pub fn duality_gap(state: &State, spec: &ModelSpec, mesh: &Mesh) -> Result<f64> {
    let phi = landau_energy(state, spec, mesh);
    let psi = helmholtz_energy(&state.u1, &state.u2, spec, mesh)?;
    let pairing: f64 = (0..state.n_cells())
        .map(|k| {
            mesh.h
                * (state.u0[k] * state.v0[k] + state.u1[k] * state.v1[k] + state.u2[k] * state.v2[k])
        })
        .sum();
    Ok(phi + psi - pairing)
}

/// Energy bookkeeping of one step, derived from the fluxes the stepper used.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepEnergy {
    pub diss_bulk: f64,
    pub diss_boundary: f64,
    /// Energy carried through each interface, `dt Σ_i J_i·ν ξ_i^Γ`.
    pub psi_gamma: [f64; 2],
}

impl StepEnergy {
    pub fn from_fluxes(fluxes: &StepFluxes, dt: f64, spec: &ModelSpec) -> Self {
        let mut out = StepEnergy::default();
        for s in Species::ALL {
            let i = s.index();
            let pts = &fluxes.xi_points[i];
            for (e, f) in fluxes.edge[i].iter().enumerate() {
                out.diss_bulk += dt * f * (pts[e] - pts[e + 1]);
            }
            let ends = [pts[0], pts[pts.len() - 1]];
            for g in Interface::ALL {
                let j = g.index();
                let flux = fluxes.interface[i][j];
                let outer = spec.xi_ext[i][j];
                out.diss_boundary += dt * flux * (ends[j] - outer);
                out.psi_gamma[j] += dt * flux * outer;
            }
        }
        out
    }
}

fn replay(
    prev: &State,
    new: &State,
    dt: f64,
    spec: &ModelSpec,
    mesh: &Mesh,
    cfg: &SolverConfig,
) -> StepEnergy {
    let ctx = StepContext::new(prev, spec, mesh, cfg, dt);
    let x = Layout { n: mesh.n_cells }.pack(new);
    StepEnergy::from_fluxes(&ctx.fluxes(&x), dt, spec)
}

/// Energy `(ΔΨ^0, ΔΨ^1)` exchanged through the interfaces over a step, with the
/// same frozen prefactors and rate functions as the stepper.
pub fn boundary_energy_increment(
    prev: &State,
    new: &State,
    dt: f64,
    spec: &ModelSpec,
    mesh: &Mesh,
    cfg: &SolverConfig,
) -> [f64; 2] {
    replay(prev, new, dt, spec, mesh, cfg).psi_gamma
}

/// Bulk and interface dissipation `(dt Σ F·Δξ, dt Σ J·ν (ξ - ξ^Γ))` over a step.
pub fn dissipation_rates(
    prev: &State,
    new: &State,
    dt: f64,
    spec: &ModelSpec,
    mesh: &Mesh,
    cfg: &SolverConfig,
) -> (f64, f64) {
    let e = replay(prev, new, dt, spec, mesh, cfg);
    (e.diss_bulk, e.diss_boundary)
}

/// Time series of energies and per-step dissipation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub times: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub psi_gamma0: Vec<f64>,
    pub psi_gamma1: Vec<f64>,
    pub psi_tot: Vec<f64>,
    pub diss_bulk: Vec<f64>,
    pub diss_boundary: Vec<f64>,
}

/// One ledger row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub t: f64,
    pub phi: f64,
    pub psi: f64,
    pub psi_g0: f64,
    pub psi_g1: f64,
    pub psi_tot: f64,
    pub diss_bulk: f64,
    pub diss_boundary: f64,
}

impl EnergyLedger {
    pub const COLUMNS: [&'static str; 8] = [
        "t",
        "phi",
        "psi",
        "psi_g0",
        "psi_g1",
        "psi_tot",
        "diss_bulk",
        "diss_boundary",
    ];

    /// Ledger holding the energies of an initial state.
    pub fn start(state: &State, spec: &ModelSpec, mesh: &Mesh) -> Result<Self> {
        let mut l = EnergyLedger::default();
        let psi = helmholtz_energy(&state.u1, &state.u2, spec, mesh)?;
        l.push(LedgerEntry {
            t: state.time,
            phi: landau_energy(state, spec, mesh),
            psi,
            psi_g0: 0.0,
            psi_g1: 0.0,
            psi_tot: psi,
            diss_bulk: 0.0,
            diss_boundary: 0.0,
        });
        Ok(l)
    }

    pub fn push(&mut self, e: LedgerEntry) {
        self.times.push(e.t);
        self.phi.push(e.phi);
        self.psi.push(e.psi);
        self.psi_gamma0.push(e.psi_g0);
        self.psi_gamma1.push(e.psi_g1);
        self.psi_tot.push(e.psi_tot);
        self.diss_bulk.push(e.diss_bulk);
        self.diss_boundary.push(e.diss_boundary);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn entry(&self, k: usize) -> LedgerEntry {
        LedgerEntry {
            t: self.times[k],
            phi: self.phi[k],
            psi: self.psi[k],
            psi_g0: self.psi_gamma0[k],
            psi_g1: self.psi_gamma1[k],
            psi_tot: self.psi_tot[k],
            diss_bulk: self.diss_bulk[k],
            diss_boundary: self.diss_boundary[k],
        }
    }

    pub fn last(&self) -> Option<LedgerEntry> {
        (!self.is_empty()).then(|| self.entry(self.len() - 1))
    }

    pub fn rows(&self) -> Vec<[f64; 8]> {
        (0..self.len())
            .map(|k| {
                let e = self.entry(k);
                [e.t, e.phi, e.psi, e.psi_g0, e.psi_g1, e.psi_tot, e.diss_bulk, e.diss_boundary]
            })
            .collect()
    }

    /// Largest step-to-step increase of `Ψ^tot` (negative if it always decreased).
    pub fn max_increase(&self) -> f64 {
        self.psi_tot
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `|ΔΨ^tot + diss_bulk + diss_boundary|` over steps.
    pub fn max_balance_residual(&self) -> f64 {
        (1..self.len())
            .map(|k| {
                (self.psi_tot[k] - self.psi_tot[k - 1] + self.diss_bulk[k] + self.diss_boundary[k]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Checks `psi_tot = psi + psi_g0 + psi_g1` row by row.
    pub fn identity_error(&self) -> f64 {
        (0..self.len())
            .map(|k| (self.psi_tot[k] - self.psi[k] - self.psi_gamma0[k] - self.psi_gamma1[k]).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{statistics_e, statistics_e_inv, ModelParams, RawKinetics};
    use crate::stepper::initial_state;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec() -> ModelSpec {
        ModelSpec::new(&ModelParams::default(), &RawKinetics::uniform(1.0)).unwrap()
    }

    fn zero_data_spec() -> ModelSpec {
        let mut s = spec();
        s.f = [0.0, 0.0];
        s
    }

    fn brute_force_conjugate(s: Species, w: f64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut v = -20.0;
        while v <= 20.0 {
            best = best.max(w * v - phi_species(s, v));
            v += 1e-4;
        }
        best
    }

    #[test]
    fn density_values() {
        assert_eq!(phi_species(Species::Cation, 0.0), 0.0);
        assert_eq!(phi_species(Species::Electron, 0.0), 0.0);
        assert!(psi_species(Species::Cation, 0.5).abs() < 1e-16);
        assert_eq!(psi_species(Species::Electron, 1.0), 0.0);
        assert_eq!(psi_species(Species::Electron, 0.0), 1.0);
        assert_relative_eq!(psi_species(Species::Cation, 0.0), std::f64::consts::LN_2);
        assert_eq!(psi_species(Species::Cation, 1.2), f64::INFINITY);
        assert_eq!(psi_species(Species::Electron, -0.1), f64::INFINITY);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for s in Species::ALL {
            for v in [-1.0, 0.0, 2.0] {
                let fd = (phi_species(s, v + h) - phi_species(s, v - h)) / (2.0 * h);
                assert_relative_eq!(fd, statistics_e(s, v), max_relative = 1e-8);
            }
        }
        for (s, w) in [(Species::Cation, 0.3), (Species::Cation, 0.8), (Species::Electron, 2.5)] {
            let fd = (psi_species(s, w + h) - psi_species(s, w - h)) / (2.0 * h);
            assert_relative_eq!(fd, statistics_e_inv(s, w).unwrap(), max_relative = 1e-6);
        }
    }

    #[test]
    fn legendre_transform_by_brute_force() {
        for w in [0.3, 1.0, 2.5] {
            let e = (psi_species(Species::Electron, w) - brute_force_conjugate(Species::Electron, w)).abs();
            assert!(e < 1e-6, "{w}: {e}");
        }
        for w in [0.1, 0.5, 0.93] {
            let e = (psi_species(Species::Cation, w) - brute_force_conjugate(Species::Cation, w)).abs();
            assert!(e < 1e-6, "{w}: {e}");
        }
    }

    #[test]
    fn landau_examples() {
        let s = zero_data_spec();
        let m = Mesh::new(8).unwrap();
        let st = initial_state(&[2.0; 8], &[1.0; 8], &s, &m).unwrap();
        assert!(landau_energy(&st, &s, &m).abs() < 1e-15);
        // constant v0 = c whose trace is c itself
        let mut s2 = spec();
        let c = 0.7;
        s2.f = [s2.beta[0] * c, s2.beta[1] * c];
        let e = electrostatic_landau(&[c; 8], &s2, &m);
        let closed: f64 = (0..2).map(|g| 0.5 * s2.beta[g] * c * c - s2.f[g] * c).sum();
        assert!((e - closed).abs() < 1e-15);
        // for other data the trace adjusts and can only lower the energy
        s2.f = [0.02, -0.05];
        let e = electrostatic_landau(&[c; 8], &s2, &m);
        let naive: f64 = (0..2).map(|g| 0.5 * s2.beta[g] * c * c - s2.f[g] * c).sum();
        assert!(e <= naive + 1e-15);
    }

    fn smooth_landau(n: usize) -> f64 {
        // boundary data compatible with v0 = sin(2x)
        let mut s = spec();
        s.f = [-2.0 * s.lambda2, 2.0 * s.lambda2 * 2f64.cos() + s.beta[1] * 2f64.sin()];
        let m = Mesh::new(n).unwrap();
        let v0 = m.sample(|x| (2.0 * x).sin());
        let v = [m.sample(|x| 0.3 * x), m.sample(|x| (x - 0.5).powi(2))];
        let st = State::from_potentials(0.0, v0, v, [[0.0; 2]; 2], &s, &m, None).unwrap();
        landau_energy(&st, &s, &m)
    }

    #[test]
    fn landau_quadrature_converges() {
        let reference = smooth_landau(4096);
        let e: Vec<f64> = [16, 32, 64].iter().map(|&n| (smooth_landau(n) - reference).abs()).collect();
        for w in e.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.0, "{e:?}");
        }
    }

    #[test]
    fn helmholtz_examples() {
        let s = zero_data_spec();
        let m = Mesh::new(8).unwrap();
        assert!(helmholtz_energy(&[2.0; 8], &[1.0; 8], &s, &m).unwrap().abs() < 1e-15);
        let e = helmholtz_energy(&[5.0 / 3.0; 8], &[0.0; 8], &s, &m).unwrap();
        assert!(e.is_finite() && e > 0.0);
        assert!(helmholtz_energy(&[5.0; 8], &[1.0; 8], &s, &m).unwrap().is_infinite());
    }

    #[test]
    fn electrostatic_part_is_the_conjugate() {
        let s = spec();
        let m = Mesh::new(12).unwrap();
        let u0 = m.sample(|x| (4.0 * x).cos() - 0.3);
        let sol = solve_poisson(&u0, &s, &m).unwrap();
        let pairing: f64 = u0.iter().zip(&sol.cells).map(|(q, v)| m.h * q * v).sum();
        let conj = pairing - electrostatic_landau(&sol.cells, &s, &m);
        assert_relative_eq!(conj, electrostatic_helmholtz(&u0, &s, &m).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn duality_gap_vanishes_on_consistent_states() {
        let s = spec();
        let m = Mesh::new(20).unwrap();
        let u1 = m.sample(|x| 2.0 + (3.0 * x).sin());
        let u2 = m.sample(|x| 0.5 + x);
        let st = initial_state(&u1, &u2, &s, &m).unwrap();
        assert!(duality_gap(&st, &s, &m).unwrap().abs() < 1e-12);
    }

    #[test]
    fn ledger_bookkeeping() {
        let mut l = EnergyLedger::default();
        for k in 0..3 {
            let psi = 1.0 - k as f64 * 0.1;
            l.push(LedgerEntry {
                t: k as f64,
                phi: 0.0,
                psi,
                psi_g0: 0.01 * k as f64,
                psi_g1: 0.0,
                psi_tot: psi + 0.01 * k as f64,
                diss_bulk: if k > 0 { 0.09 } else { 0.0 },
                diss_boundary: 0.0,
            });
        }
        assert!(l.max_increase() < 0.0);
        assert!(l.max_balance_residual() < 1e-15);
        assert!(l.identity_error() < 1e-16);
        assert_eq!(l.rows().len(), 3);
    }

    proptest! {
        #[test]
        fn helmholtz_is_nonnegative(a in 0.05f64..3.95, b in 0.01f64..5.0, c in -1.0f64..1.0) {
            let s = spec();
            let m = Mesh::new(6).unwrap();
            let u1 = m.sample(|x| (a + c * (x - 0.5)).clamp(0.01, 3.99));
            let u2 = m.sample(|x| b * (1.0 + 0.5 * c * x));
            prop_assert!(helmholtz_energy(&u1, &u2, &s, &m).unwrap() >= 0.0);
        }
    }
}

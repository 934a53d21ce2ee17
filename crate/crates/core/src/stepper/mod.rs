//! Implicit time integration with frozen mobilities and interface prefactors.

pub mod banded;
pub mod newton;
pub mod residual;
pub mod state;

use serde::{Deserialize, Serialize};

use crate::discretization::flux::{FluxScheme, FluxSchemes};
use crate::discretization::mesh::Mesh;
use crate::discretization::poisson::h1_norm;
use crate::energy::{helmholtz_energy, landau_energy, EnergyLedger, LedgerEntry, StepEnergy};
use crate::error::{Error, Result};
use crate::experiments::total_current;
use crate::physics::{ModelSpec, Variant};

pub use newton::NewtonReport;
pub use residual::{Layout, StepContext, StepFluxes};
pub use state::{equilibrium_state, initial_state, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeScheme {
    /// Backward Euler: fluxes at the new potentials.
    #[default]
    BackwardEuler,
    /// Fluxes at step-averaged potentials chosen so that the free energy change
    /// over a step equals the dissipation exactly.
    DiscreteGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Sufficient-decrease constant of the backtracking line search.
    pub armijo_c: f64,
    /// Smallest damping factor before the step is rejected.
    pub min_damping: f64,
    /// Number of dt halvings allowed for one step.
    pub max_halvings: u32,
    /// Accepted steps at a reduced dt before it is doubled again.
    pub restore_after: usize,
    /// Truncation level `M` for chemical potentials.
    pub truncation: Option<f64>,
    /// Threshold `μ` beyond which interface rates are continued affinely.
    pub regularization: Option<f64>,
    pub steady_tol: f64,
    pub time_scheme: TimeScheme,
    /// Evaluate mobilities and interface prefactors at the previous time level.
    pub freeze_coefficients: bool,
    pub cation_flux: Option<FluxScheme>,
    pub electron_flux: Option<FluxScheme>,
    /// Allowed energy increase per step, in units of `newton_tol`.
    pub energy_tol_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1e-3,
            newton_tol: 1e-10,
            newton_max_iter: 25,
            armijo_c: 1e-4,
            min_damping: 1.0 / 1024.0,
            max_halvings: 8,
            restore_after: 4,
            truncation: None,
            regularization: None,
            steady_tol: 1e-6,
            time_scheme: TimeScheme::default(),
            freeze_coefficients: true,
            cation_flux: None,
            electron_flux: None,
            energy_tol_factor: 10.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be finite and > 0, got {x}")))
            }
        };
        positive("dt", self.dt)?;
        positive("newton_tol", self.newton_tol)?;
        positive("steady_tol", self.steady_tol)?;
        positive("min_damping", self.min_damping)?;
        positive("energy_tol_factor", self.energy_tol_factor)?;
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::param("armijo_c", "must lie in (0, 1)"));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::param("newton_max_iter", "must be at least 1"));
        }
        if let Some(m) = self.truncation {
            positive("truncation", m)?;
        }
        if let Some(mu) = self.regularization {
            positive("regularization", mu)?;
        }
        Ok(())
    }

    pub fn schemes(&self, variant: Variant) -> FluxSchemes {
        let d = FluxSchemes::default_for(variant);
        FluxSchemes {
            cation: self.cation_flux.unwrap_or(d.cation),
            electron: self.electron_flux.unwrap_or(d.electron),
        }
    }

    pub fn energy_tolerance(&self) -> f64 {
        self.energy_tol_factor * self.newton_tol
    }
}

/// Outcome of one accepted time step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub time: f64,
    pub dt: f64,
    pub newton: NewtonReport,
    /// Rejected attempts before acceptance.
    pub halvings: u32,
    pub accepted: bool,
    /// `Ψ^tot` before minus after.
    pub energy_decrement: f64,
    pub diss_bulk: f64,
    pub diss_boundary: f64,
    /// `ΔΨ^tot + diss_bulk + diss_boundary`.
    pub balance_residual: f64,
}

/// Solves one step of size `dt` from `prev`.
pub fn newton_solve(
    prev: &State,
    spec: &ModelSpec,
    mesh: &Mesh,
    cfg: &SolverConfig,
    dt: f64,
) -> Result<(State, NewtonReport)> {
    let ctx = StepContext::new(prev, spec, mesh, cfg, dt);
    let x0 = ctx.layout.pack(prev);
    let (res, report) = newton::solve(&ctx, x0);
    let x = res?;
    let state = ctx
        .layout
        .unpack(&x, prev.time + dt, spec, mesh, cfg.truncation)?;
    state.check_invariants(spec)?;
    Ok((state, report))
}

/// Steady when every density rate is below `steady_tol` and the total current
/// is spatially constant to `steady_tol`.
pub fn detect_steady(
    prev: &State,
    new: &State,
    spec: &ModelSpec,
    mesh: &Mesh,
    cfg: &SolverConfig,
) -> bool {
    let dt = new.time - prev.time;
    let mut change: f64 = 0.0;
    for (a, b) in prev.u1.iter().zip(&new.u1).chain(prev.u2.iter().zip(&new.u2)) {
        change = change.max((a - b).abs());
    }
    let rate = if change == 0.0 { 0.0 } else { change / dt.abs() };
    if !(rate <= cfg.steady_tol) {
        return false;
    }
    let (_, variation) = total_current(new, spec, mesh, cfg);
    variation <= cfg.steady_tol
}

/// A running simulation: current state, ledger and step-size control.
#[derive(Debug, Clone)]
pub struct Simulation {
    spec: ModelSpec,
    mesh: Mesh,
    cfg: SolverConfig,
    state: State,
    ledger: EnergyLedger,
    psi_gamma: [f64; 2],
    dt_current: f64,
    streak: usize,
    h1_max: f64,
    steps: usize,
}

impl Simulation {
    pub fn new(spec: ModelSpec, mesh: Mesh, cfg: SolverConfig, state: State) -> Result<Self> {
        Self::resume(spec, mesh, cfg, state, EnergyLedger::default())
    }

    /// Continues a run whose energy history is `ledger` (started afresh if empty).
    pub fn resume(
        spec: ModelSpec,
        mesh: Mesh,
        cfg: SolverConfig,
        state: State,
        ledger: EnergyLedger,
    ) -> Result<Self> {
        spec.validate()?;
        cfg.validate()?;
        mesh.check_len(state.n_cells())?;
        state.check_invariants(&spec)?;
        let ledger = if ledger.is_empty() {
            EnergyLedger::start(&state, &spec, &mesh)?
        } else {
            ledger
        };
        let last = ledger.last().expect("ledger has a row");
        let h1_max = h1_norm(&state.v0, state.v0_trace, &mesh);
        Ok(Simulation {
            dt_current: cfg.dt,
            spec,
            mesh,
            cfg,
            state,
            ledger,
            psi_gamma: [last.psi_g0, last.psi_g1],
            streak: 0,
            h1_max,
            steps: 0,
        })
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.ledger
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn into_parts(self) -> (State, EnergyLedger) {
        (self.state, self.ledger)
    }

    /// Checks `μ ≤ M - max_i(|z_i| C1 + |ξ_i^Γ|)` with `C1` the largest
    /// `H¹` norm of `v0` seen so far.
    fn check_regularization(&self) -> Result<()> {
        if let (Some(m), Some(mu)) = (self.cfg.truncation, self.cfg.regularization) {
            let mut worst: f64 = 0.0;
            for i in 0..2 {
                for g in 0..2 {
                    let z = f64::from(self.spec.z[i]).abs();
                    worst = worst.max(z * self.h1_max + self.spec.xi_ext[i][g].abs());
                }
            }
            let bound = m - worst;
            if mu > bound {
                return Err(Error::Regularization { mu, bound });
            }
        }
        Ok(())
    }

    /// Takes one accepted step, never past `t_end`.
    pub fn step(&mut self, t_end: f64) -> Result<StepReport> {
        self.check_regularization()?;
        let floor = self.cfg.dt / 2f64.powi(self.cfg.max_halvings as i32);
        let mut halvings = 0;
        let (new, newton, dt) = loop {
            let remaining = t_end - self.state.time;
            let dt = if remaining <= self.dt_current * (1.0 + 1e-9) {
                remaining
            } else {
                self.dt_current
            };
            match newton_solve(&self.state, &self.spec, &self.mesh, &self.cfg, dt) {
                Ok((new, report)) => break (new, report, dt),
                Err(e) => {
                    if self.dt_current / 2.0 < floor * (1.0 - 1e-12) {
                        return Err(Error::StepFailure {
                            time: self.state.time,
                            reason: format!("{e} (dt reduced to {:e})", self.dt_current),
                        });
                    }
                    self.dt_current /= 2.0;
                    self.streak = 0;
                    halvings += 1;
                }
            }
        };

        let ctx = StepContext::new(&self.state, &self.spec, &self.mesh, &self.cfg, dt);
        let fluxes = ctx.fluxes(&ctx.layout.pack(&new));
        let energy = StepEnergy::from_fluxes(&fluxes, dt, &self.spec);
        let psi = helmholtz_energy(&new.u1, &new.u2, &self.spec, &self.mesh)?;
        let psi_gamma = [
            self.psi_gamma[0] + energy.psi_gamma[0],
            self.psi_gamma[1] + energy.psi_gamma[1],
        ];
        let psi_tot = psi + psi_gamma[0] + psi_gamma[1];
        let previous = self.ledger.last().map_or(psi_tot, |e| e.psi_tot);
        let increase = psi_tot - previous;
        if self.spec.variant == Variant::Vdpcm && increase > self.cfg.energy_tolerance() {
            return Err(Error::EnergyIncrease {
                time: new.time,
                increase,
                tolerance: self.cfg.energy_tolerance(),
            });
        }
        self.ledger.push(LedgerEntry {
            t: new.time,
            phi: landau_energy(&new, &self.spec, &self.mesh),
            psi,
            psi_g0: psi_gamma[0],
            psi_g1: psi_gamma[1],
            psi_tot,
            diss_bulk: energy.diss_bulk,
            diss_boundary: energy.diss_boundary,
        });
        self.psi_gamma = psi_gamma;
        self.h1_max = self.h1_max.max(h1_norm(&new.v0, new.v0_trace, &self.mesh));
        self.state = new;
        self.steps += 1;
        if self.dt_current < self.cfg.dt {
            self.streak += 1;
            if self.streak >= self.cfg.restore_after {
                self.dt_current = (self.dt_current * 2.0).min(self.cfg.dt);
                self.streak = 0;
            }
        }
        Ok(StepReport {
            time: self.state.time,
            dt,
            newton,
            halvings,
            accepted: true,
            energy_decrement: -increase,
            diss_bulk: energy.diss_bulk,
            diss_boundary: energy.diss_boundary,
            balance_residual: increase + energy.diss_bulk + energy.diss_boundary,
        })
    }

    fn done(&self, t_end: f64) -> bool {
        t_end - self.state.time <= 1e-9 * self.cfg.dt
    }

    /// Steps until `t_end`.
    pub fn advance(&mut self, t_end: f64) -> Result<()> {
        self.advance_with(t_end, |_, _, _| true).map(|_| ())
    }

    /// Steps until `t_end` or until `keep_going(prev, new, report)` returns false.
    /// Returns whether `t_end` was reached.
    pub fn advance_with(
        &mut self,
        t_end: f64,
        mut keep_going: impl FnMut(&State, &State, &StepReport) -> bool,
    ) -> Result<bool> {
        if !t_end.is_finite() {
            return Err(Error::param("t_end", "must be finite"));
        }
        while !self.done(t_end) {
            let prev = self.state.clone();
            let report = self.step(t_end)?;
            if !keep_going(&prev, &self.state, &report) {
                return Ok(self.done(t_end));
            }
        }
        Ok(true)
    }

    /// Steps until a steady state is detected or `t_max` is reached; returns
    /// the detection time.
    pub fn run_until_steady(&mut self, t_max: f64) -> Result<Option<f64>> {
        let (spec, mesh, cfg) = (self.spec.clone(), self.mesh, self.cfg.clone());
        let mut found = None;
        self.advance_with(t_max, |prev, new, _| {
            if detect_steady(prev, new, &spec, &mesh, &cfg) {
                found = Some(new.time);
                false
            } else {
                true
            }
        })?;
        Ok(found)
    }
}

/// Advances `state` to `t_end`, appending every accepted step to `ledger`.
///
/// On failure the error is returned together with the last accepted state.
pub fn advance(
    state: State,
    spec: &ModelSpec,
    mesh: &Mesh,
    cfg: &SolverConfig,
    t_end: f64,
    ledger: &mut EnergyLedger,
) -> std::result::Result<State, (Error, Box<State>)> {
    if !(t_end > state.time) {
        return Err((
            Error::param("t_end", format!("must exceed the current time {}", state.time)),
            Box::new(state),
        ));
    }
    let history = std::mem::take(ledger);
    let mut sim = match Simulation::resume(spec.clone(), *mesh, cfg.clone(), state.clone(), history.clone()) {
        Ok(s) => s,
        Err(e) => {
            *ledger = history;
            return Err((e, Box::new(state)));
        }
    };
    let result = sim.advance(t_end);
    let (state, own) = sim.into_parts();
    *ledger = own;
    match result {
        Ok(()) => Ok(state),
        Err(e) => Err((e, Box::new(state))),
    }
}

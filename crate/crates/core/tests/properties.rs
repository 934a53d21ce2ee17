//! Randomized checks of the invariants every step and every state must satisfy.

use proptest::prelude::*;

use vdpcm::discretization::Mesh;
use vdpcm::energy::{duality_gap, helmholtz_energy};
use vdpcm::experiments::InitialCondition;
use vdpcm::io::RunConfig;
use vdpcm::physics::{Interface, ModelParams, ModelSpec, RawKinetics, Species, Variant};
use vdpcm::stepper::{initial_state, Simulation, SolverConfig, State, StepContext, TimeScheme};

const TOL: f64 = 1e-9;

fn spec_for(variant: Variant, v_app: f64, k: f64) -> ModelSpec {
    let params = ModelParams {
        applied_potential: v_app,
        variant,
        ..ModelParams::default()
    };
    let mut raw = RawKinetics::uniform(1.0);
    raw.k[0][0] = k;
    raw.m[1][1] = 1.0 / k;
    ModelSpec::new(&params, &raw).unwrap()
}

fn cosine(a1: f64, a2: f64, mode: u32) -> InitialCondition {
    InitialCondition::Cosine {
        u1_mean: 2.0,
        u1_amplitude: a1,
        u2_mean: 1.0,
        u2_amplitude: a2,
        mode,
    }
}

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![Just(Variant::Vdpcm), Just(Variant::Legacy)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn accepted_states_are_admissible(
        var in variant(),
        v_app in -0.6f64..0.6,
        k in 0.3f64..3.0,
        a1 in -1.5f64..1.5,
        a2 in -0.8f64..0.8,
        mode in 1u32..4,
        dt in prop_oneof![Just(1e-3), Just(1e-2)],
    ) {
        let spec = spec_for(var, v_app, k);
        let mesh = Mesh::new(12).unwrap();
        let start = cosine(a1, a2, mode).build(&spec, &mesh).unwrap();
        let cfg = SolverConfig { dt, ..SolverConfig::default() };
        let mut sim = Simulation::new(spec.clone(), mesh, cfg.clone(), start).unwrap();
        let mut worst_mass: f64 = 0.0;
        let mut bad: Option<String> = None;
        sim.advance_with(20.0 * dt, |prev, new, _| {
            if new.charge_identity_error(&spec) > 1e-13 || new.statistics_error(&spec) > 1e-12 {
                bad = Some(format!("identity broken at t = {}", new.time));
            }
            if !new.u1.iter().all(|&u| u > 0.0 && u < spec.ubar[0]) || !new.u2.iter().all(|&u| u > 0.0) {
                bad = Some(format!("bounds broken at t = {}", new.time));
            }
            // mass change equals the net interface outflow
            let step = new.time - prev.time;
            let ctx = StepContext::new(prev, &spec, &mesh, &cfg, step);
            let fl = ctx.fluxes(&ctx.layout.pack(new));
            for s in Species::ALL {
                let i = s.index();
                let dm: f64 = prev.density(s).iter().zip(new.density(s)).map(|(a, b)| mesh.h * (b - a)).sum();
                let out = step * (fl.interface[i][0] + fl.interface[i][1]);
                worst_mass = worst_mass.max((dm + out).abs());
            }
            true
        }).unwrap();
        prop_assert!(bad.is_none(), "{:?}", bad);
        prop_assert!(worst_mass < 1e-10, "mass defect {}", worst_mass);
        prop_assert!(sim.ledger().identity_error() < 1e-13);
        if var == Variant::Vdpcm {
            prop_assert!(sim.ledger().max_increase() <= TOL);
        }
    }

    #[test]
    fn dissipation_is_bounded_by_the_energy_drop(
        v_app in -0.6f64..0.6,
        a1 in -1.5f64..1.5,
        a2 in -0.8f64..0.8,
        scheme in prop_oneof![Just(TimeScheme::BackwardEuler), Just(TimeScheme::DiscreteGradient)],
    ) {
        let spec = spec_for(Variant::Vdpcm, v_app, 1.0);
        let mesh = Mesh::new(10).unwrap();
        let start = cosine(a1, a2, 1).build(&spec, &mesh).unwrap();
        let cfg = SolverConfig { time_scheme: scheme, ..SolverConfig::default() };
        let mut sim = Simulation::new(spec, mesh, cfg, start).unwrap();
        sim.advance(0.03).unwrap();
        let l = sim.ledger();
        let drop = l.psi_tot[0] - l.psi_tot.iter().cloned().fold(f64::INFINITY, f64::min);
        let bulk: f64 = l.diss_bulk.iter().sum();
        let bdry: f64 = l.diss_boundary.iter().sum();
        prop_assert!(l.diss_bulk.iter().all(|&d| d >= -TOL));
        prop_assert!(l.diss_boundary.iter().all(|&d| d >= -TOL));
        prop_assert!(bulk <= drop + TOL && bdry <= drop + TOL, "{} {} {}", bulk, bdry, drop);
        for k in 1..l.len() {
            let gap = l.psi_tot[k] - l.psi_tot[k - 1] + l.diss_bulk[k] + l.diss_boundary[k];
            // implicit Euler loses a nonnegative Bregman remainder; the
            // discrete-gradient scheme loses nothing
            prop_assert!(gap <= TOL, "gap {}", gap);
            if scheme == TimeScheme::DiscreteGradient {
                prop_assert!(gap.abs() <= TOL, "gap {}", gap);
            }
        }
    }

    #[test]
    fn duality_gap_vanishes_on_consistent_states(
        u1 in prop::collection::vec(0.05f64..3.95, 8),
        u2 in prop::collection::vec(0.01f64..6.0, 8),
        v_app in -1.0f64..1.0,
    ) {
        let spec = spec_for(Variant::Vdpcm, v_app, 1.0);
        let mesh = Mesh::new(8).unwrap();
        let st: State = initial_state(&u1, &u2, &spec, &mesh).unwrap();
        prop_assert!(duality_gap(&st, &spec, &mesh).unwrap().abs() < 1e-9);
        prop_assert!(helmholtz_energy(&st.u1, &st.u2, &spec, &mesh).unwrap() >= -1e-14);
    }

    #[test]
    fn config_dump_round_trips(
        lambda2 in 1e-4f64..1.0,
        v_app in -2.0f64..2.0,
        n in 2usize..500,
        dt in 1e-6f64..1.0,
        trunc in prop::option::of(1.0f64..100.0),
        legacy in any::<bool>(),
        times in prop::collection::vec(0.0f64..1e4, 0..4),
    ) {
        let mut cfg = RunConfig::shipped();
        cfg.model.lambda2 = lambda2;
        cfg.model.applied_potential = v_app;
        cfg.model.variant = if legacy { Variant::Legacy } else { Variant::Vdpcm };
        cfg.mesh.n_cells = n;
        cfg.solver.dt = dt;
        cfg.solver.truncation = trunc;
        cfg.run.snapshot_times = times;
        let text = cfg.to_toml_string().unwrap();
        prop_assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }
}

#[test]
fn interface_currents_flip_with_outer_potentials() {
    // mirrored outer potentials reverse the cation exchange with the solution
    let mut spec = spec_for(Variant::Vdpcm, 0.0, 1.0);
    let mesh = Mesh::new(8).unwrap();
    let st = InitialCondition::Uniform { u1: 2.0, u2: 1.0 }.build(&spec, &mesh).unwrap();
    let xi = st.xi(Species::Cation, &spec)[0];
    spec.xi_ext[0][0] = xi + 0.3;
    let a = vdpcm::discretization::boundary_flux(Species::Cation, Interface::Solution, &with_interface_xi(&st, xi), &spec, None);
    spec.xi_ext[0][0] = xi - 0.3;
    let b = vdpcm::discretization::boundary_flux(Species::Cation, Interface::Solution, &with_interface_xi(&st, xi), &spec, None);
    assert!(a < 0.0 && b > 0.0);
    assert!((a + b).abs() < 1e-14);
}

fn with_interface_xi(st: &State, xi: f64) -> State {
    let mut s = st.clone();
    s.xi_interface[0][0] = xi;
    s
}

//! Current-voltage sweeps, profile snapshots and the comparison of the two
//! model variants.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::mesh::Mesh;
use crate::error::{Error, Result};
use crate::physics::{ModelSpec, Species, Variant};
use crate::stepper::residual::StepContext;
use crate::stepper::{equilibrium_state, initial_state, Simulation, SolverConfig, State};

/// Initial densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    /// `u_i(x) = mean_i + amplitude_i cos(mode π x)`.
    Cosine {
        u1_mean: f64,
        u1_amplitude: f64,
        u2_mean: f64,
        u2_amplitude: f64,
        #[serde(default = "one")]
        mode: u32,
    },
    Uniform {
        u1: f64,
        u2: f64,
    },
    /// Thermal equilibrium; needs equal outer potentials at both interfaces.
    Equilibrium,
}

fn one() -> u32 {
    1
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Cosine {
            u1_mean: 2.0,
            u1_amplitude: 0.5,
            u2_mean: 1.0,
            u2_amplitude: 0.4,
            mode: 1,
        }
    }
}

impl InitialCondition {
    pub fn build(&self, spec: &ModelSpec, mesh: &Mesh) -> Result<State> {
        match *self {
            InitialCondition::Cosine {
                u1_mean,
                u1_amplitude,
                u2_mean,
                u2_amplitude,
                mode,
            } => {
                let k = std::f64::consts::PI * f64::from(mode);
                let u1 = mesh.sample(|x| u1_mean + u1_amplitude * (k * x).cos());
                let u2 = mesh.sample(|x| u2_mean + u2_amplitude * (k * x).cos());
                initial_state(&u1, &u2, spec, mesh)
            }
            InitialCondition::Uniform { u1, u2 } => {
                let n = mesh.n_cells;
                initial_state(&vec![u1; n], &vec![u2; n], spec, mesh)
            }
            InitialCondition::Equilibrium => equilibrium_state(spec, mesh),
        }
    }
}

/// Spatial mean of the total current `z1 J1 + z2 J2` over interior edges and
/// its largest deviation from that mean.
pub fn total_current(state: &State, spec: &ModelSpec, mesh: &Mesh, cfg: &SolverConfig) -> (f64, f64) {
    let ctx = StepContext::new(state, spec, mesh, cfg, 1.0);
    let fluxes = ctx.fluxes(&ctx.layout.pack(state));
    let n = mesh.n_cells;
    let currents: Vec<f64> = (1..n)
        .map(|e| {
            Species::ALL
                .iter()
                .map(|&s| spec.charge(s) * fluxes.edge[s.index()][e])
                .sum()
        })
        .collect();
    let mean = currents.iter().sum::<f64>() / currents.len() as f64;
    let variation = currents.iter().map(|c| (c - mean).abs()).fold(0.0, f64::max);
    (mean, variation)
}

/// Steady-state record for one applied potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub v: f64,
    pub current: f64,
    pub variation: f64,
    /// Detection time, `None` if no steady state was reached.
    pub t_steady: Option<f64>,
    pub converged: bool,
    pub steps: usize,
    pub error: Option<String>,
    #[serde(skip)]
    pub state: Option<State>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn potentials(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.v).collect()
    }

    pub fn currents(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.current).collect()
    }

    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|p| p.converged)
    }

    /// Points plotted by default: converged ones only.
    pub fn plotted(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter(|p| p.converged)
            .map(|p| (p.v, p.current))
            .collect()
    }
}

/// Nondecreasing or nonincreasing.
pub fn is_monotone(values: &[f64]) -> bool {
    let up = values.windows(2).all(|w| w[1] >= w[0]);
    let down = values.windows(2).all(|w| w[1] <= w[0]);
    up || down
}

fn sweep_point(
    v: f64,
    template: &ModelSpec,
    mesh: &Mesh,
    cfg: &SolverConfig,
    initial: &InitialCondition,
    t_max: f64,
) -> SweepPoint {
    let spec = template.with_applied_potential(v);
    let run = || -> std::result::Result<(Simulation, Option<f64>), (Error, Option<Simulation>)> {
        let state = initial.build(&spec, mesh).map_err(|e| (e, None))?;
        let mut sim = Simulation::new(spec.clone(), *mesh, cfg.clone(), state).map_err(|e| (e, None))?;
        match sim.run_until_steady(t_max) {
            Ok(t) => Ok((sim, t)),
            Err(e) => Err((e, Some(sim))),
        }
    };
    match run() {
        Ok((sim, t_steady)) => {
            let (current, variation) = total_current(sim.state(), &spec, mesh, cfg);
            SweepPoint {
                v,
                current,
                variation,
                t_steady,
                converged: t_steady.is_some(),
                steps: sim.steps(),
                error: None,
                state: Some(sim.state().clone()),
            }
        }
        Err((e, sim)) => SweepPoint {
            v,
            current: f64::NAN,
            variation: f64::NAN,
            t_steady: None,
            converged: false,
            steps: sim.as_ref().map_or(0, |s| s.steps()),
            error: Some(e.to_string()),
            state: sim.map(|s| s.state().clone()),
        },
    }
}

/// Runs every applied potential to steady state (or `t_max`) on up to `jobs`
/// threads. Per-point failures are recorded, not propagated.
pub fn potential_sweep(
    v_values: &[f64],
    template: &ModelSpec,
    mesh: &Mesh,
    cfg: &SolverConfig,
    initial: &InitialCondition,
    t_max: f64,
    jobs: usize,
) -> Result<SweepResult> {
    if let Some(v) = v_values.iter().find(|v| !v.is_finite()) {
        return Err(Error::param("sweep.values", format!("applied potential {v} is not finite")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let mut points: Vec<SweepPoint> = pool.install(|| {
        v_values
            .par_iter()
            .map(|&v| sweep_point(v, template, mesh, cfg, initial, t_max))
            .collect()
    });
    points.sort_by(|a, b| a.v.total_cmp(&b.v));
    Ok(SweepResult { points })
}

/// `L∞` and `L²` norms of the difference of two cell fields.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub linf: f64,
    pub l2: f64,
}

impl Discrepancy {
    pub fn between(a: &[f64], b: &[f64], h: f64) -> Self {
        let mut linf: f64 = 0.0;
        let mut sq = 0.0;
        for (x, y) in a.iter().zip(b) {
            let d = (x - y).abs();
            linf = linf.max(d);
            sq += h * d * d;
        }
        Discrepancy { linf, l2: sq.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDiscrepancy {
    pub u1: Discrepancy,
    pub u2: Discrepancy,
    pub v0: Discrepancy,
}

impl ProfileDiscrepancy {
    pub fn between(a: &State, b: &State, mesh: &Mesh) -> Self {
        ProfileDiscrepancy {
            u1: Discrepancy::between(&a.u1, &b.u1, mesh.h),
            u2: Discrepancy::between(&a.u2, &b.u2, mesh.h),
            v0: Discrepancy::between(&a.v0, &b.v0, mesh.h),
        }
    }

    pub fn max_linf(&self) -> f64 {
        self.u1.linf.max(self.u2.linf).max(self.v0.linf)
    }
}

/// Paired states of the two variants at one requested time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotPair {
    pub t: f64,
    /// Actual state times; earlier than `t` when a steady state was reached first.
    pub t_vdpcm: f64,
    pub t_legacy: f64,
    pub steady_vdpcm: bool,
    pub steady_legacy: bool,
    pub discrepancy: ProfileDiscrepancy,
    #[serde(skip)]
    pub vdpcm: Option<State>,
    #[serde(skip)]
    pub legacy: Option<State>,
}

/// Everything `compare` reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub snapshots: Vec<SnapshotPair>,
    pub iv_vdpcm: SweepResult,
    pub iv_legacy: SweepResult,
    pub iv_max_relative_difference: f64,
    pub iv_monotone_vdpcm: bool,
    pub iv_monotone_legacy: bool,
}

/// Largest pointwise `|a - b| / max(|a|, |b|)` over points where both converged.
pub fn max_relative_difference(a: &SweepResult, b: &SweepResult) -> f64 {
    a.points
        .iter()
        .zip(&b.points)
        .filter(|(p, q)| p.converged && q.converged)
        .map(|(p, q)| {
            let scale = p.current.abs().max(q.current.abs());
            if scale == 0.0 {
                0.0
            } else {
                (p.current - q.current).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// States at the requested times; once a steady state is detected the run
/// stops and that state stands in for all later times.
pub fn snapshots(
    spec: &ModelSpec,
    mesh: &Mesh,
    cfg: &SolverConfig,
    initial: &State,
    times: &[f64],
) -> Result<Vec<(State, bool)>> {
    let mut sim = Simulation::new(spec.clone(), *mesh, cfg.clone(), initial.clone())?;
    let mut sorted: Vec<f64> = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut steady = false;
    let mut out = Vec::with_capacity(sorted.len());
    for &t in &sorted {
        if !steady && t > sim.state().time {
            let (s, m, c) = (spec.clone(), *mesh, cfg.clone());
            sim.advance_with(t, |prev, new, _| {
                steady = crate::stepper::detect_steady(prev, new, &s, &m, &c);
                !steady
            })?;
        }
        out.push((sim.state().clone(), steady));
    }
    // restore the caller's order
    let mut result = Vec::with_capacity(times.len());
    for t in times {
        let k = sorted.iter().position(|s| s == t).expect("time present");
        result.push(out[k].clone());
    }
    Ok(result)
}

/// Runs both variants from the same initial data and sweeps both IV curves.
#[allow(clippy::too_many_arguments)]
pub fn compare_models(
    spec_vdpcm: &ModelSpec,
    spec_legacy: &ModelSpec,
    mesh: &Mesh,
    cfg: &SolverConfig,
    initial: &InitialCondition,
    snapshot_times: &[f64],
    v_values: &[f64],
    t_max: f64,
    jobs: usize,
) -> Result<Comparison> {
    if spec_vdpcm.with_variant(spec_legacy.variant) != *spec_legacy {
        return Err(Error::param("compare", "the two models may differ only in their variant"));
    }
    let start = initial.build(spec_vdpcm, mesh)?;
    let a = snapshots(spec_vdpcm, mesh, cfg, &start, snapshot_times)?;
    let b = snapshots(spec_legacy, mesh, cfg, &start, snapshot_times)?;
    let pairs = snapshot_times
        .iter()
        .zip(a.into_iter().zip(b))
        .map(|(&t, ((sa, fa), (sb, fb)))| SnapshotPair {
            t,
            t_vdpcm: sa.time,
            t_legacy: sb.time,
            steady_vdpcm: fa,
            steady_legacy: fb,
            discrepancy: ProfileDiscrepancy::between(&sa, &sb, mesh),
            vdpcm: Some(sa),
            legacy: Some(sb),
        })
        .collect();
    let iv_vdpcm = potential_sweep(v_values, spec_vdpcm, mesh, cfg, initial, t_max, jobs)?;
    let iv_legacy = potential_sweep(v_values, spec_legacy, mesh, cfg, initial, t_max, jobs)?;
    let plotted = |r: &SweepResult| r.plotted().into_iter().map(|p| p.1).collect::<Vec<_>>();
    Ok(Comparison {
        iv_max_relative_difference: max_relative_difference(&iv_vdpcm, &iv_legacy),
        iv_monotone_vdpcm: is_monotone(&plotted(&iv_vdpcm)),
        iv_monotone_legacy: is_monotone(&plotted(&iv_legacy)),
        snapshots: pairs,
        iv_vdpcm,
        iv_legacy,
    })
}

/// Model with a different variant, for building comparison pairs.
pub fn variant_pair(spec: &ModelSpec) -> (ModelSpec, ModelSpec) {
    (spec.with_variant(Variant::Vdpcm), spec.with_variant(Variant::Legacy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{ModelParams, RawKinetics};

    fn equilibrium_spec() -> ModelSpec {
        let params = ModelParams {
            applied_potential: 0.0,
            ..ModelParams::default()
        };
        ModelSpec::new(&params, &RawKinetics::uniform(1.0)).unwrap()
    }

    #[test]
    fn equilibrium_carries_no_current() {
        let s = equilibrium_spec();
        let m = Mesh::new(16).unwrap();
        let st = equilibrium_state(&s, &m).unwrap();
        let (c, var) = total_current(&st, &s, &m, &SolverConfig::default());
        assert!(c.abs() < 1e-12 && var < 1e-12);
    }

    #[test]
    fn single_equilibrium_point_sweep() {
        let s = equilibrium_spec();
        let m = Mesh::new(8).unwrap();
        let cfg = SolverConfig {
            dt: 0.05,
            ..SolverConfig::default()
        };
        let r = potential_sweep(&[0.0], &s, &m, &cfg, &InitialCondition::Equilibrium, 1.0, 1).unwrap();
        assert!(r.points[0].converged);
        assert!(r.points[0].current.abs() < 1e-12);
    }

    #[test]
    fn sweep_output_is_sorted_and_failures_are_flagged() {
        let s = equilibrium_spec();
        let m = Mesh::new(8).unwrap();
        let cfg = SolverConfig {
            dt: 0.05,
            ..SolverConfig::default()
        };
        // equilibrium initial data is only available at V = 0
        let r = potential_sweep(&[0.2, 0.0, -0.2], &s, &m, &cfg, &InitialCondition::Equilibrium, 0.5, 2).unwrap();
        assert_eq!(r.potentials(), vec![-0.2, 0.0, 0.2]);
        assert!(!r.points[0].converged && r.points[0].error.is_some());
        assert!(r.points[1].converged);
        assert_eq!(r.plotted().len(), 1);
        assert!(potential_sweep(&[f64::NAN], &s, &m, &cfg, &InitialCondition::Equilibrium, 0.5, 1).is_err());
    }

    #[test]
    fn identical_runs_do_not_differ() {
        let s = ModelSpec::new(&ModelParams::default(), &RawKinetics::uniform(1.0)).unwrap();
        let m = Mesh::new(8).unwrap();
        let cfg = SolverConfig {
            dt: 0.01,
            ..SolverConfig::default()
        };
        let start = InitialCondition::default().build(&s, &m).unwrap();
        let a = snapshots(&s, &m, &cfg, &start, &[0.0, 0.05]).unwrap();
        let b = snapshots(&s, &m, &cfg, &start, &[0.05, 0.0]).unwrap();
        assert_eq!(ProfileDiscrepancy::between(&a[0].0, &b[1].0, &m).max_linf(), 0.0);
        assert_eq!(ProfileDiscrepancy::between(&a[1].0, &b[0].0, &m).max_linf(), 0.0);
        assert_eq!(ProfileDiscrepancy::between(&a[0].0, &start, &m).max_linf(), 0.0);
    }

    #[test]
    fn monotonicity_helper() {
        assert!(is_monotone(&[1.0, 2.0, 2.0, 5.0]));
        assert!(is_monotone(&[3.0, 1.0]));
        assert!(!is_monotone(&[1.0, 3.0, 2.0]));
        assert!(is_monotone(&[]));
    }
}

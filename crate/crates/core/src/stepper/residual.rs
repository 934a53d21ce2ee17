//! Residual of one implicit time step.
//!
//! Unknowns, in banded order:
//!
//! ```text
//! [ξ1(0), ξ2(0), v0_0, v1_0, v2_0, ..., v0_{n-1}, v1_{n-1}, v2_{n-1}, ξ1(1), ξ2(1)]
//! ```
//!
//! The four interface unknowns carry no mass. Each one balances the half-cell
//! flux between its boundary cell and the interface against the interface
//! reaction, so the flux seen by the boundary cell is exactly the reaction flux
//! evaluated at the interface electrochemical potential.

use crate::discretization::flux::{edge_flux, interface_law, FluxSchemes};
use crate::discretization::mesh::Mesh;
use crate::discretization::poisson::{boundary_trace, poisson_row};
use crate::discretization::FluxScheme;
use crate::physics::{
    charge_density, density, kinetic_prefactor_r, logistic, mobility_sigma, re, softplus,
    truncate, Interface, ModelSpec, Scalar, Species,
};
use crate::stepper::{SolverConfig, State, TimeScheme};

use crate::discretization::flux::bernoulli;

/// Half-width of the Jacobian band.
pub const BANDWIDTH: usize = 5;

/// Position of every unknown in the Newton vector.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub n: usize,
}

impl Layout {
    pub fn len(&self) -> usize {
        3 * self.n + 4
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn interface(&self, s: Species, g: Interface) -> usize {
        match g {
            Interface::Solution => s.index(),
            Interface::Metal => 3 * self.n + 2 + s.index(),
        }
    }

    pub fn v0(&self, k: usize) -> usize {
        2 + 3 * k
    }

    pub fn v(&self, s: Species, k: usize) -> usize {
        3 + 3 * k + s.index()
    }

    pub fn pack(&self, state: &State) -> Vec<f64> {
        let mut x = vec![0.0; self.len()];
        for s in Species::ALL {
            for g in Interface::ALL {
                x[self.interface(s, g)] = state.xi_interface[s.index()][g.index()];
            }
            for (k, &v) in state.potential(s).iter().enumerate() {
                x[self.v(s, k)] = v;
            }
        }
        for (k, &v) in state.v0.iter().enumerate() {
            x[self.v0(k)] = v;
        }
        x
    }

    pub fn unpack(
        &self,
        x: &[f64],
        time: f64,
        spec: &ModelSpec,
        mesh: &Mesh,
        truncation: Option<f64>,
    ) -> crate::error::Result<State> {
        let n = self.n;
        let v0 = (0..n).map(|k| x[self.v0(k)]).collect();
        let v = [
            (0..n).map(|k| x[self.v(Species::Cation, k)]).collect(),
            (0..n).map(|k| x[self.v(Species::Electron, k)]).collect(),
        ];
        let mut xi = [[0.0; 2]; 2];
        for s in Species::ALL {
            for g in Interface::ALL {
                xi[s.index()][g.index()] = x[self.interface(s, g)];
            }
        }
        State::from_potentials(time, v0, v, xi, spec, mesh, truncation)
    }
}

/// Everything a step residual needs besides the new unknowns.
#[derive(Debug, Clone)]
pub struct StepContext<'a> {
    pub prev: &'a State,
    pub spec: &'a ModelSpec,
    pub mesh: &'a Mesh,
    pub cfg: &'a SolverConfig,
    pub dt: f64,
    pub layout: Layout,
    pub schemes: FluxSchemes,
    sigma_prev: [Vec<f64>; 2],
    r_prev: [[f64; 2]; 2],
    v_prev: [Vec<f64>; 2],
}

/// Fluxes and flux potentials of one evaluated step, for energy bookkeeping.
///
/// `edge[i]` has `n + 1` entries: the left half edge, the interior edges and
/// the right half edge. `xi_points[i]` has the matching `n + 2` point values
/// (left interface, cells, right interface). `interface[i][Γ]` is `J_i·ν^Γ`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepFluxes {
    pub edge: [Vec<f64>; 2],
    pub xi_points: [Vec<f64>; 2],
    pub interface: [[f64; 2]; 2],
}

impl<'a> StepContext<'a> {
    pub fn new(
        prev: &'a State,
        spec: &'a ModelSpec,
        mesh: &'a Mesh,
        cfg: &'a SolverConfig,
        dt: f64,
    ) -> Self {
        let trunc = |v: f64| cfg.truncation.map_or(v, |m| truncate(v, m));
        let n = mesh.n_cells;
        let v_prev = [
            prev.v1.iter().map(|&v| trunc(v)).collect::<Vec<_>>(),
            prev.v2.iter().map(|&v| trunc(v)).collect::<Vec<_>>(),
        ];
        let sigma_prev = [
            v_prev[0].iter().map(|&v| mobility_sigma(Species::Cation, v, spec)).collect(),
            v_prev[1].iter().map(|&v| mobility_sigma(Species::Electron, v, spec)).collect(),
        ];
        let mut r_prev = [[0.0; 2]; 2];
        for s in Species::ALL {
            let vp = &v_prev[s.index()];
            r_prev[s.index()] = [
                kinetic_prefactor_r(s, Interface::Solution, vp[0], spec),
                kinetic_prefactor_r(s, Interface::Metal, vp[n - 1], spec),
            ];
        }
        StepContext {
            prev,
            spec,
            mesh,
            cfg,
            dt,
            layout: Layout { n },
            schemes: cfg.schemes(spec.variant),
            sigma_prev,
            r_prev,
            v_prev,
        }
    }

    fn trunc<D: Scalar>(&self, v: D) -> D {
        match self.cfg.truncation {
            Some(m) => truncate(v, m),
            None => v,
        }
    }

    /// Writes the residual for unknowns `x` into `out`, optionally recording fluxes.
    pub fn assemble<D: Scalar>(&self, x: &[D], out: &mut [D], mut detail: Option<&mut StepFluxes>) {
        let spec = self.spec;
        let mesh = self.mesh;
        let lay = self.layout;
        let n = lay.n;
        let h = mesh.h;
        let prev = self.prev;
        let discrete_gradient = self.cfg.time_scheme == TimeScheme::DiscreteGradient;

        let v0: Vec<D> = (0..n).map(|k| x[lay.v0(k)]).collect();
        let b = [
            boundary_trace(v0[0], 0, spec, mesh),
            boundary_trace(v0[n - 1], 1, spec, mesh),
        ];
        let v: [Vec<D>; 2] = [
            (0..n).map(|k| self.trunc(x[lay.v(Species::Cation, k)])).collect(),
            (0..n).map(|k| self.trunc(x[lay.v(Species::Electron, k)])).collect(),
        ];
        let u: [Vec<D>; 2] = [
            v[0].iter().map(|&w| density(spec, Species::Cation, w)).collect(),
            v[1].iter().map(|&w| density(spec, Species::Electron, w)).collect(),
        ];

        for k in 0..n {
            let q = charge_density(u[0][k], u[1][k], spec);
            out[lay.v0(k)] = poisson_row(k, &v0, q, spec, mesh);
        }

        // Potentials at which fluxes are evaluated.
        let (w0, w0b): (Vec<D>, [D; 2]) = if discrete_gradient {
            (
                v0.iter().zip(&prev.v0).map(|(&a, &p)| (a + p) * 0.5).collect(),
                [(b[0] + prev.v0_trace[0]) * 0.5, (b[1] + prev.v0_trace[1]) * 0.5],
            )
        } else {
            (v0.clone(), b)
        };

        for s in Species::ALL {
            let i = s.index();
            let z = spec.charge(s);
            let scheme = self.schemes.get(s);
            let w: Vec<D> = if discrete_gradient {
                v[i].iter()
                    .zip(&self.v_prev[i])
                    .map(|(&a, &p)| mean_potential(s, D::from(p), a))
                    .collect()
            } else {
                v[i].clone()
            };
            let sigma: Vec<D> = if self.cfg.freeze_coefficients || scheme == FluxScheme::ScharfetterGummel {
                self.sigma_prev[i].iter().map(|&x| D::from(x)).collect()
            } else {
                v[i].iter().map(|&a| mobility_sigma(s, a, spec)).collect()
            };

            let xl = x[lay.interface(s, Interface::Solution)];
            let xr = x[lay.interface(s, Interface::Metal)];
            let wl = xl - w0b[0] * z;
            let wr = xr - w0b[1] * z;

            let mut flux = Vec::with_capacity(n + 1);
            flux.push(edge_flux(s, scheme, spec, 0.5 * h, (wl, w[0]), (w0b[0], w0[0]), (sigma[0], sigma[0])));
            for k in 0..n - 1 {
                flux.push(edge_flux(
                    s,
                    scheme,
                    spec,
                    h,
                    (w[k], w[k + 1]),
                    (w0[k], w0[k + 1]),
                    (sigma[k], sigma[k + 1]),
                ));
            }
            flux.push(edge_flux(
                s,
                scheme,
                spec,
                0.5 * h,
                (w[n - 1], wr),
                (w0[n - 1], w0b[1]),
                (sigma[n - 1], sigma[n - 1]),
            ));

            let r = if self.cfg.freeze_coefficients {
                [D::from(self.r_prev[i][0]), D::from(self.r_prev[i][1])]
            } else {
                [
                    kinetic_prefactor_r(s, Interface::Solution, v[i][0], spec),
                    kinetic_prefactor_r(s, Interface::Metal, v[i][n - 1], spec),
                ]
            };
            let mu = self.cfg.regularization;
            let jl = interface_law(s, Interface::Solution, r[0], xl, w0b[0], spec, mu);
            let jr = interface_law(s, Interface::Metal, r[1], xr, w0b[1], spec, mu);

            let up = if s == Species::Cation { &prev.u1 } else { &prev.u2 };
            let scale = h / self.dt;
            for k in 0..n {
                out[lay.v(s, k)] = (u[i][k] - up[k]) * scale + flux[k + 1] - flux[k];
            }
            out[lay.interface(s, Interface::Solution)] = flux[0] + jl;
            out[lay.interface(s, Interface::Metal)] = flux[n] - jr;

            if let Some(d) = detail.as_deref_mut() {
                d.edge[i] = flux.iter().map(|&f| re(f)).collect();
                let mut pts = Vec::with_capacity(n + 2);
                pts.push(re(xl));
                pts.extend((0..n).map(|k| re(w[k] + w0[k] * z)));
                pts.push(re(xr));
                d.xi_points[i] = pts;
                d.interface[i] = [re(jl), re(jr)];
            }
        }
    }

    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.assemble(x, &mut out, None);
        out
    }

    pub fn fluxes(&self, x: &[f64]) -> StepFluxes {
        let mut out = vec![0.0; x.len()];
        let mut d = StepFluxes::default();
        self.assemble(x, &mut out, Some(&mut d));
        d
    }
}

const GAUSS_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Average of `v` over `[a, b]` weighted by `e'(v)`.
///
/// With this chemical potential in the fluxes the change of the entropy part
/// of the free energy over a step equals `m (u_b - u_a)` exactly.
pub(crate) fn mean_potential<D: Scalar>(species: Species, a: D, b: D) -> D {
    match species {
        Species::Electron => b + bernoulli(b - a) - 1.0,
        Species::Cation => {
            let delta = b - a;
            if re(delta).abs() <= 0.1 {
                // 8-point Gauss-Legendre on [a, b]
                let mid = (a + b) * 0.5;
                let half = delta * 0.5;
                let mut num = D::zero();
                let mut den = D::zero();
                for (t, wgt) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                    for sign in [-1.0, 1.0] {
                        let v = mid + half * (sign * t);
                        let e = logistic(v) * logistic(-v) * wgt;
                        num += e * v;
                        den += e;
                    }
                }
                num / den
            } else if re(a) + re(b) > 0.0 {
                // e' is even: evaluate on the side where e is small
                -cation_mean_direct(-a, -b)
            } else {
                cation_mean_direct(a, b)
            }
        }
    }
}

fn cation_mean_direct<D: Scalar>(a: D, b: D) -> D {
    let (ea, eb) = (logistic(a), logistic(b));
    (b * eb - a * ea - (softplus(b) - softplus(a))) / (eb - ea)
}

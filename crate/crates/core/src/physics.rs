//! Constitutive laws of the two-species oxide-layer model.
//!
//! Cations (species 1) follow Blakemore statistics `u = ū e^v / (1 + e^v)`,
//! electrons (species 2) Boltzmann statistics `u = ū e^v`. Interface
//! reactions are written in the dissipative form `J·ν = r(v) g(ξ - ξ^Γ)`
//! with `g` nondecreasing and `g(0) = 0`.
//!
//! Every pointwise law is generic over [`Scalar`] so the same code path is
//! used for plain evaluation and for forward-mode Jacobians.

use std::fmt;

use num_dual::DualNum;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real numbers and dual numbers over `f64`.
pub trait Scalar: DualNum<Primitive = f64> + Copy {}
impl<T: DualNum<Primitive = f64> + Copy> Scalar for T {}

#[inline]
pub(crate) fn re<D: Scalar>(x: D) -> f64 {
    x.re()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Species {
    Cation,
    Electron,
}

impl Species {
    pub const ALL: [Species; 2] = [Species::Cation, Species::Electron];

    pub fn index(self) -> usize {
        match self {
            Species::Cation => 0,
            Species::Electron => 1,
        }
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Species::Cation => f.write_str("cation"),
            Species::Electron => f.write_str("electron"),
        }
    }
}

/// The two ends of the oxide layer: `Solution` at x = 0 and `Metal` at x = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Interface {
    Solution,
    Metal,
}

impl Interface {
    pub const ALL: [Interface; 2] = [Interface::Solution, Interface::Metal];

    pub fn index(self) -> usize {
        match self {
            Interface::Solution => 0,
            Interface::Metal => 1,
        }
    }

    /// Outward unit normal.
    pub fn normal(self) -> f64 {
        match self {
            Interface::Solution => -1.0,
            Interface::Metal => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Vacancy cation mobility and the dissipative electron/metal law.
    #[default]
    Vdpcm,
    /// Linear cation mobility and the original electron/metal law.
    Legacy,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Vdpcm => "vdpcm",
            Variant::Legacy => "legacy",
        }
    }
}

/// Interface rate constants `k_i^Γ`, `m_i^Γ`, indexed `[species][interface]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawKinetics {
    pub k: [[f64; 2]; 2],
    pub m: [[f64; 2]; 2],
}

impl RawKinetics {
    pub fn uniform(value: f64) -> Self {
        RawKinetics {
            k: [[value; 2]; 2],
            m: [[value; 2]; 2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for s in Species::ALL {
            for g in Interface::ALL {
                let (i, j) = (s.index(), g.index());
                for (label, x) in [("k", self.k[i][j]), ("m", self.m[i][j])] {
                    if !(x.is_finite() && x > 0.0) {
                        return Err(Error::param(
                            format!("{label}{}_{}", i + 1, j),
                            format!("rate constant must be finite and strictly positive, got {x}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Bulk and interface data that do not depend on the kinetic parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda2: f64,
    /// Interface capacitance parameters `α_Γ`.
    pub alpha: [f64; 2],
    /// Voltages of zero charge `ΔΨ_Γ^pzc`.
    pub dpsi_pzc: [f64; 2],
    pub applied_potential: f64,
    pub rho_hl: f64,
    pub z: [i32; 2],
    pub d: [f64; 2],
    pub ubar: [f64; 2],
    pub ubar2_met: f64,
    pub variant: Variant,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            lambda2: 1e-2,
            alpha: [0.1, 0.1],
            dpsi_pzc: [0.0, 0.0],
            applied_potential: 0.3,
            rho_hl: -5.0,
            z: [3, -1],
            d: [1.0, 10.0],
            ubar: [4.0, 1.0],
            ubar2_met: 1.0,
            variant: Variant::Vdpcm,
        }
    }
}

/// Fully scaled model: what the discretization and the stepper consume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub lambda2: f64,
    /// `β^Γ = λ²/α_Γ`.
    pub beta: [f64; 2],
    /// Robin data `f^Γ`.
    pub f: [f64; 2],
    pub rho_hl: f64,
    pub z: [i32; 2],
    pub d: [f64; 2],
    pub ubar: [f64; 2],
    pub ubar2_met: f64,
    /// `κ_i^Γ`, indexed `[species][interface]`.
    pub kappa: [[f64; 2]; 2],
    /// Outer electrochemical potentials `ξ_i^Γ`, indexed `[species][interface]`.
    pub xi_ext: [[f64; 2]; 2],
    pub applied_potential: f64,
    pub dpsi_pzc: [f64; 2],
    pub variant: Variant,
}

impl ModelSpec {
    /// Builds the scaled model from raw Butler-Volmer rate constants.
    pub fn new(params: &ModelParams, raw: &RawKinetics) -> Result<Self> {
        raw.validate()?;
        let (kappa, xi_ext) =
            derive_scaled_kinetics(raw, params.applied_potential, params.z[0], params.z[1])?;
        Self::from_scaled(params, kappa, xi_ext)
    }

    /// Builds the model directly from `(κ, ξ^Γ)` tables.
    pub fn from_scaled(
        params: &ModelParams,
        kappa: [[f64; 2]; 2],
        xi_ext: [[f64; 2]; 2],
    ) -> Result<Self> {
        let p = params;
        check_positive("lambda2", p.lambda2)?;
        check_positive("alpha0", p.alpha[0])?;
        check_positive("alpha1", p.alpha[1])?;
        let beta = [p.lambda2 / p.alpha[0], p.lambda2 / p.alpha[1]];
        let f = [
            beta[0] * p.dpsi_pzc[0],
            beta[1] * (p.applied_potential - p.dpsi_pzc[1]),
        ];
        let spec = ModelSpec {
            lambda2: p.lambda2,
            beta,
            f,
            rho_hl: p.rho_hl,
            z: p.z,
            d: p.d,
            ubar: p.ubar,
            ubar2_met: p.ubar2_met,
            kappa,
            xi_ext,
            applied_potential: p.applied_potential,
            dpsi_pzc: p.dpsi_pzc,
            variant: p.variant,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("lambda2", self.lambda2)?;
        check_positive("beta0", self.beta[0])?;
        check_positive("beta1", self.beta[1])?;
        check_finite("f0", self.f[0])?;
        check_finite("f1", self.f[1])?;
        check_finite("rho_hl", self.rho_hl)?;
        check_finite("applied_potential", self.applied_potential)?;
        for (i, name) in ["d1", "d2"].iter().enumerate() {
            check_positive(name, self.d[i])?;
        }
        for (i, name) in ["ubar1", "ubar2"].iter().enumerate() {
            check_positive(name, self.ubar[i])?;
        }
        check_positive("ubar2_met", self.ubar2_met)?;
        for s in 0..2 {
            if self.z[s] == 0 {
                return Err(Error::param(format!("z{}", s + 1), "species charge must be nonzero"));
            }
            for g in 0..2 {
                check_positive(&format!("kappa{}_{}", s + 1, g), self.kappa[s][g])?;
                check_finite(&format!("xi{}_{}", s + 1, g), self.xi_ext[s][g])?;
            }
        }
        Ok(())
    }

    pub fn charge(&self, s: Species) -> f64 {
        f64::from(self.z[s.index()])
    }

    /// `λ²/α_Γ`, recovered from `β^Γ`.
    pub fn alpha(&self) -> [f64; 2] {
        [self.lambda2 / self.beta[0], self.lambda2 / self.beta[1]]
    }

    /// Moves the applied potential to `v`, shifting every quantity that depends
    /// on it: `ξ_1^1`, `ξ_2^1` and `f^1`.
    pub fn with_applied_potential(&self, v: f64) -> ModelSpec {
        let dv = v - self.applied_potential;
        let mut out = self.clone();
        out.applied_potential = v;
        out.xi_ext[0][1] += f64::from(self.z[0]) * dv;
        out.xi_ext[1][1] += f64::from(self.z[1]) * dv;
        out.f[1] = self.beta[1] * (v - self.dpsi_pzc[1]);
        out
    }

    pub fn with_variant(&self, variant: Variant) -> ModelSpec {
        ModelSpec {
            variant,
            ..self.clone()
        }
    }

    /// Electron/metal rate constants `(m_2^1, k_2^1)` recovered from the scaled form.
    pub fn metal_electron_rates(&self) -> (f64, f64) {
        let m = self.kappa[1][1];
        let k = m * (self.xi_ext[1][1] - f64::from(self.z[1]) * self.applied_potential).exp();
        (m, k)
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and > 0, got {x}")))
    }
}

fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite, got {x}")))
    }
}

/// Logistic function evaluated without overflow for either sign of `v`.
#[inline]
pub(crate) fn logistic<D: Scalar>(v: D) -> D {
    if re(v) >= 0.0 {
        (D::one() + (-v).exp()).recip()
    } else {
        let e = v.exp();
        e / (D::one() + e)
    }
}

/// Occupancy fraction `e_i(v)`: `e^v/(1+e^v)` for cations, `e^v` for electrons.
pub fn statistics_e<D: Scalar>(species: Species, v: D) -> D {
    match species {
        Species::Cation => logistic(v),
        Species::Electron => v.exp(),
    }
}

/// Derivative `e_i'(v)`.
pub fn statistics_e_prime<D: Scalar>(species: Species, v: D) -> D {
    match species {
        Species::Cation => logistic(v) * logistic(-v),
        Species::Electron => v.exp(),
    }
}

/// Chemical potential of a normalized occupancy, the inverse of [`statistics_e`].
pub fn statistics_e_inv(species: Species, w: f64) -> Result<f64> {
    match species {
        Species::Cation if w > 0.0 && w < 1.0 => Ok((w / (1.0 - w)).ln()),
        Species::Electron if w > 0.0 && w.is_finite() => Ok(w.ln()),
        Species::Cation => Err(Error::Domain {
            species,
            value: w,
            range: "(0, 1)",
        }),
        Species::Electron => Err(Error::Domain {
            species,
            value: w,
            range: "(0, inf)",
        }),
    }
}

/// Density `ū_i e_i(v)`.
pub fn density<D: Scalar>(spec: &ModelSpec, species: Species, v: D) -> D {
    statistics_e(species, v) * spec.ubar[species.index()]
}

/// Mobility `σ_i(v)`.
///
/// vDPCM: `σ_i = d_i ū_i e_i'(v)`, i.e. vacancy diffusion for cations.
/// Legacy cations use the linear law `σ_1 = d_1 u_1`.
pub fn mobility_sigma<D: Scalar>(species: Species, v: D, spec: &ModelSpec) -> D {
    let i = species.index();
    match (species, spec.variant) {
        (Species::Cation, Variant::Legacy) => density(spec, species, v) * spec.d[i],
        _ => statistics_e_prime(species, v) * (spec.d[i] * spec.ubar[i]),
    }
}

/// Interface prefactor `r_i^Γ(v)`, strictly positive.
pub fn kinetic_prefactor_r<D: Scalar>(
    species: Species,
    interface: Interface,
    v: D,
    spec: &ModelSpec,
) -> D {
    let i = species.index();
    let kappa = spec.kappa[i][interface.index()];
    let ubar = spec.ubar[i];
    match (species, interface) {
        // e^{v/2}/(1+e^v) = 1/(2 cosh(v/2))
        (Species::Cation, _) => ((v * 0.5).cosh() * 2.0).recip() * (kappa * ubar),
        (Species::Electron, Interface::Solution) => (v * 0.5).exp() * (kappa * ubar.sqrt()),
        (Species::Electron, Interface::Metal) => v.exp() * (kappa * ubar),
    }
}

/// Dimensionless interface rate `g_i^Γ(y)`.
pub fn kinetic_g<D: Scalar>(species: Species, interface: Interface, y: D) -> D {
    match (species, interface) {
        (Species::Electron, Interface::Metal) => -(-y).exp_m1(),
        _ => (y * 0.5).sinh(),
    }
}

fn kinetic_g_prime(species: Species, interface: Interface, y: f64) -> f64 {
    match (species, interface) {
        (Species::Electron, Interface::Metal) => (-y).exp(),
        _ => 0.5 * (0.5 * y).cosh(),
    }
}

/// `g_i^Γ` on `[-μ, μ]`, continued affinely with slope `g'(μ)` outside.
pub fn kinetic_g_regularized<D: Scalar>(
    species: Species,
    interface: Interface,
    y: D,
    mu: f64,
) -> D {
    let slope = kinetic_g_prime(species, interface, mu);
    if re(y) > mu {
        (y - mu) * slope + kinetic_g(species, interface, mu)
    } else if re(y) < -mu {
        (y + mu) * slope + kinetic_g(species, interface, -mu)
    } else {
        kinetic_g(species, interface, y)
    }
}

/// Scaled kinetics `(κ, ξ^Γ)` from raw rate constants at applied potential `v_app`.
pub fn derive_scaled_kinetics(
    raw: &RawKinetics,
    v_app: f64,
    z1: i32,
    z2: i32,
) -> Result<([[f64; 2]; 2], [[f64; 2]; 2])> {
    raw.validate()?;
    let (k, m) = (&raw.k, &raw.m);
    let kappa = [
        [2.0 * (k[0][0] * m[0][0]).sqrt(), 2.0 * (k[0][1] * m[0][1]).sqrt()],
        // r_2^1 = m_2^1 u_2, so κ_2^1 carries m_2^1 itself.
        [2.0 * (k[1][0] * m[1][0]).sqrt(), m[1][1]],
    ];
    let xi = [
        [
            (m[0][0] / k[0][0]).ln(),
            (k[0][1] / m[0][1]).ln() + f64::from(z1) * v_app,
        ],
        [
            (m[1][0] / k[1][0]).ln(),
            (k[1][1] / m[1][1]).ln() + f64::from(z2) * v_app,
        ],
    ];
    Ok((kappa, xi))
}

/// Original electron/metal flux `m u_2 - k ū_2^met log(1 + e^{z_2 (V - v_0)})`.
pub fn legacy_electron_metal_flux<D: Scalar>(u2_at_1: D, v0_at_1: D, spec: &ModelSpec) -> Result<D> {
    if spec.variant != Variant::Legacy {
        return Err(Error::VariantMisuse("legacy_electron_metal_flux", "legacy"));
    }
    Ok(legacy_metal_flux(u2_at_1, v0_at_1, spec))
}

pub(crate) fn legacy_metal_flux<D: Scalar>(u2: D, v0: D, spec: &ModelSpec) -> D {
    let (m, k) = spec.metal_electron_rates();
    let x = (-v0 + spec.applied_potential) * f64::from(spec.z[1]);
    u2 * m - softplus(x) * (k * spec.ubar2_met)
}

/// Modified electron/metal flux `m u_2 - k ū_2 e^{z_2 (V - v_0)}`.
///
/// The `ū_2` factor is 1 for the normalized electron density and keeps the
/// law equal to `r_2^1 g_2^1` for other reference densities.
pub fn new_electron_metal_flux<D: Scalar>(u2_at_1: D, v0_at_1: D, spec: &ModelSpec) -> Result<D> {
    if spec.variant != Variant::Vdpcm {
        return Err(Error::VariantMisuse("new_electron_metal_flux", "vdpcm"));
    }
    let (m, k) = spec.metal_electron_rates();
    let x = (-v0_at_1 + spec.applied_potential) * f64::from(spec.z[1]);
    Ok(u2_at_1 * m - x.exp() * (k * spec.ubar[1]))
}

/// `log(1 + e^x)` without overflow.
#[inline]
pub(crate) fn softplus<D: Scalar>(x: D) -> D {
    if re(x) > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Net charge density `u_0 = z_1 u_1 + z_2 u_2 + ρ_hl`.
pub fn charge_density<D: Scalar>(u1: D, u2: D, spec: &ModelSpec) -> D {
    u1 * f64::from(spec.z[0]) + u2 * f64::from(spec.z[1]) + spec.rho_hl
}

/// Cellwise charge density for whole fields.
pub fn charge_density_field(u1: &[f64], u2: &[f64], spec: &ModelSpec) -> Vec<f64> {
    u1.iter()
        .zip(u2)
        .map(|(&a, &b)| charge_density(a, b, spec))
        .collect()
}

/// Truncation `T_M(v) = max(-M, min(M, v))`.
pub fn truncate<D: Scalar>(v: D, m: f64) -> D {
    if re(v) > m {
        D::from(m)
    } else if re(v) < -m {
        D::from(-m)
    } else {
        v
    }
}

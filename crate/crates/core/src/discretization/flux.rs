//! Two-point edge fluxes and interface reaction fluxes.
//!
//! Every edge flux is oriented from the left point `K` to the right point `L`.

use serde::{Deserialize, Serialize};

use crate::physics::{
    density, kinetic_g, kinetic_g_regularized, kinetic_prefactor_r, legacy_metal_flux,
    mobility_sigma, re, Interface, ModelSpec, Scalar, Species, Variant,
};
use crate::stepper::State;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluxScheme {
    /// Exponentially fitted flux for linear drift-diffusion.
    ScharfetterGummel,
    /// Geometric-mean edge mobility times the electrochemical potential jump.
    SqraGeometric,
    /// Arithmetic-mean edge mobility times the electrochemical potential jump.
    Centered,
}

/// Scheme per species.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FluxSchemes {
    pub cation: FluxScheme,
    pub electron: FluxScheme,
}

impl FluxSchemes {
    /// Vacancy cations use the geometric-mean flux, linear (legacy) cations and
    /// electrons the Scharfetter-Gummel flux.
    pub fn default_for(variant: Variant) -> Self {
        let cation = match variant {
            Variant::Vdpcm => FluxScheme::SqraGeometric,
            Variant::Legacy => FluxScheme::ScharfetterGummel,
        };
        FluxSchemes {
            cation,
            electron: FluxScheme::ScharfetterGummel,
        }
    }

    pub fn get(&self, species: Species) -> FluxScheme {
        match species {
            Species::Cation => self.cation,
            Species::Electron => self.electron,
        }
    }
}

/// Bernoulli function `x/(e^x - 1)`.
pub fn bernoulli<D: Scalar>(x: D) -> D {
    let xr = re(x);
    if xr.abs() < 1e-4 {
        D::one() - x * 0.5 + x * x / 12.0
    } else {
        x / x.exp_m1()
    }
}

/// Scharfetter-Gummel flux `(d/h)(B(δ) u_K - B(-δ) u_L)` with `δ = z (v0_L - v0_K)`.
///
/// Vanishes exactly when `u_L/u_K = e^{-δ}`.
pub fn sg_edge_flux<D: Scalar>(u_k: D, u_l: D, dv0: D, d: f64, h: f64) -> D {
    (bernoulli(dv0) * u_k - bernoulli(-dv0) * u_l) * (d / h)
}

/// Cation flux `√(σ_1(v_K) σ_1(v_L)) (ξ_K - ξ_L)/h`.
pub fn sqra_edge_flux(v1_k: f64, v1_l: f64, xi_k: f64, xi_l: f64, spec: &ModelSpec, h: f64) -> f64 {
    let sk = mobility_sigma(Species::Cation, v1_k, spec);
    let sl = mobility_sigma(Species::Cation, v1_l, spec);
    (sk * sl).sqrt() * (xi_k - xi_l) / h
}

pub fn centered_edge_flux(sigma_k: f64, sigma_l: f64, xi_k: f64, xi_l: f64, h: f64) -> f64 {
    0.5 * (sigma_k + sigma_l) * (xi_k - xi_l) / h
}

/// Edge flux of `species` between two points a distance `len` apart.
///
/// `w` are chemical potentials, `w0` electrostatic potentials and `sigma`
/// the mobilities attached to the two points (unused by the SG flux, which
/// works with the densities `ū e(w)` directly).
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn edge_flux<D: Scalar>(
    species: Species,
    scheme: FluxScheme,
    spec: &ModelSpec,
    len: f64,
    w: (D, D),
    w0: (D, D),
    sigma: (D, D),
) -> D {
    let z = spec.charge(species);
    match scheme {
        FluxScheme::ScharfetterGummel => {
            let uk = density(spec, species, w.0);
            let ul = density(spec, species, w.1);
            sg_edge_flux(uk, ul, (w0.1 - w0.0) * z, spec.d[species.index()], len)
        }
        FluxScheme::SqraGeometric => {
            let dxi = w.0 - w.1 + (w0.0 - w0.1) * z;
            (sigma.0 * sigma.1).sqrt() * dxi / len
        }
        FluxScheme::Centered => {
            let dxi = w.0 - w.1 + (w0.0 - w0.1) * z;
            (sigma.0 + sigma.1) * dxi * (0.5 / len)
        }
    }
}

/// Interface law `J·ν` given the prefactor, the interface electrochemical
/// potential and the interface value `b` of `v0`.
#[inline]
pub(crate) fn interface_law<D: Scalar>(
    species: Species,
    interface: Interface,
    r: D,
    xi: D,
    b: D,
    spec: &ModelSpec,
    mu: Option<f64>,
) -> D {
    if spec.variant == Variant::Legacy
        && species == Species::Electron
        && interface == Interface::Metal
    {
        let u2 = density(spec, species, xi - b * spec.charge(species));
        return legacy_metal_flux(u2, b, spec);
    }
    let y = xi - spec.xi_ext[species.index()][interface.index()];
    let g = match mu {
        Some(mu) => kinetic_g_regularized(species, interface, y, mu),
        None => kinetic_g(species, interface, y),
    };
    r * g
}

/// Outward interface flux `J_i·ν^Γ` of a state.
///
/// The prefactor uses the chemical potential of the adjacent cell; the
/// interface electrochemical potential is the state's interface value.
pub fn boundary_flux(
    species: Species,
    interface: Interface,
    state: &State,
    spec: &ModelSpec,
    mu: Option<f64>,
) -> f64 {
    let n = state.v0.len();
    let cell = match interface {
        Interface::Solution => 0,
        Interface::Metal => n - 1,
    };
    let v = state.potential(species)[cell];
    let r = kinetic_prefactor_r(species, interface, v, spec);
    let xi = state.xi_interface[species.index()][interface.index()];
    let b = state.v0_trace[interface.index()];
    interface_law(species, interface, r, xi, b, spec, mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{ModelParams, RawKinetics};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec() -> ModelSpec {
        ModelSpec::new(&ModelParams::default(), &RawKinetics::uniform(1.0)).unwrap()
    }

    #[test]
    fn bernoulli_values() {
        assert_eq!(bernoulli(0.0), 1.0);
        for x in [0.1, 1.0, 10.0] {
            assert_relative_eq!(bernoulli(-x) - bernoulli(x), x, max_relative = 1e-14);
        }
        assert_relative_eq!(bernoulli(50.0), 50.0 * (-50f64).exp(), max_relative = 1e-12);
        // the series and closed-form branches join smoothly
        let a: f64 = bernoulli(0.99e-4);
        let b = bernoulli(1.01e-4);
        assert!((a - b).abs() < 2e-6);
        assert!(bernoulli(800.0) == 0.0 && bernoulli(-800.0) == 800.0);
    }

    #[test]
    fn sg_examples() {
        let (d, h) = (2.0, 0.1);
        assert_relative_eq!(sg_edge_flux(3.0, 1.0, 0.0, d, h), (d / h) * 2.0);
        for dv in [-3.0, 0.2, 7.0] {
            // equal densities: pure drift -(d/h) u δ
            assert_relative_eq!(sg_edge_flux(1.5, 1.5, dv, d, h), -(d / h) * 1.5 * dv, max_relative = 1e-12);
            // thermal equilibrium
            let uk = 0.8;
            let ul = uk * (-dv).exp();
            assert!(sg_edge_flux(uk, ul, dv, d, h).abs() < 1e-12);
        }
    }

    #[test]
    fn sg_upwinds_for_strong_fields() {
        let (d, h) = (1.0, 1.0);
        // δ = +50: transport from L to K, carried by u_L
        let j = sg_edge_flux(1.0, 2.0, 50.0, d, h);
        assert!(j < 0.0);
        assert_relative_eq!(j, -100.0, max_relative = 1e-12);
        let j = sg_edge_flux(2.0, 1.0, -50.0, d, h);
        assert!(j > 0.0);
        assert_relative_eq!(j, 100.0, max_relative = 1e-12);
    }

    #[test]
    fn sqra_and_centered_examples() {
        let s = spec();
        assert_eq!(sqra_edge_flux(0.3, -0.2, 1.0, 1.0, &s, 0.1), 0.0);
        let sig = mobility_sigma(Species::Cation, 0.4, &s);
        assert_relative_eq!(sqra_edge_flux(0.4, 0.4, 2.0, 1.5, &s, 0.1), sig / 0.1 * 0.5, max_relative = 1e-14);
        assert_eq!(centered_edge_flux(1.0, 3.0, 0.0, 0.0, 0.5), 0.0);
        assert_relative_eq!(centered_edge_flux(2.0, 2.0, 1.0, 0.5, 0.5), 2.0);
        // geometric and arithmetic means agree to second order in the potential jump
        let dv = 1e-3;
        let sk = mobility_sigma(Species::Cation, 0.2, &s);
        let sl = mobility_sigma(Species::Cation, 0.2 + dv, &s);
        let a = sqra_edge_flux(0.2, 0.2 + dv, 1.0, 0.0, &s, 1.0);
        let b = centered_edge_flux(sk, sl, 1.0, 0.0, 1.0);
        assert!((a - b).abs() < 10.0 * dv * dv * sk, "{a} {b}");
    }

    /// Assembles `-(σ ξ')'` at interior cells with SQRA fluxes and compares with
    /// the exact operator for smooth fields.
    fn sqra_divergence_error(n: usize) -> f64 {
        let s = spec();
        let z = s.charge(Species::Cation);
        let v1 = |x: f64| 0.5 * (2.0 * x).sin();
        let v0 = |x: f64| 0.3 * x * x;
        let xi = |x: f64| v1(x) + z * v0(x);
        let sigma = |x: f64| mobility_sigma(Species::Cation, v1(x), &s);
        let exact = |x: f64| {
            let e = 1e-4;
            let flux = |y: f64| -sigma(y) * (xi(y + e) - xi(y - e)) / (2.0 * e);
            (flux(x + e) - flux(x - e)) / (2.0 * e)
        };
        let h = 1.0 / n as f64;
        let c = |k: usize| (k as f64 + 0.5) * h;
        let mut err: f64 = 0.0;
        for k in 1..n - 1 {
            let jr = sqra_edge_flux(v1(c(k)), v1(c(k + 1)), xi(c(k)), xi(c(k + 1)), &s, h);
            let jl = sqra_edge_flux(v1(c(k - 1)), v1(c(k)), xi(c(k - 1)), xi(c(k)), &s, h);
            err = err.max(((jr - jl) / h - exact(c(k))).abs());
        }
        err
    }

    #[test]
    fn sqra_divergence_is_consistent() {
        let e: Vec<f64> = [16, 32, 64].iter().map(|&n| sqra_divergence_error(n)).collect();
        for w in e.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.0, "{e:?}");
        }
    }

    #[test]
    fn schemes_agree_on_smooth_fields() {
        // electron flux: SG vs centered with σ = d u, both on a smooth profile
        let s = spec();
        let v2 = |x: f64| 0.4 * x - 0.2;
        let v0 = |x: f64| (x * 1.3).cos();
        let z = s.charge(Species::Electron);
        let mut prev = f64::INFINITY;
        for n in [20usize, 40, 80] {
            let h = 1.0 / n as f64;
            let (xk, xl) = (0.5, 0.5 + h);
            let w = (v2(xk), v2(xl));
            let w0 = (v0(xk), v0(xl));
            let sg = edge_flux(Species::Electron, FluxScheme::ScharfetterGummel, &s, h, w, w0, (0.0, 0.0));
            let sig = (
                mobility_sigma(Species::Electron, w.0, &s),
                mobility_sigma(Species::Electron, w.1, &s),
            );
            let ce = edge_flux(Species::Electron, FluxScheme::Centered, &s, h, w, w0, sig);
            let sq = edge_flux(Species::Electron, FluxScheme::SqraGeometric, &s, h, w, w0, sig);
            let gap = (sg - ce).abs().max((sg - sq).abs());
            let dxi = (v2(xl) + z * v0(xl) - v2(xk) - z * v0(xk)).abs() / h;
            let scaled = gap / dxi;
            assert!(scaled < prev);
            assert!(scaled < 2.0 * h * h * s.d[1] * 10.0, "{n}: {scaled}");
            prev = scaled;
        }
    }

    proptest! {
        #[test]
        fn sg_flux_dissipates(vk in -5.0f64..5.0, vl in -5.0f64..5.0, ak in -2.0f64..2.0, al in -2.0f64..2.0) {
            let s = spec();
            let z = s.charge(Species::Electron);
            let j = edge_flux(Species::Electron, FluxScheme::ScharfetterGummel, &s, 0.1, (vk, vl), (ak, al), (0.0, 0.0));
            let dxi = (vk + z * ak) - (vl + z * al);
            prop_assert!(j * dxi >= -1e-12);
        }
    }
}

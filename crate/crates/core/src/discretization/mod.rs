//! Uniform finite-volume mesh, Robin Poisson problem and two-point fluxes.

pub mod flux;
pub mod mesh;
pub mod poisson;

pub use flux::{
    bernoulli, boundary_flux, centered_edge_flux, sg_edge_flux, sqra_edge_flux, FluxScheme,
    FluxSchemes,
};
pub use mesh::{Field, Mesh};
pub use poisson::{solve_poisson, PoissonSolution};

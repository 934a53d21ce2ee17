//! Finite-volume simulation of a two-species oxide-layer corrosion model with
//! free-energy bookkeeping.
//!
//! Cations obey Blakemore statistics with a vacancy mobility, electrons
//! Boltzmann statistics; both are coupled to a Robin Poisson problem and
//! exchange charge with the solution and the metal through dissipative
//! Butler-Volmer laws. A legacy mode swaps in a linear cation mobility and the
//! original electron/metal law for comparison.
//!
//! ```
//! use vdpcm::prelude::*;
//!
//! let spec = ModelSpec::new(&ModelParams::default(), &RawKinetics::uniform(1.0)).unwrap();
//! let mesh = Mesh::new(16).unwrap();
//! let start = InitialCondition::default().build(&spec, &mesh).unwrap();
//! let mut sim = Simulation::new(spec, mesh, SolverConfig::default(), start).unwrap();
//! sim.advance(0.01).unwrap();
//! assert!(sim.ledger().max_increase() <= 1e-9);
//! ```

pub mod discretization;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod io;
pub mod physics;
pub mod stepper;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::discretization::{FluxScheme, FluxSchemes, Mesh};
    pub use crate::energy::EnergyLedger;
    pub use crate::error::{Error, Result};
    pub use crate::experiments::{total_current, InitialCondition, SweepResult};
    pub use crate::physics::{Interface, ModelParams, ModelSpec, RawKinetics, Species, Variant};
    pub use crate::stepper::{Simulation, SolverConfig, State, TimeScheme};
}

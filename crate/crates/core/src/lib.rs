//! Transport of non-interacting bosons or fermions across a 1-D lattice
//! coupled to two finite thermal reservoirs.
//!
//! The lattice is described by its single-particle density matrix (and
//! optionally the two-particle density matrix); the reservoirs by their
//! time-dependent chemical potentials. Particle exchange at the terminal
//! sites conserves the total particle number.

pub mod analysis;
pub mod density;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod lattice;
pub mod linalg;
pub mod polylog;
pub mod quadrature;
pub mod reservoirs;
pub mod simulate;

pub use error::{Error, Result};
pub use lattice::LatticeConfig;
pub use reservoirs::{equilibrium_solve, equilibrium_solve_from, DensityOfStates, EquilibriumResult, ReservoirModel, Statistics};
pub use density::{Spdm, Tpdm};
pub use dynamics::{Mode, Observables, ReservoirPair, SystemState};
pub use integrator::IntegratorOptions;
pub use simulate::{SimulationOptions, Trajectory};

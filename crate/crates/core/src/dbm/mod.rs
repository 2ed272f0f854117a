//! Stochastic particle systems: matrix ensembles, coupled DBM flows and the
//! linearised generator of the coupled dynamics.

pub mod coupling;
pub mod ensemble;
pub mod generator;
pub mod ledger;
pub mod particles;
pub mod profile;
pub mod short_range;
pub mod topology;

pub use ensemble::{ensemble_eigenvalues, goe_smallest_eigenvalues, matrix_path_eigenvalues, sample_gaussian_ensemble, Beta, GaussianMatrix};
pub use ledger::NoiseLedger;
pub use particles::{pad_system, sde_evolve, strip_system, ParticleSystem, SideLayout};

//! Reduced two-degree-of-freedom model: potential, Hamiltonian, critical points.

mod critical;
mod farfield;
mod hamiltonian;
mod hill;
mod params;
mod potential;

use thiserror::Error;

pub use critical::{find_critical_points, CriticalLabel, CriticalPoint};
pub use farfield::{
    reduced_effective_potential, relative_equilibrium_at_energy, relative_equilibrium_radius, EffectivePotential,
    RelativeEquilibrium,
};
pub use hamiltonian::{
    angular_inverse_mass, equations_of_motion, hamiltonian, hamiltonian_gradient, PhaseState,
};
pub use hill::{hill_boundary, hill_roots};
pub use params::{ModelParams, INERTIA_CH3, MASS_CH3, MASS_H};
pub use potential::{
    potential_gradient, potential_hindered_rotor, potential_jet, potential_long_range, potential_total,
    PotentialJet,
};

pub(crate) use hamiltonian::{eom_unchecked, hamiltonian_unchecked, hessian_unchecked};
#[allow(unused_imports)]
pub(crate) use hamiltonian::kinetic;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("r = {r} is below the cutoff radius {r_cut}")]
    BelowCutoff { r: f64, r_cut: f64 },
    #[error("invalid model parameter `{0}`")]
    InvalidParameter(&'static str),
    #[error("no root: {0}")]
    NoRoot(String),
    #[error("energy {e} is below the potential minimum")]
    EnergyTooLow { e: f64 },
}

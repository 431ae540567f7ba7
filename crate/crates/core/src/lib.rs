//! Phase-space transport for the planar CH4+ → CH3+ + H dissociation model.
//!
//! The model kernels and the integrator are generic over [`Real`]; the orbit,
//! surface and transport layers work in `f64` and are exposed through the
//! aliases below.

pub mod integrate;
pub mod model;
pub mod divsurf;
pub mod porbit;
pub mod cmrep;
pub mod transport;
pub mod real;

pub use real::Real;

pub type Params = model::ModelParams<f64>;
pub type State = model::PhaseState<f64>;

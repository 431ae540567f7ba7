pub mod cm;
pub mod model;
pub mod orbits;
pub mod transport;

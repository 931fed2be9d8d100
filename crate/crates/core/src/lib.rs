//! Simulation of a remotely charged quantum battery: two magnon modes
//! coupled through a chiral waveguide, with a driven charger and a distant
//! battery.
//!
//! The moment equations are closed and linear, so the same observables are
//! available in three ways: numerical integration ([`dynamics`]), closed
//! forms ([`analytic`]) and a truncated Fock-space master equation
//! ([`oracle`]). [`thermo`] turns moments into energies, ergotropy and
//! coherence.

pub mod analytic;
pub mod commands;
pub mod config;
pub mod dynamics;
pub mod integrate;
pub mod oracle;
pub mod params;
pub mod solver;
pub mod table;
pub mod thermo;
pub mod verify;

pub use params::SystemParams;

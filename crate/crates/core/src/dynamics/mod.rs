//! Master equations, integrators and device models.

mod master;
pub mod models;
mod solver;
mod sparse;

pub use master::{Dissipator, MasterEquation};
pub use solver::{evolve, Method, Observable, SolverConfig, SolverStats, Snapshot, Trajectory};

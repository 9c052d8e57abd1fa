//! Simulation and analysis toolkit for frequency-multiplexed photon counting
//! in dispersive circuit QED.
//!
//! Units: frequencies in MHz (device frequencies in GHz), times in us, rates
//! in 1/us. Hamiltonians are stored as H/h and enter the master equation as
//! `-i 2 pi [H/h, rho]`.

pub mod analysis;
pub mod drives;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod hilbert;
pub mod params;
pub mod readout;
pub mod wigner;

pub use error::{CoreError, Result};
pub use num_complex::Complex64 as C64;

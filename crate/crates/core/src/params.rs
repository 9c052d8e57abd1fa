//! Physical constants of the storage / yes-no qubit / multiplexing qubit device.
//!
//! Frequencies `f_*` are in GHz, couplings `chi_*` in MHz, rates in 1/us.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Lab calibration scale factors, carried as plain configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Displacement per pulse voltage, 1/(mV us).
    pub mu: f64,
    /// Photon-number scale, 1/V.
    pub photons_per_volt: f64,
    /// Rabi frequency per volt, GHz/V.
    pub xi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub f_ro: f64,
    pub f_s: f64,
    pub f_yn: f64,
    pub f_mp: f64,
    pub chi_s_yn: f64,
    pub chi_s_mp: f64,
    pub chi_ro_yn: f64,
    pub chi_yn_yn: f64,
    pub chi_mp_mp: f64,
    pub chi_s_s: f64,
    pub chi_s_s_yn: f64,
    pub chi_s_s_mp: f64,
    pub gamma_ro: f64,
    pub gamma_1_s: f64,
    pub gamma_2_s: f64,
    pub gamma_1_yn: f64,
    pub gamma_2_yn: f64,
    pub gamma_1_mp: f64,
    pub gamma_2_mp: f64,
    pub n_th_s: f64,
    pub calibration: Calibration,
}

impl Default for SystemParams {
    /// Device tables with the simulation-fitted couplings.
    fn default() -> Self {
        Self {
            f_ro: 7.138,
            f_s: 4.558,
            f_yn: 3.848,
            f_mp: 4.238,
            chi_s_yn: 1.42,
            chi_s_mp: 4.9,
            chi_ro_yn: 0.4,
            chi_yn_yn: 160.0,
            chi_mp_mp: 116.0,
            chi_s_s: -0.02,
            chi_s_s_yn: -0.003,
            chi_s_s_mp: -0.08,
            gamma_ro: 1.0 / 0.04,
            gamma_1_s: 1.0 / 3.8,
            gamma_2_s: 1.0 / 2.0,
            gamma_1_yn: 1.0 / 20.0,
            gamma_2_yn: 1.0 / 27.0,
            gamma_1_mp: 1.0 / 0.044,
            gamma_2_mp: 1.0 / 0.088,
            n_th_s: 0.03,
            calibration: Calibration { mu: 1.45, photons_per_volt: 85.9, xi: 0.543 },
        }
    }
}

impl SystemParams {
    /// Device tables as measured, before simulation fitting.
    pub fn measured() -> Self {
        Self { chi_s_yn: 1.4, ..Self::default() }
    }

    /// Storage pure dephasing rate, Gamma_2 - Gamma_1/2.
    pub fn gamma_phi_s(&self) -> f64 {
        self.gamma_2_s - self.gamma_1_s / 2.0
    }

    pub fn gamma_phi_yn(&self) -> f64 {
        self.gamma_2_yn - self.gamma_1_yn / 2.0
    }

    pub fn gamma_phi_mp(&self) -> f64 {
        self.gamma_2_mp - self.gamma_1_mp / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("gamma_ro", self.gamma_ro),
            ("gamma_1_s", self.gamma_1_s),
            ("gamma_2_s", self.gamma_2_s),
            ("gamma_1_yn", self.gamma_1_yn),
            ("gamma_2_yn", self.gamma_2_yn),
            ("gamma_1_mp", self.gamma_1_mp),
            ("gamma_2_mp", self.gamma_2_mp),
        ];
        for (name, r) in rates {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(CoreError::InvalidArgument(format!("{name} = {r} must be a finite rate >= 0")));
            }
        }
        // Allow rounding in the tables: a dephasing rate of -1e-12 is zero.
        let phis = [("storage", self.gamma_phi_s()), ("yes-no", self.gamma_phi_yn()), ("multiplexing", self.gamma_phi_mp())];
        for (name, g) in phis {
            if g < -1e-9 {
                return Err(CoreError::InvalidArgument(format!(
                    "{name} pure dephasing Gamma_2 - Gamma_1/2 = {g} is negative"
                )));
            }
        }
        if !(self.n_th_s >= 0.0) {
            return Err(CoreError::InvalidArgument(format!("n_th_s = {} must be >= 0", self.n_th_s)));
        }
        let all = [
            self.f_ro, self.f_s, self.f_yn, self.f_mp, self.chi_s_yn, self.chi_s_mp, self.chi_ro_yn, self.chi_yn_yn,
            self.chi_mp_mp, self.chi_s_s, self.chi_s_s_yn, self.chi_s_s_mp, self.calibration.mu,
            self.calibration.photons_per_volt, self.calibration.xi,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidArgument("all parameters must be finite".into()));
        }
        Ok(())
    }
}

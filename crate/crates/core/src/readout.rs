//! Emission and reflection coefficients, frequency-division demultiplexing and
//! the Rabi calibration model.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::fit::{levenberg_marquardt, spectrum_peaks, LmOptions, LsqProblem};

/// 1 - Re(r) = Gamma_1 <sigma_y> / (2 pi Omega), pointwise.
pub fn emission_coefficient(sigma_y: &[f64], gamma_1: f64, omega: f64) -> Result<Vec<f64>> {
    if omega == 0.0 || !omega.is_finite() {
        return Err(CoreError::InvalidArgument("emission coefficient undefined for Omega = 0".into()));
    }
    let k = gamma_1 / (2.0 * PI * omega);
    Ok(sigma_y.iter().map(|y| k * y).collect())
}

/// Steady-state Bloch components (<sigma_x>, <sigma_y>, <sigma_z>) of a
/// qubit with H/h = (delta/2) sigma_z + (Omega/2) sigma_x.
pub fn steady_state_bloch(delta: f64, omega: f64, gamma_1: f64, gamma_2: f64) -> (f64, f64, f64) {
    let d = 2.0 * PI * delta;
    let w = 2.0 * PI * omega;
    let den = gamma_1 * (gamma_2 * gamma_2 + d * d) + w * w * gamma_2;
    if den == 0.0 {
        return (0.0, 0.0, -1.0);
    }
    let y = w * gamma_1 * gamma_2 / den;
    let x = -d * gamma_1 * w / den;
    let z = -1.0 + w * y / gamma_1.max(f64::MIN_POSITIVE);
    (x, y, if gamma_1 > 0.0 { z } else { 0.0 })
}

/// r = 1 - (2 i Gamma_1 / 2 pi Omega) <sigma_->, drive along sigma_x.
pub fn reflection_from_sigma_minus(sigma_minus: C64, gamma_1: f64, omega: f64) -> C64 {
    C64::new(1.0, 0.0) - C64::new(0.0, 2.0 * gamma_1 / (2.0 * PI * omega)) * sigma_minus
}

/// Closed-form steady-state reflection of a driven two-level emitter.
/// Written so that Omega -> 0 stays finite.
pub fn steady_state_reflection(delta: f64, omega: f64, gamma_1: f64, gamma_2: f64) -> C64 {
    let d = 2.0 * PI * delta;
    let w = 2.0 * PI * omega;
    let den = gamma_1 * (gamma_2 * gamma_2 + d * d) + w * w * gamma_2;
    if den == 0.0 {
        return C64::new(1.0, 0.0);
    }
    // (Gamma_1 / w) (y + i x) with y, x from the Bloch steady state.
    let re = gamma_1 * gamma_1 * gamma_2 / den;
    let im = -d * gamma_1 * gamma_1 / den;
    C64::new(1.0 - re, -im)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSignal {
    pub k: usize,
    /// In-phase (cosine) projection.
    pub value: f64,
    /// Sine projection with the same normalization.
    pub quadrature: f64,
    pub window: (f64, f64),
}

/// Projects `signal(t)` on cos and sin of 2 pi spacing k t over `window`
/// by trapezoidal quadrature. Normalized by 2/T (1/T for k = 0) so a unit
/// tone returns 1.
pub fn demultiplex(times: &[f64], signal: &[f64], k: usize, spacing: f64, window: (f64, f64)) -> Result<ChannelSignal> {
    if times.len() != signal.len() {
        return Err(CoreError::DimensionMismatch { expected: times.len(), got: signal.len() });
    }
    if !(spacing > 0.0) {
        return Err(CoreError::InvalidArgument(format!("channel spacing {spacing} must be > 0")));
    }
    let (t0, t1) = window;
    if !(t1 > t0) {
        return Err(CoreError::InvalidArgument(format!("empty window ({t0}, {t1})")));
    }
    let eps = 1e-9 * (t1 - t0);
    let first = times.first().copied().unwrap_or(f64::NAN);
    let last = times.last().copied().unwrap_or(f64::NAN);
    if t0 < first - eps || t1 > last + eps {
        return Err(CoreError::InvalidArgument(format!("window ({t0}, {t1}) outside trajectory ({first}, {last})")));
    }
    let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= t0 - eps && times[i] <= t1 + eps).collect();
    if idx.len() < 2 {
        return Err(CoreError::InvalidArgument("window contains fewer than two samples".into()));
    }
    let w = 2.0 * PI * spacing * k as f64;
    let mut ic = 0.0;
    let mut is = 0.0;
    for pair in idx.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let h = times[b] - times[a];
        let fa = signal[a];
        let fb = signal[b];
        ic += 0.5 * h * (fa * (w * times[a]).cos() + fb * (w * times[b]).cos());
        is += 0.5 * h * (fa * (w * times[a]).sin() + fb * (w * times[b]).sin());
    }
    let span = times[*idx.last().unwrap()] - times[idx[0]];
    let norm = if k == 0 { 1.0 / span } else { 2.0 / span };
    Ok(ChannelSignal { k, value: ic * norm, quadrature: is * norm, window })
}

/// Channels `0..n_channels`.
pub fn demultiplex_all(times: &[f64], signal: &[f64], n_channels: usize, spacing: f64, window: (f64, f64)) -> Result<Vec<ChannelSignal>> {
    (0..n_channels).map(|k| demultiplex(times, signal, k, spacing, window)).collect()
}

/// Frequency correction in the damped Rabi model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RabiForm {
    /// ((Gamma_1 - 2 Gamma_2)/16)^2.
    #[default]
    Printed,
    /// ((Gamma_1 - 2 Gamma_2)/4)^2.
    Conventional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiParams {
    pub a: f64,
    /// GHz/V.
    pub xi: f64,
    /// V.
    pub v_mp: f64,
    pub gamma_1: f64,
    pub gamma_2: f64,
    pub t0: f64,
    pub phi: f64,
    /// Decay time, us.
    pub t_decay: f64,
    pub r_ss: f64,
}

/// Angular Rabi frequency in rad/us.
pub fn rabi_angular_frequency(xi: f64, v_mp: f64, gamma_1: f64, gamma_2: f64, form: RabiForm) -> f64 {
    let div = match form {
        RabiForm::Printed => 16.0,
        RabiForm::Conventional => 4.0,
    };
    let w = 2.0 * PI * xi * 1e3 * v_mp;
    let c = (gamma_1 - 2.0 * gamma_2) / div;
    (w * w - c * c).max(0.0).sqrt()
}

/// Re r(t) = r_ss + A cos(w (t - t0) + phi) e^{-(t - t0)/T}.
pub fn rabi_calibration_model(t: f64, p: &RabiParams, form: RabiForm) -> f64 {
    let w = rabi_angular_frequency(p.xi, p.v_mp, p.gamma_1, p.gamma_2, form);
    let s = t - p.t0;
    p.r_ss + p.a * (w * s + p.phi).cos() * (-s / p.t_decay).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiFit {
    pub xi: f64,
    pub xi_std: f64,
    pub a: f64,
    pub phi: f64,
    pub t_decay: f64,
    pub r_ss: f64,
    pub residual_norm: f64,
}

struct RabiProblem<'a> {
    t: &'a [f64],
    y: &'a [f64],
    v_mp: f64,
    gamma_1: f64,
    gamma_2: f64,
    t0: f64,
    form: RabiForm,
}

impl RabiProblem<'_> {
    fn params(&self, q: &[f64]) -> RabiParams {
        RabiParams {
            a: q[0],
            xi: q[1],
            v_mp: self.v_mp,
            gamma_1: self.gamma_1,
            gamma_2: self.gamma_2,
            t0: self.t0,
            phi: q[2],
            t_decay: q[3],
            r_ss: q[4],
        }
    }
}

impl LsqProblem for RabiProblem<'_> {
    fn n_residuals(&self) -> usize {
        self.t.len()
    }

    fn residuals(&self, q: &[f64], out: &mut [f64]) {
        let p = self.params(q);
        for i in 0..self.t.len() {
            out[i] = rabi_calibration_model(self.t[i], &p, self.form) - self.y[i];
        }
    }
}

/// Fits (A, xi, phi, T, r_ss) with t0 fixed at the first sample.
pub fn fit_rabi(t: &[f64], re_r: &[f64], v_mp: f64, gamma_1: f64, gamma_2: f64, form: RabiForm) -> Result<RabiFit> {
    if t.len() != re_r.len() {
        return Err(CoreError::DimensionMismatch { expected: t.len(), got: re_r.len() });
    }
    if !(v_mp > 0.0) {
        return Err(CoreError::InvalidArgument(format!("drive amplitude {v_mp} must be > 0")));
    }
    let t0 = t[0];
    let mean = re_r.iter().sum::<f64>() / re_r.len() as f64;
    let z: Vec<C64> = re_r.iter().map(|v| C64::new(v - mean, 0.0)).collect();
    let peaks = spectrum_peaks(t, &z)?;
    let f = peaks.iter().map(|p| p.0.abs()).find(|f| *f > 0.0).unwrap_or(1.0);
    let span = t[t.len() - 1] - t0;
    if f * span < 2.0 {
        return Err(CoreError::FitFailed { reason: "fewer than two oscillation periods".into(), residual: f64::NAN });
    }
    let w = 2.0 * PI * f;
    let div = if form == RabiForm::Printed { 16.0 } else { 4.0 };
    let c = (gamma_1 - 2.0 * gamma_2) / div;
    let xi0 = (w * w + c * c).sqrt() / (2.0 * PI * 1e3 * v_mp);
    // Amplitude and phase from the projection on the seed frequency.
    let proj: C64 = t.iter().zip(&z).map(|(&ti, v)| v * C64::from_polar(1.0, -w * (ti - t0))).sum::<C64>() * (2.0 / t.len() as f64);
    let amp = re_r.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max).max(proj.norm());
    let problem = RabiProblem { t, y: re_r, v_mp, gamma_1, gamma_2, t0, form };
    let seeds = [amp, xi0, proj.arg(), span / 2.0, mean];
    let lower = [None, Some(0.0), None, Some(1e-6), None];
    let rep = levenberg_marquardt(&problem, &seeds, &lower, &LmOptions::default())?;
    let q = &rep.params;
    Ok(RabiFit {
        xi: q[1],
        xi_std: rep.covariance[(1, 1)].max(0.0).sqrt(),
        a: q[0],
        phi: q[2],
        t_decay: q[3],
        r_ss: q[4],
        residual_norm: rep.residual_norm,
    })
}

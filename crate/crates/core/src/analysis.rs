//! Measurement-induced dephasing: rotating-frame quadratures, the 4x4
//! eigenvalue theory for single-drive decoherence, and the comb-drive
//! dephasing sweep.

use std::f64::consts::PI;

use nalgebra::Matrix4;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::models::{build_h4_mid, ModelOptions};
use crate::dynamics::{evolve, Method, SolverConfig, SolverStats};
use crate::error::{CoreError, Result};
use crate::fit::{fit_ramsey, fit_ramsey_two_tone};
use crate::params::SystemParams;

/// 2 Re[(<X> + i <P>) e^{-2 pi i delta_f_s t}].
pub fn rotating_frame_quadrature(x: &[f64], p: &[f64], t: &[f64], delta_f_s: f64) -> Result<Vec<f64>> {
    if x.len() != t.len() || p.len() != t.len() {
        return Err(CoreError::DimensionMismatch { expected: t.len(), got: x.len().min(p.len()) });
    }
    Ok(t.iter()
        .zip(x.iter().zip(p))
        .map(|(&ti, (&xi, &pi))| 2.0 * (C64::new(xi, pi) * C64::from_polar(1.0, -2.0 * PI * delta_f_s * ti)).re)
        .collect())
}

/// Which coupling enters the last block of the 4x4 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoryForm {
    /// (n + m)/2 2 pi chi everywhere.
    #[default]
    Printed,
    /// (n + m)/2 2 pi chi in the Bloch block, (m - n)/2 2 pi chi in the
    /// population-coherence block. Equals the exact reduced dynamics of the
    /// pair.
    PairResolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceTheory {
    /// us^-1.
    pub rate: f64,
    /// MHz.
    pub shift: f64,
}

/// The 4x4 generator for coherence rho_nm under a single drive at
/// f_mp - delta.
pub fn decoherence_matrix(n: usize, m: usize, delta: f64, omega: f64, gamma_1_mp: f64, chi_s_mp: f64, form: TheoryForm) -> Matrix4<C64> {
    let mean = (n + m) as f64 / 2.0 * 2.0 * PI * chi_s_mp;
    let last = match form {
        TheoryForm::Printed => mean,
        TheoryForm::PairResolved => (m as f64 - n as f64) / 2.0 * 2.0 * PI * chi_s_mp,
    };
    let g = gamma_1_mp;
    let d = 2.0 * PI * delta;
    let w = 2.0 * PI * omega;
    let r = |v: f64| C64::new(v, 0.0);
    let z = r(0.0);
    Matrix4::new(
        r(-g / 2.0), r(-d + mean), z, z,
        r(d - mean), r(-g / 2.0), r(-w), z,
        z, r(w), r(-g), C64::new(-g, -last),
        z, z, C64::new(0.0, -last), z,
    )
}

/// rate = -max Re(lambda); shift = Im(lambda)/2 pi of the same eigenvalue.
pub fn decoherence_rate_theory(n: usize, m: usize, delta: f64, omega: f64, gamma_1_mp: f64, chi_s_mp: f64, form: TheoryForm) -> DecoherenceTheory {
    let mat = decoherence_matrix(n, m, delta, omega, gamma_1_mp, chi_s_mp, form);
    let (_, t) = mat.schur().unpack();
    let best = (0..4).map(|i| t[(i, i)]).max_by(|a, b| a.re.total_cmp(&b.re)).unwrap();
    DecoherenceTheory { rate: -best.re, shift: best.im / (2.0 * PI) }
}

/// Indices of strict interior local maxima.
pub fn local_maxima(y: &[f64]) -> Vec<usize> {
    (1..y.len().saturating_sub(1)).filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1]).collect()
}

/// Mean spacing of successive local maxima of y(t), if at least two exist.
pub fn peak_spacing(t: &[f64], y: &[f64]) -> Option<f64> {
    let peaks = local_maxima(y);
    if peaks.len() < 2 {
        return None;
    }
    Some((t[peaks[peaks.len() - 1]] - t[peaks[0]]) / (peaks.len() - 1) as f64)
}

/// Settings of a comb-drive Ramsey sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    /// Initial coherent amplitude (real).
    pub beta: f64,
    /// MHz.
    pub delta_f_s0: f64,
    /// Pulse durations t, us; one simulation per entry.
    pub durations: Vec<f64>,
    pub options: ModelOptions,
    pub method: Method,
    /// Omega/chi_s_mp at and above which the two-tone model is used.
    pub two_tone_threshold: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            beta: -1.55,
            delta_f_s0: 3.96,
            durations: (1..=50).map(|k| 0.1 * k as f64).collect(),
            options: ModelOptions { storage_dim: 14, ..ModelOptions::default() },
            method: Method::Adaptive { rtol: 1e-8, atol: 1e-10 },
            two_tone_threshold: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    SingleTone,
    TwoTone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DephasingPoint {
    /// MHz.
    pub omega: f64,
    pub omega_over_chi: f64,
    /// <X>, <P> at the end of each pulse duration.
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub model: FitModel,
    /// us^-1, NaN when the fit failed.
    pub gamma_d_s: f64,
    /// MHz, NaN when the fit failed.
    pub delta_f_s: f64,
    pub residual_norm: f64,
    pub nu: Option<f64>,
    pub zeta: Option<f64>,
    pub error: Option<String>,
    pub stats: SolverStats,
}

/// <X>, <P> at the end of a comb pulse of each duration.
pub fn quadratures_vs_duration(p: &SystemParams, omega: f64, s: &SweepSettings) -> Result<(Vec<f64>, Vec<f64>, SolverStats)> {
    let runs: Vec<Result<(f64, f64, SolverStats)>> = s
        .durations
        .par_iter()
        .map(|&dur| {
            let (ops, meq) = build_h4_mid(p, omega, s.delta_f_s0, dur, &s.options)?;
            let rho0 = ops.coherent_initial(C64::new(s.beta, 0.0))?;
            let cfg = SolverConfig::new(s.method).times(vec![dur]).observe("X", ops.x_quadrature()).observe("P", ops.p_quadrature());
            let tr = evolve(&rho0, &meq, &cfg)?;
            let x = tr.real("X").expect("observed")[0];
            let pq = tr.real("P").expect("observed")[0];
            Ok((x, pq, tr.stats))
        })
        .collect();
    let mut xs = Vec::with_capacity(runs.len());
    let mut ps = Vec::with_capacity(runs.len());
    let mut stats = SolverStats::default();
    for r in runs {
        let (x, pq, st) = r?;
        xs.push(x);
        ps.push(pq);
        stats.merge(&st);
    }
    Ok((xs, ps, stats))
}

/// Gamma_d_s(Omega) and delta_f_s(Omega) from Ramsey fits of comb-driven
/// H4 runs. Fit failures are reported per point; solver failures abort.
pub fn dephasing_sweep(p: &SystemParams, omegas: &[f64], s: &SweepSettings) -> Result<Vec<DephasingPoint>> {
    if s.durations.len() < 8 {
        return Err(CoreError::InvalidArgument("need at least 8 pulse durations".into()));
    }
    omegas
        .par_iter()
        .map(|&omega| {
            let (x, pq, stats) = quadratures_vs_duration(p, omega, s)?;
            let ratio = omega / p.chi_s_mp;
            let model = if ratio >= s.two_tone_threshold { FitModel::TwoTone } else { FitModel::SingleTone };
            let mut point = DephasingPoint {
                omega,
                omega_over_chi: ratio,
                x,
                p: pq,
                model,
                gamma_d_s: f64::NAN,
                delta_f_s: f64::NAN,
                residual_norm: f64::NAN,
                nu: None,
                zeta: None,
                error: None,
                stats,
            };
            match model {
                FitModel::SingleTone => match fit_ramsey(&point.x, &point.p, &s.durations) {
                    Ok(f) => {
                        point.gamma_d_s = f.gamma_d_s;
                        point.delta_f_s = f.delta_f_s;
                        point.residual_norm = f.residual_norm;
                    }
                    Err(e) => point.error = Some(e.to_string()),
                },
                FitModel::TwoTone => match fit_ramsey_two_tone(&point.x, &point.p, &s.durations) {
                    Ok(f) => {
                        point.gamma_d_s = f.gamma_d_s;
                        point.delta_f_s = f.delta_f_s;
                        point.residual_norm = f.residual_norm;
                        point.nu = Some(f.nu);
                        point.zeta = Some(f.zeta);
                    }
                    Err(e) => point.error = Some(e.to_string()),
                },
            }
            Ok(point)
        })
        .collect()
}

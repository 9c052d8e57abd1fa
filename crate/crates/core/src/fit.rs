//! Nonlinear least squares (Levenberg-Marquardt) and the Ramsey, two-tone
//! Ramsey, exponential and linear models used throughout the analyses.
//!
//! Frequencies are seeded from the peak of a zero-padded FFT, so every fit is
//! deterministic and needs no hand-tuned starting point.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// A least-squares problem `min ||r(p)||^2`.
pub trait LsqProblem {
    fn n_residuals(&self) -> usize;
    fn residuals(&self, p: &[f64], out: &mut [f64]);

    /// Row-major `n_residuals x p.len()` Jacobian. Central differences by
    /// default.
    fn jacobian(&self, p: &[f64], jac: &mut DMatrix<f64>) {
        let m = self.n_residuals();
        let mut plus = vec![0.0; m];
        let mut minus = vec![0.0; m];
        let mut q = p.to_vec();
        for j in 0..p.len() {
            let h = 1e-7 * p[j].abs().max(1e-3);
            q[j] = p[j] + h;
            self.residuals(&q, &mut plus);
            q[j] = p[j] - h;
            self.residuals(&q, &mut minus);
            q[j] = p[j];
            for i in 0..m {
                jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub ftol: f64,
    pub xtol: f64,
    pub gtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 500, ftol: 1e-15, xtol: 1e-13, gtol: 1e-15 }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// s^2 (J^T J)^-1 with s^2 = SSR / (m - n).
    pub covariance: DMatrix<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Damped Gauss-Newton with Marquardt diagonal scaling. `lower` bounds are
/// enforced by projection.
pub fn levenberg_marquardt(problem: &dyn LsqProblem, p0: &[f64], lower: &[Option<f64>], opts: &LmOptions) -> Result<LmReport> {
    let n = p0.len();
    let m = problem.n_residuals();
    if m < n {
        return Err(CoreError::InvalidArgument(format!("{m} residuals cannot determine {n} parameters")));
    }
    let project = |p: &mut [f64]| {
        for (v, lo) in p.iter_mut().zip(lower) {
            if let Some(lo) = lo {
                if *v < *lo {
                    *v = *lo;
                }
            }
        }
    };
    let mut p = p0.to_vec();
    project(&mut p);
    let mut r = vec![0.0; m];
    problem.residuals(&p, &mut r);
    let mut cost = sum_sq(&r);
    if !cost.is_finite() {
        return Err(CoreError::FitFailed { reason: "non-finite residuals at the initial guess".into(), residual: cost });
    }
    let mut jac = DMatrix::<f64>::zeros(m, n);
    let mut lambda = 1e-3;
    let mut trial = vec![0.0; m];
    let mut iterations = 0;
    let mut refresh = true;
    let mut jtj = DMatrix::<f64>::zeros(n, n);
    let mut g = DVector::<f64>::zeros(n);
    while iterations < opts.max_iterations {
        iterations += 1;
        if refresh {
            problem.jacobian(&p, &mut jac);
            jtj = jac.transpose() * &jac;
            g = jac.transpose() * DVector::from_column_slice(&r);
            refresh = false;
        }
        if g.amax() <= opts.gtol * cost.max(1e-300).sqrt() {
            break;
        }
        let dmax = (0..n).map(|i| jtj[(i, i)]).fold(0.0, f64::max).max(1e-300);
        let mut lhs = jtj.clone();
        for i in 0..n {
            lhs[(i, i)] += lambda * jtj[(i, i)].max(1e-12 * dmax);
        }
        let step = match lhs.clone().cholesky() {
            Some(ch) => ch.solve(&(-&g)),
            None => {
                lambda *= 10.0;
                if lambda > 1e20 {
                    break;
                }
                continue;
            }
        };
        let mut pn: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        project(&mut pn);
        problem.residuals(&pn, &mut trial);
        let cost_new = sum_sq(&trial);
        if cost_new.is_finite() && cost_new < cost {
            let dp: f64 = p.iter().zip(&pn).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let pn_norm: f64 = pn.iter().map(|x| x * x).sum::<f64>().sqrt();
            let small_f = cost - cost_new <= opts.ftol * cost;
            let small_x = dp <= opts.xtol * (pn_norm + opts.xtol);
            p = pn;
            std::mem::swap(&mut r, &mut trial);
            cost = cost_new;
            lambda = (lambda / 3.0).max(1e-15);
            refresh = true;
            if small_f || small_x {
                break;
            }
        } else {
            lambda *= 4.0;
            if lambda > 1e20 {
                break;
            }
        }
    }
    problem.jacobian(&p, &mut jac);
    let jtj = jac.transpose() * &jac;
    let dof = (m - n).max(1) as f64;
    let s2 = cost / dof;
    let inv = jtj
        .clone()
        .try_inverse()
        .or_else(|| jtj.pseudo_inverse(1e-14).ok())
        .unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
    let covariance = inv * s2;
    if p.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::FitFailed { reason: "parameters diverged".into(), residual: cost.sqrt() });
    }
    Ok(LmReport { params: p, covariance, residual_norm: cost.sqrt(), iterations })
}

/// Sample spacing of a uniform grid.
pub fn uniform_step(t: &[f64]) -> Result<f64> {
    if t.len() < 4 {
        return Err(CoreError::InvalidArgument(format!("need at least 4 samples, got {}", t.len())));
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(CoreError::InvalidArgument("time grid must increase".into()));
    }
    for w in t.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt {
            return Err(CoreError::InvalidArgument("time grid must be uniform".into()));
        }
    }
    Ok(dt)
}

/// Local maxima of the zero-padded spectrum of `z`, strongest first, as
/// (frequency MHz, magnitude). Frequencies are refined by parabolic
/// interpolation.
pub fn spectrum_peaks(t: &[f64], z: &[C64]) -> Result<Vec<(f64, f64)>> {
    let dt = uniform_step(t)?;
    let len = (z.len() * 16).next_power_of_two().max(4096);
    let mut buf = vec![C64::new(0.0, 0.0); len];
    buf[..z.len()].copy_from_slice(z);
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let mag: Vec<f64> = buf.iter().map(|c| c.norm()).collect();
    let freq = |k: f64| {
        let k = if k > len as f64 / 2.0 { k - len as f64 } else { k };
        k / (len as f64 * dt)
    };
    let mut peaks = Vec::new();
    for k in 0..len {
        let l = mag[(k + len - 1) % len];
        let c = mag[k];
        let r = mag[(k + 1) % len];
        if c > l && c >= r {
            let denom = l - 2.0 * c + r;
            let shift = if denom != 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
            peaks.push((freq(k as f64 + shift), c));
        }
    }
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(peaks)
}

fn check_pair(x: &[f64], p: &[f64], t: &[f64]) -> Result<()> {
    if x.len() != t.len() || p.len() != t.len() {
        return Err(CoreError::DimensionMismatch { expected: t.len(), got: x.len().min(p.len()) });
    }
    if x.iter().chain(p).all(|v| *v == 0.0) {
        return Err(CoreError::FitFailed { reason: "zero-amplitude input".into(), residual: 0.0 });
    }
    Ok(())
}

fn check_periods(t: &[f64], f: f64) -> Result<()> {
    let span = t[t.len() - 1] - t[0];
    if f.abs() * span < 2.0 {
        return Err(CoreError::FitFailed {
            reason: format!("{:.2} oscillation periods in window, need 2", f.abs() * span),
            residual: f64::NAN,
        });
    }
    Ok(())
}

/// Seeds for a decaying rotation: amplitude, phase and rate after
/// demodulating at `f`.
fn demod_seed(t: &[f64], z: &[C64], f: f64) -> (f64, f64, f64) {
    let w: Vec<C64> = t.iter().zip(z).map(|(&ti, zi)| zi * C64::from_polar(1.0, -2.0 * PI * f * ti)).collect();
    // ln|w| regression over the samples above 5% of the peak.
    let peak = w.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = t.iter().zip(&w).filter(|(_, c)| c.norm() > 0.05 * peak).map(|(&ti, c)| (ti, c.norm().ln())).collect();
    let (slope, intercept) = line_fit(&pts).unwrap_or((0.0, peak.max(1e-300).ln()));
    let gamma = (-slope).max(0.0);
    let phase = t.iter().zip(&w).map(|(&ti, c)| c * (gamma * ti).exp()).sum::<C64>().arg();
    (intercept.exp(), phase, gamma)
}

fn line_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// <X> = A cos(2 pi df t + phi) e^{-Gamma t}, <P> = A sin(...) e^{-Gamma t}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyFit {
    pub a: f64,
    pub delta_f_s: f64,
    pub phi: f64,
    pub gamma_d_s: f64,
    pub residual_norm: f64,
    /// One-sigma uncertainties of (A, delta_f_s, phi, Gamma).
    pub std_errors: [f64; 4],
}

pub fn ramsey_model(t: f64, a: f64, df: f64, phi: f64, gamma: f64) -> (f64, f64) {
    let e = a * (-gamma * t).exp();
    let th = 2.0 * PI * df * t + phi;
    (e * th.cos(), e * th.sin())
}

struct RamseyProblem<'a> {
    t: &'a [f64],
    x: &'a [f64],
    p: &'a [f64],
}

impl LsqProblem for RamseyProblem<'_> {
    fn n_residuals(&self) -> usize {
        2 * self.t.len()
    }

    fn residuals(&self, q: &[f64], out: &mut [f64]) {
        let n = self.t.len();
        for i in 0..n {
            let (mx, mp) = ramsey_model(self.t[i], q[0], q[1], q[2], q[3]);
            out[i] = mx - self.x[i];
            out[n + i] = mp - self.p[i];
        }
    }

    fn jacobian(&self, q: &[f64], jac: &mut DMatrix<f64>) {
        let n = self.t.len();
        for i in 0..n {
            let t = self.t[i];
            let e = (-q[3] * t).exp();
            let th = 2.0 * PI * q[1] * t + q[2];
            let (c, s) = (th.cos(), th.sin());
            jac[(i, 0)] = e * c;
            jac[(i, 1)] = -q[0] * e * s * 2.0 * PI * t;
            jac[(i, 2)] = -q[0] * e * s;
            jac[(i, 3)] = -t * q[0] * e * c;
            jac[(n + i, 0)] = e * s;
            jac[(n + i, 1)] = q[0] * e * c * 2.0 * PI * t;
            jac[(n + i, 2)] = q[0] * e * c;
            jac[(n + i, 3)] = -t * q[0] * e * s;
        }
    }
}

fn wrap(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

fn std_errors<const N: usize>(cov: &DMatrix<f64>) -> [f64; N] {
    let mut out = [0.0; N];
    for (i, o) in out.iter_mut().enumerate() {
        *o = cov[(i, i)].max(0.0).sqrt();
    }
    out
}

/// Joint fit of both quadratures to a single decaying rotation.
pub fn fit_ramsey(x: &[f64], p: &[f64], t: &[f64]) -> Result<RamseyFit> {
    check_pair(x, p, t)?;
    let z: Vec<C64> = x.iter().zip(p).map(|(a, b)| C64::new(*a, *b)).collect();
    let peaks = spectrum_peaks(t, &z)?;
    let f0 = peaks.first().map(|p| p.0).unwrap_or(0.0);
    check_periods(t, f0)?;
    let (a0, phi0, g0) = demod_seed(t, &z, f0);
    let problem = RamseyProblem { t, x, p };
    let rep = levenberg_marquardt(&problem, &[a0, f0, phi0, g0], &[Some(0.0), None, None, Some(0.0)], &LmOptions::default())?;
    let q = &rep.params;
    Ok(RamseyFit {
        a: q[0],
        delta_f_s: q[1],
        phi: wrap(q[2]),
        gamma_d_s: q[3],
        residual_norm: rep.residual_norm,
        std_errors: std_errors(&rep.covariance),
    })
}

/// Two-tone model: an extra rotation at `nu` with relative weight `zeta`
/// and separate phases for the two quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoToneRamseyFit {
    pub a: f64,
    pub delta_f_s: f64,
    pub nu: f64,
    pub zeta: f64,
    pub phi: f64,
    pub psi_x: f64,
    pub psi_p: f64,
    pub gamma_d_s: f64,
    pub residual_norm: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn ramsey_two_tone_model(t: f64, a: f64, df: f64, nu: f64, zeta: f64, phi: f64, psi_x: f64, psi_p: f64, gamma: f64) -> (f64, f64) {
    let e = a * (-gamma * t).exp();
    let th = 2.0 * PI * df * t + phi;
    let tn = 2.0 * PI * nu * t;
    (e * (th.cos() + zeta * (tn + psi_x).cos()), e * (th.sin() + zeta * (tn + psi_p).sin()))
}

struct TwoToneProblem<'a> {
    t: &'a [f64],
    x: &'a [f64],
    p: &'a [f64],
}

impl LsqProblem for TwoToneProblem<'_> {
    fn n_residuals(&self) -> usize {
        2 * self.t.len()
    }

    fn residuals(&self, q: &[f64], out: &mut [f64]) {
        let n = self.t.len();
        for i in 0..n {
            let (mx, mp) = ramsey_two_tone_model(self.t[i], q[0], q[1], q[2], q[3], q[4], q[5], q[6], q[7]);
            out[i] = mx - self.x[i];
            out[n + i] = mp - self.p[i];
        }
    }
}

/// Linear least squares for the six quadrature coefficients at fixed
/// frequencies and decay.
fn two_tone_linear_seed(t: &[f64], x: &[f64], p: &[f64], df: f64, nu: f64, gamma: f64) -> Option<[f64; 6]> {
    let n = t.len();
    let mut design = DMatrix::<f64>::zeros(2 * n, 6);
    let mut rhs = DVector::<f64>::zeros(2 * n);
    for i in 0..n {
        let e = (-gamma * t[i]).exp();
        let (c1, s1) = ((2.0 * PI * df * t[i]).cos() * e, (2.0 * PI * df * t[i]).sin() * e);
        let (c2, s2) = ((2.0 * PI * nu * t[i]).cos() * e, (2.0 * PI * nu * t[i]).sin() * e);
        // X = u c1 - v s1 + pc c2 - q s2 ; P = v c1 + u s1 + r c2 + s s2
        design[(i, 0)] = c1;
        design[(i, 1)] = -s1;
        design[(i, 2)] = c2;
        design[(i, 3)] = -s2;
        design[(n + i, 0)] = s1;
        design[(n + i, 1)] = c1;
        design[(n + i, 4)] = c2;
        design[(n + i, 5)] = s2;
        rhs[i] = x[i];
        rhs[n + i] = p[i];
    }
    let sol = design.svd(true, true).solve(&rhs, 1e-12).ok()?;
    Some([sol[0], sol[1], sol[2], sol[3], sol[4], sol[5]])
}

pub fn fit_ramsey_two_tone(x: &[f64], p: &[f64], t: &[f64]) -> Result<TwoToneRamseyFit> {
    check_pair(x, p, t)?;
    let z: Vec<C64> = x.iter().zip(p).map(|(a, b)| C64::new(*a, *b)).collect();
    let peaks = spectrum_peaks(t, &z)?;
    let span = t[t.len() - 1] - t[0];
    let f1 = peaks.first().map(|p| p.0).unwrap_or(0.0);
    check_periods(t, f1)?;
    let (_, _, g0) = demod_seed(t, &z, f1);
    // Sidelobes of the main tone can outrank the second tone under noise, so
    // start from several candidates and keep the best fit.
    let mut candidates: Vec<f64> = peaks.iter().skip(1).filter(|p| (p.0 - f1).abs() > 1.5 / span).take(4).map(|p| p.0).collect();
    if candidates.is_empty() {
        candidates.push(f1 + 2.0 / span);
    }
    let problem = TwoToneProblem { t, x, p };
    let lower = [Some(0.0), None, None, Some(0.0), None, None, None, Some(0.0)];
    let mut best: Option<LmReport> = None;
    let mut last_err = None;
    for nu0 in candidates {
        let lin = two_tone_linear_seed(t, x, p, f1, nu0, g0).unwrap_or([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let a0 = lin[0].hypot(lin[1]).max(1e-12);
        let phi0 = lin[1].atan2(lin[0]);
        let zeta0 = 0.5 * (lin[2].hypot(lin[3]) + lin[4].hypot(lin[5])) / a0;
        let psi_x0 = lin[3].atan2(lin[2]);
        let psi_p0 = lin[4].atan2(lin[5]);
        match levenberg_marquardt(&problem, &[a0, f1, nu0, zeta0, phi0, psi_x0, psi_p0, g0], &lower, &LmOptions::default()) {
            Ok(rep) if best.as_ref().is_none_or(|b| rep.residual_norm < b.residual_norm) => best = Some(rep),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    let rep = match (best, last_err) {
        (Some(rep), _) => rep,
        (None, Some(e)) => return Err(e),
        (None, None) => unreachable!("at least one candidate"),
    };
    let mut q = rep.params.clone();
    // (nu, psi_x, psi_p) and (-nu, -psi_x, pi - psi_p) give the same model.
    if q[2] < 0.0 {
        q[2] = -q[2];
        q[5] = -q[5];
        q[6] = PI - q[6];
    }
    Ok(TwoToneRamseyFit {
        a: q[0],
        delta_f_s: q[1],
        nu: q[2],
        zeta: q[3],
        phi: wrap(q[4]),
        psi_x: wrap(q[5]),
        psi_p: wrap(q[6]),
        gamma_d_s: q[7],
        residual_norm: rep.residual_norm,
    })
}

/// y = A e^{-Gamma t}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub a: f64,
    pub gamma: f64,
    pub gamma_std: f64,
    pub residual_norm: f64,
}

struct ExpProblem<'a> {
    t: &'a [f64],
    y: &'a [f64],
}

impl LsqProblem for ExpProblem<'_> {
    fn n_residuals(&self) -> usize {
        self.t.len()
    }

    fn residuals(&self, q: &[f64], out: &mut [f64]) {
        for i in 0..self.t.len() {
            out[i] = q[0] * (-q[1] * self.t[i]).exp() - self.y[i];
        }
    }

    fn jacobian(&self, q: &[f64], jac: &mut DMatrix<f64>) {
        for i in 0..self.t.len() {
            let e = (-q[1] * self.t[i]).exp();
            jac[(i, 0)] = e;
            jac[(i, 1)] = -self.t[i] * q[0] * e;
        }
    }
}

pub fn fit_exponential(t: &[f64], y: &[f64]) -> Result<ExpFit> {
    if t.len() != y.len() {
        return Err(CoreError::DimensionMismatch { expected: t.len(), got: y.len() });
    }
    if t.len() < 3 {
        return Err(CoreError::InvalidArgument("need at least 3 samples".into()));
    }
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(_, v)| **v > 0.0).map(|(a, b)| (*a, b.ln())).collect();
    let (slope, icpt) = line_fit(&pts).ok_or_else(|| CoreError::FitFailed { reason: "no positive samples".into(), residual: f64::NAN })?;
    let problem = ExpProblem { t, y };
    let rep = levenberg_marquardt(&problem, &[icpt.exp(), -slope], &[None, None], &LmOptions::default())?;
    Ok(ExpFit { a: rep.params[0], gamma: rep.params[1], gamma_std: rep.covariance[(1, 1)].max(0.0).sqrt(), residual_norm: rep.residual_norm })
}

/// y = slope x + intercept by ordinary least squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(CoreError::InvalidArgument("need at least 2 paired samples".into()));
    }
    let pts: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    let (slope, intercept) = line_fit(&pts).ok_or_else(|| CoreError::FitFailed { reason: "degenerate abscissae".into(), residual: f64::NAN })?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let ssr: f64 = pts.iter().map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let slope_std = if x.len() > 2 { (ssr / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LinearFit { slope, intercept, slope_std })
}

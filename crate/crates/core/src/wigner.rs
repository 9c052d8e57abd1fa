//! Wigner functions, Hermite-function operator maps, density-matrix
//! reconstruction and coherence metrics.
//!
//! Phase space uses alpha = x + i p with X = (a + a^dagger)/2, so the vacuum
//! has variance 1/4 per quadrature and W(0) = 2/pi.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::hilbert::{DensityMatrix, HilbertSpace, StateDiagnostics};

/// Uniform rectangular grid in (x, p).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl Default for GridSpec {
    /// 81 x 81 points over |x|, |p| <= 4.
    fn default() -> Self {
        Self::square(4.0, 81)
    }
}

impl GridSpec {
    pub fn square(extent: f64, n: usize) -> Self {
        Self { x_min: -extent, x_max: extent, nx: n, p_min: -extent, p_max: extent, np: n }
    }

    fn axis(min: f64, max: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![min];
        }
        (0..n).map(|i| min + (max - min) * i as f64 / (n - 1) as f64).collect()
    }

    pub fn x(&self) -> Vec<f64> {
        Self::axis(self.x_min, self.x_max, self.nx)
    }

    pub fn p(&self) -> Vec<f64> {
        Self::axis(self.p_min, self.p_max, self.np)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx.max(2) - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.np.max(2) - 1) as f64
    }

    /// Largest |alpha| on the grid.
    pub fn max_radius(&self) -> f64 {
        let x = self.x_min.abs().max(self.x_max.abs());
        let p = self.p_min.abs().max(self.p_max.abs());
        x.hypot(p)
    }

    fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.np < 2 || !(self.x_max > self.x_min) || !(self.p_max > self.p_min) {
            return Err(CoreError::InvalidArgument("grid needs at least 2 increasing points per axis".into()));
        }
        Ok(())
    }
}

/// Sampled Wigner function, `w[(ix, ip)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub w: Array2<f64>,
    pub note: String,
    /// Non-fatal warnings raised while sampling.
    pub annotations: Vec<String>,
}

pub const ALPHA_CONVENTION: &str = "alpha = x + i p, X = (a + a^dagger)/2";

fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

impl WignerGrid {
    fn weights(&self) -> (Vec<f64>, Vec<f64>) {
        let dx = (self.x[self.x.len() - 1] - self.x[0]) / (self.x.len() - 1) as f64;
        let dp = (self.p[self.p.len() - 1] - self.p[0]) / (self.p.len() - 1) as f64;
        (trapezoid_weights(self.x.len(), dx), trapezoid_weights(self.p.len(), dp))
    }

    /// 2-D trapezoid of f(x, p) W(x, p).
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let (wx, wp) = self.weights();
        let mut s = 0.0;
        for (i, &x) in self.x.iter().enumerate() {
            for (j, &p) in self.p.iter().enumerate() {
                s += wx[i] * wp[j] * f(x, p) * self.w[(i, j)];
            }
        }
        s
    }

    pub fn norm(&self) -> f64 {
        self.integrate(|_, _| 1.0)
    }

    /// Standard deviations (sigma_x, sigma_p) of the quasi-distribution.
    pub fn spread(&self) -> (f64, f64) {
        let n = self.norm();
        let mx = self.integrate(|x, _| x) / n;
        let mp = self.integrate(|_, p| p) / n;
        let vx = self.integrate(|x, _| (x - mx) * (x - mx)) / n;
        let vp = self.integrate(|_, p| (p - mp) * (p - mp)) / n;
        (vx.sqrt(), vp.sqrt())
    }

    /// sqrt(sigma_x sigma_p).
    pub fn geometric_spread(&self) -> f64 {
        let (a, b) = self.spread();
        (a * b).sqrt()
    }
}

/// Exact matrix elements <m|D(beta)|n> for m, n < dim on the infinite space.
pub fn displacement_elements(beta: C64, dim: usize) -> Array2<C64> {
    let mut d = Array2::<C64>::zeros((dim, dim));
    let mut col: Vec<C64> = Vec::with_capacity(dim);
    let mut cur = C64::new((-beta.norm_sqr() / 2.0).exp(), 0.0);
    for m in 0..dim {
        if m > 0 {
            cur = cur * beta / (m as f64).sqrt();
        }
        col.push(cur);
    }
    let bc = beta.conj();
    for n in 0..dim {
        if n > 0 {
            let s = 1.0 / (n as f64).sqrt();
            let mut next = vec![C64::new(0.0, 0.0); dim];
            for m in 0..dim {
                let up = if m > 0 { col[m - 1] * (m as f64).sqrt() } else { C64::new(0.0, 0.0) };
                next[m] = (up - bc * col[m]) * s;
            }
            col = next;
        }
        for m in 0..dim {
            d[(m, n)] = col[m];
        }
    }
    d
}

/// W(alpha) = (2/pi) Tr(rho D(2 alpha) P) at a single point.
pub fn wigner_point(rho: &Array2<C64>, alpha: C64) -> f64 {
    let dim = rho.nrows();
    let d = displacement_elements(alpha * 2.0, dim);
    let mut s = C64::new(0.0, 0.0);
    for n in 0..dim {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        for m in 0..dim {
            s += rho[(n, m)] * d[(m, n)] * sign;
        }
    }
    2.0 / PI * s.re
}

/// Smallest n_max with population above it below 1e-3.
fn support_edge(rho: &Array2<C64>) -> usize {
    let mut tail = 0.0;
    for n in (0..rho.nrows()).rev() {
        tail += rho[(n, n)].re.max(0.0);
        if tail >= 1e-3 {
            return n;
        }
    }
    0
}

/// Displaced-parity Wigner function of a single-mode state.
pub fn wigner(rho: &DensityMatrix, spec: &GridSpec) -> Result<WignerGrid> {
    if rho.space().modes().len() != 1 {
        return Err(CoreError::InvalidArgument("wigner expects a single-mode state; take a partial trace first".into()));
    }
    wigner_matrix(rho.matrix(), spec)
}

pub fn wigner_matrix(rho: &Array2<C64>, spec: &GridSpec) -> Result<WignerGrid> {
    spec.validate()?;
    let x = spec.x();
    let p = spec.p();
    let rows: Vec<Vec<f64>> = x
        .par_iter()
        .map(|&xi| p.iter().map(|&pj| wigner_point(rho, C64::new(xi, pj))).collect())
        .collect();
    let mut w = Array2::<f64>::zeros((x.len(), p.len()));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            w[(i, j)] = *v;
        }
    }
    let mut annotations = Vec::new();
    let need = (support_edge(rho) as f64).sqrt() + 2.0;
    if spec.max_radius() < need {
        annotations.push(format!("grid radius {:.3} below sqrt(n_max) + 2 = {:.3}; tails are clipped", spec.max_radius(), need));
    }
    Ok(WignerGrid { x, p, w, note: ALPHA_CONVENTION.to_string(), annotations })
}

/// Normalized Hermite function psi_n(x) = (2/pi)^{1/4} (2^n n!)^{-1/2}
/// H_n(sqrt(2) x) e^{-x^2} via the stable three-term recurrence.
pub fn hermite_psi(n: usize, x: f64) -> f64 {
    hermite_psi_all(n, x)[n]
}

/// psi_0(x) ..= psi_n(x).
pub fn hermite_psi_all(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let p0 = (2.0 / PI).powf(0.25) * (-x * x).exp();
    out.push(p0);
    if n == 0 {
        return out;
    }
    out.push(2.0 * x * p0);
    for k in 1..n {
        let kf = k as f64;
        let next = 2.0 * x / (kf + 1.0).sqrt() * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

/// Truncated y-grid for the operator-map integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YQuadrature {
    pub points: usize,
    pub extent: f64,
}

impl Default for YQuadrature {
    fn default() -> Self {
        Self { points: 201, extent: 10.0 }
    }
}

/// All operator maps W_{|n><m|} for n, m <= n_max, indexed `maps[n][m]`.
pub fn wigner_maps(n_max: usize, spec: &GridSpec, quad: &YQuadrature) -> Result<Vec<Vec<Array2<C64>>>> {
    spec.validate()?;
    if quad.points < 3 || !(quad.extent > 0.0) {
        return Err(CoreError::InvalidArgument("y quadrature needs >= 3 points and a positive extent".into()));
    }
    let x = spec.x();
    let p = spec.p();
    let ys = GridSpec::axis(-quad.extent, quad.extent, quad.points);
    let wy = trapezoid_weights(ys.len(), ys[1] - ys[0]);
    // e^{-2 i p y} table, [p][y].
    let phase: Vec<Vec<C64>> = p.iter().map(|&pj| ys.iter().map(|&y| C64::from_polar(1.0, -2.0 * pj * y)).collect()).collect();
    let dim = n_max + 1;
    // Per x: maps[n][m][p].
    let per_x: Vec<Vec<Vec<C64>>> = x
        .par_iter()
        .map(|&xi| {
            let plus: Vec<Vec<f64>> = ys.iter().map(|&y| hermite_psi_all(n_max, xi + y / 2.0)).collect();
            let minus: Vec<Vec<f64>> = ys.iter().map(|&y| hermite_psi_all(n_max, xi - y / 2.0)).collect();
            let mut block = vec![vec![C64::new(0.0, 0.0); p.len()]; dim * dim];
            let mut g = vec![0.0; ys.len()];
            for n in 0..dim {
                for m in 0..dim {
                    for (k, gk) in g.iter_mut().enumerate() {
                        *gk = wy[k] * plus[k][n] * minus[k][m];
                    }
                    let dst = &mut block[n * dim + m];
                    for (j, ph) in phase.iter().enumerate() {
                        let mut s = C64::new(0.0, 0.0);
                        for (gk, e) in g.iter().zip(ph) {
                            s += e * *gk;
                        }
                        dst[j] = s / PI;
                    }
                }
            }
            block
        })
        .collect();
    let mut maps = vec![vec![Array2::<C64>::zeros((x.len(), p.len())); dim]; dim];
    for (i, block) in per_x.iter().enumerate() {
        for n in 0..dim {
            for m in 0..dim {
                for j in 0..p.len() {
                    maps[n][m][(i, j)] = block[n * dim + m][j];
                }
            }
        }
    }
    Ok(maps)
}

/// W_{|n><m|}(x, p) on the grid.
pub fn wigner_map_nm(n: usize, m: usize, spec: &GridSpec, quad: &YQuadrature) -> Result<Array2<C64>> {
    let maps = wigner_maps(n.max(m), spec, quad)?;
    Ok(maps[n][m].clone())
}

/// Reconstructed state with quality metrics.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Symmetrized and trace-normalized; positivity is not enforced.
    pub rho: DensityMatrix,
    /// Trace before renormalization.
    pub raw_trace: f64,
    pub diagnostics: StateDiagnostics,
}

/// rho_nm = pi Int conj(W_{|n><m|}) W dx dp by 2-D trapezoid.
pub fn reconstruct_rho(w: &WignerGrid, n_max: usize) -> Result<Reconstruction> {
    reconstruct_rho_with(w, n_max, &YQuadrature::default())
}

pub fn reconstruct_rho_with(w: &WignerGrid, n_max: usize, quad: &YQuadrature) -> Result<Reconstruction> {
    Reconstructor::new(&grid_spec_of(w)?, n_max, quad)?.reconstruct(w)
}

fn grid_spec_of(w: &WignerGrid) -> Result<GridSpec> {
    if w.x.len() < 2 || w.p.len() < 2 {
        return Err(CoreError::Reconstruction("grid needs at least 2 points per axis".into()));
    }
    Ok(GridSpec { x_min: w.x[0], x_max: w.x[w.x.len() - 1], nx: w.x.len(), p_min: w.p[0], p_max: w.p[w.p.len() - 1], np: w.p.len() })
}

/// Operator maps of one grid, reusable across many reconstructions.
#[derive(Debug, Clone)]
pub struct Reconstructor {
    spec: GridSpec,
    n_max: usize,
    maps: Vec<Vec<Array2<C64>>>,
}

impl Reconstructor {
    pub fn new(spec: &GridSpec, n_max: usize, quad: &YQuadrature) -> Result<Self> {
        spec.validate().map_err(|e| CoreError::Reconstruction(e.to_string()))?;
        let mut violations = Vec::new();
        if spec.dx() > 0.1 + 1e-12 {
            violations.push(format!("x step {:.4} > 0.1", spec.dx()));
        }
        if spec.dp() > 0.1 + 1e-12 {
            violations.push(format!("p step {:.4} > 0.1", spec.dp()));
        }
        let need = (n_max as f64).sqrt() + 2.0;
        if spec.max_radius() < need {
            violations.push(format!("grid radius {:.3} < sqrt(n_max) + 2 = {:.3}", spec.max_radius(), need));
        }
        if !violations.is_empty() {
            return Err(CoreError::Reconstruction(violations.join("; ")));
        }
        Ok(Self { spec: spec.clone(), n_max, maps: wigner_maps(n_max, spec, quad)? })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// rho_nm = pi Int conj(W_{|n><m|}) W dx dp by 2-D trapezoid.
    pub fn reconstruct(&self, w: &WignerGrid) -> Result<Reconstruction> {
        if grid_spec_of(w)? != self.spec {
            return Err(CoreError::Reconstruction("Wigner grid differs from the reconstructor grid".into()));
        }
        let (wx, wp) = w.weights();
        let dim = self.n_max + 1;
        let mut rho = Array2::<C64>::zeros((dim, dim));
        for n in 0..dim {
            for m in 0..dim {
                let map = &self.maps[n][m];
                let mut s = C64::new(0.0, 0.0);
                for i in 0..w.x.len() {
                    for j in 0..w.p.len() {
                        s += map[(i, j)].conj() * (w.w[(i, j)] * wx[i] * wp[j]);
                    }
                }
                rho[(n, m)] = s * PI;
            }
        }
        let sym = Array2::from_shape_fn((dim, dim), |(i, j)| (rho[(i, j)] + rho[(j, i)].conj()) * 0.5);
        let raw_trace: f64 = (0..dim).map(|i| sym[(i, i)].re).sum();
        if !(raw_trace.abs() > 1e-12) {
            return Err(CoreError::Reconstruction(format!("reconstructed trace {raw_trace:.3e} vanishes")));
        }
        let normed = sym.mapv(|c| c / raw_trace);
        let diagnostics = StateDiagnostics::of(&normed);
        let space = std::sync::Arc::new(HilbertSpace::single("s", dim)?);
        Ok(Reconstruction { rho: DensityMatrix::from_raw(space, normed), raw_trace, diagnostics })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Moment {
    X,
    P,
    Parity,
}

/// <X> = Int x W, <P> = Int p W, parity = (pi/2) W(0).
pub fn expectation_from_wigner(w: &WignerGrid, which: Moment) -> Result<f64> {
    match which {
        Moment::X => Ok(w.integrate(|x, _| x)),
        Moment::P => Ok(w.integrate(|_, p| p)),
        Moment::Parity => {
            let i = w.x.iter().position(|x| x.abs() < 1e-12);
            let j = w.p.iter().position(|p| p.abs() < 1e-12);
            match (i, j) {
                (Some(i), Some(j)) => Ok(PI / 2.0 * w.w[(i, j)]),
                _ => Err(CoreError::InvalidArgument("the origin is not a grid point".into())),
            }
        }
    }
}

/// S(t) for a yes-no qubit Ramsey sequence with |alpha|^2 photons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityRamseyParams {
    pub alpha: f64,
    /// MHz.
    pub chi_s_yn: f64,
    pub gamma_2_yn: f64,
    pub gamma: f64,
    pub chi_s_s_yn: f64,
}

pub fn parity_ramsey_signal(t: f64, p: &ParityRamseyParams) -> f64 {
    let n = p.alpha * p.alpha;
    let th = 2.0 * PI * p.chi_s_yn * t;
    (n * (th.cos() - 1.0)).exp() * (n * th.sin()).cos() * (-p.gamma_2_yn * t - p.gamma * n * t).exp()
}

/// 2 dtau (1 + 2 |alpha|^2 chi_s_s_yn dtau).
pub fn revival_time(alpha_sq: f64, dtau: f64, chi_s_s_yn: f64) -> f64 {
    2.0 * dtau * (1.0 + 2.0 * alpha_sq * chi_s_s_yn * dtau)
}

/// |rho_nm| / sqrt(rho_nn rho_mm), or `None` when a population is below
/// 1e-6.
pub fn normalized_coherence(rho: &Array2<C64>, n: usize, m: usize) -> Option<f64> {
    let pn = rho[(n, n)].re;
    let pm = rho[(m, m)].re;
    if pn <= 1e-6 || pm <= 1e-6 {
        return None;
    }
    Some(rho[(n, m)].norm() / (pn * pm).sqrt())
}

/// Mean of normalized coherences over pairs n_max >= i > j >= 0; pairs with
/// an undefined coherence are skipped.
pub fn mean_coherence(rho: &Array2<C64>, n_max: usize) -> Option<f64> {
    let top = n_max.min(rho.nrows() - 1);
    let vals: Vec<f64> = (0..=top).flat_map(|i| (0..i).map(move |j| (i, j))).filter_map(|(i, j)| normalized_coherence(rho, i, j)).collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub n_max: usize,
    /// `normalized[n][m]`, `None` where undefined.
    pub normalized: Vec<Vec<Option<f64>>>,
    pub mean: Option<f64>,
}

pub fn coherence_report(rho: &Array2<C64>, n_max: usize) -> CoherenceReport {
    let top = n_max.min(rho.nrows() - 1);
    let normalized = (0..=top).map(|n| (0..=top).map(|m| normalized_coherence(rho, n, m)).collect()).collect();
    CoherenceReport { n_max: top, normalized, mean: mean_coherence(rho, top) }
}

/// e^{-Gamma_phi (n - m)^2 t}.
pub fn natural_decay_prediction(n: usize, m: usize, gamma_phi: f64, t: f64) -> f64 {
    let d = n as f64 - m as f64;
    (-gamma_phi * d * d * t).exp()
}

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::master::{MasterEquation, Rhs};
use crate::error::{CoreError, Result};
use crate::hilbert::{hermiticity_defect, hermitian_eigenvalues, DensityMatrix, Operator};

const TRACE_HARD_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Method {
    /// Classic fourth-order Runge-Kutta with step `dt` (us).
    Rk4 { dt: f64 },
    /// Dormand-Prince 5(4) with error control.
    Adaptive { rtol: f64, atol: f64 },
}

impl Default for Method {
    fn default() -> Self {
        Method::Adaptive { rtol: 1e-8, atol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct Observable {
    pub label: String,
    pub operator: Operator,
}

impl Observable {
    pub fn new(label: impl Into<String>, operator: Operator) -> Self {
        Self { label: label.into(), operator }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolverConfig {
    pub method: Method,
    pub t_start: f64,
    /// Times at which observables are recorded.
    pub output_times: Vec<f64>,
    pub snapshot_times: Vec<f64>,
    pub observables: Vec<Observable>,
    /// Upper bound on adaptive steps, us.
    pub max_step: Option<f64>,
}

impl SolverConfig {
    pub fn new(method: Method) -> Self {
        Self { method, ..Self::default() }
    }

    pub fn times(mut self, times: Vec<f64>) -> Self {
        self.output_times = times;
        self
    }

    pub fn snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn observe(mut self, label: impl Into<String>, operator: Operator) -> Self {
        self.observables.push(Observable::new(label, operator));
        self
    }

    pub fn max_step(mut self, h: f64) -> Self {
        self.max_step = Some(h);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            Method::Rk4 { dt } if !(dt > 0.0) => {
                return Err(CoreError::InvalidArgument(format!("RK4 step {dt} must be > 0")))
            }
            Method::Adaptive { rtol, atol } if !(rtol > 0.0 && atol > 0.0) => {
                return Err(CoreError::InvalidArgument("tolerances must be > 0".into()))
            }
            _ => {}
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return Err(CoreError::InvalidArgument(format!("max_step {h} must be > 0")));
            }
        }
        for &t in self.output_times.iter().chain(&self.snapshot_times) {
            if !(t >= self.t_start) || !t.is_finite() {
                return Err(CoreError::InvalidArgument(format!("requested time {t} precedes t_start {}", self.t_start)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
    pub max_trace_defect: f64,
    pub max_hermiticity_defect: f64,
    /// Smallest eigenvalue seen at any snapshot (1.0 if none requested).
    pub min_snapshot_eigenvalue: f64,
}

impl Default for SolverStats {
    fn default() -> Self {
        Self {
            steps: 0,
            rejected_steps: 0,
            rhs_evaluations: 0,
            max_trace_defect: 0.0,
            max_hermiticity_defect: 0.0,
            min_snapshot_eigenvalue: 1.0,
        }
    }
}

impl SolverStats {
    pub fn merge(&mut self, other: &SolverStats) {
        self.steps += other.steps;
        self.rejected_steps += other.rejected_steps;
        self.rhs_evaluations += other.rhs_evaluations;
        self.max_trace_defect = self.max_trace_defect.max(other.max_trace_defect);
        self.max_hermiticity_defect = self.max_hermiticity_defect.max(other.max_hermiticity_defect);
        self.min_snapshot_eigenvalue = self.min_snapshot_eigenvalue.min(other.min_snapshot_eigenvalue);
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub state: DensityMatrix,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    /// `values[k][i]` is observable `k` at `times[i]`.
    pub values: Vec<Vec<C64>>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: DensityMatrix,
    pub stats: SolverStats,
}

impl Trajectory {
    pub fn observable(&self, label: &str) -> Option<&[C64]> {
        self.labels.iter().position(|l| l == label).map(|k| self.values[k].as_slice())
    }

    /// Real parts of an observable trace.
    pub fn real(&self, label: &str) -> Option<Vec<f64>> {
        self.observable(label).map(|v| v.iter().map(|c| c.re).collect())
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&DensityMatrix> {
        self.snapshots.iter().find(|s| (s.time - t).abs() < 1e-12).map(|s| &s.state)
    }
}

fn trace(n: usize, y: &[C64]) -> C64 {
    (0..n).map(|i| y[i * n + i]).sum()
}

fn symmetrize(n: usize, y: &mut [C64]) {
    for i in 0..n {
        y[i * n + i].im = 0.0;
        for j in i + 1..n {
            let a = y[i * n + j];
            let b = y[j * n + i].conj();
            let m = (a + b) * 0.5;
            y[i * n + j] = m;
            y[j * n + i] = m.conj();
        }
    }
}

struct Work {
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    ynew: Vec<C64>,
    scratch: Vec<C64>,
}

impl Work {
    fn new(len: usize) -> Self {
        let z = || vec![C64::new(0.0, 0.0); len];
        Self { k: [z(), z(), z(), z(), z(), z(), z()], tmp: z(), ynew: z(), scratch: z() }
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Integrator<'a> {
    rhs: &'a Rhs,
    n: usize,
    w: Work,
    stats: SolverStats,
    fsal: bool,
    h: f64,
}

impl<'a> Integrator<'a> {
    fn eval(&mut self, stage: usize, t: f64, src: Src) {
        let y: &[C64] = match src {
            Src::Tmp => &self.w.tmp,
            Src::Ynew => &self.w.ynew,
        };
        let (k, scratch) = (&mut self.w.k[stage], &mut self.w.scratch);
        self.rhs.eval(t, y, k, scratch);
        self.stats.rhs_evaluations += 1;
    }

    fn stage_input(&mut self, y: &[C64], h: f64, stage: usize) {
        let a = &A[stage];
        let tmp = &mut self.w.tmp;
        tmp.copy_from_slice(y);
        for (j, &aj) in a.iter().enumerate().take(stage) {
            if aj != 0.0 {
                let f = h * aj;
                for (t, k) in tmp.iter_mut().zip(&self.w.k[j]) {
                    *t += k * f;
                }
            }
        }
    }

    fn rk4_step(&mut self, t: f64, y: &mut [C64], h: f64) {
        // Reuses the DP stage buffers: k0..k3.
        self.w.tmp.copy_from_slice(y);
        self.eval(0, t, Src::Tmp);
        for (s, c) in [0.5, 0.5, 1.0].into_iter().enumerate() {
            let tmp = &mut self.w.tmp;
            tmp.copy_from_slice(y);
            for (tv, k) in tmp.iter_mut().zip(&self.w.k[s]) {
                *tv += k * (h * c);
            }
            self.eval(s + 1, t + c * h, Src::Tmp);
        }
        for i in 0..y.len() {
            y[i] += (self.w.k[0][i] + self.w.k[1][i] * 2.0 + self.w.k[2][i] * 2.0 + self.w.k[3][i]) * (h / 6.0);
        }
        symmetrize(self.n, y);
        self.stats.steps += 1;
    }

    /// One attempted DP step. Returns the scaled error norm; on acceptance
    /// `ynew` holds the symmetrized result and `k[6]` its derivative.
    fn dp_attempt(&mut self, t: f64, y: &[C64], h: f64, rtol: f64, atol: f64) -> f64 {
        if !self.fsal {
            self.w.tmp.copy_from_slice(y);
            self.eval(0, t, Src::Tmp);
            self.fsal = true;
        }
        for s in 1..6 {
            self.stage_input(y, h, s);
            self.eval(s, t + C[s] * h, Src::Tmp);
        }
        // 5th-order solution.
        {
            let ynew = &mut self.w.ynew;
            ynew.copy_from_slice(y);
            for (j, &b) in A[6].iter().enumerate() {
                if b != 0.0 {
                    let f = h * b;
                    for (yv, k) in ynew.iter_mut().zip(&self.w.k[j]) {
                        *yv += k * f;
                    }
                }
            }
        }
        symmetrize(self.n, &mut self.w.ynew);
        self.eval(6, t + h, Src::Ynew);
        let mut acc = 0.0;
        for i in 0..y.len() {
            let mut e = C64::new(0.0, 0.0);
            for (j, &ej) in E.iter().enumerate() {
                if ej != 0.0 {
                    e += self.w.k[j][i] * ej;
                }
            }
            let scale = atol + rtol * y[i].norm().max(self.w.ynew[i].norm());
            let r = (e * h).norm() / scale;
            acc += r * r;
        }
        (acc / y.len() as f64).sqrt()
    }

    fn advance_adaptive(&mut self, t: &mut f64, y: &mut [C64], t_stop: f64, rtol: f64, atol: f64, max_step: f64) -> Result<()> {
        while *t < t_stop {
            let remaining = t_stop - *t;
            let mut h = self.h.min(max_step);
            let hit_stop = h >= remaining * (1.0 - 1e-12);
            if hit_stop {
                h = remaining;
            }
            if h < 1e-13 * t_stop.abs().max(1.0) {
                return Err(CoreError::Integration { time: *t, reason: format!("step size underflow (h = {h:.3e} us)") });
            }
            let err = self.dp_attempt(*t, y, h, rtol, atol);
            if !err.is_finite() {
                self.fsal = true;
                self.h = h * 0.2;
                self.stats.rejected_steps += 1;
                continue;
            }
            if err <= 1.0 {
                *t = if hit_stop { t_stop } else { *t + h };
                y.copy_from_slice(&self.w.ynew);
                self.w.k.swap(0, 6);
                self.stats.steps += 1;
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // A step shortened to land on a stop says nothing about the
                // natural step size; keep the larger one.
                let proposal = h * factor;
                self.h = if hit_stop { self.h.max(proposal) } else { proposal };
                self.check_trace(*t, y)?;
            } else {
                self.stats.rejected_steps += 1;
                self.h = h * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
        }
        Ok(())
    }

    fn check_trace(&mut self, t: f64, y: &[C64]) -> Result<()> {
        let drift = (trace(self.n, y) - C64::new(1.0, 0.0)).norm();
        self.stats.max_trace_defect = self.stats.max_trace_defect.max(drift);
        if drift > TRACE_HARD_LIMIT || !drift.is_finite() {
            return Err(CoreError::TraceDrift { time: t, drift });
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Src {
    Tmp,
    Ynew,
}

fn record(
    y: &[C64],
    n: usize,
    obs: &[Vec<C64>],
    values: &mut [Vec<C64>],
) {
    for (k, o) in obs.iter().enumerate() {
        let mut s = C64::new(0.0, 0.0);
        for i in 0..n {
            let row = &o[i * n..(i + 1) * n];
            for (kk, a) in row.iter().enumerate() {
                if a.re != 0.0 || a.im != 0.0 {
                    s += a * y[kk * n + i];
                }
            }
        }
        values[k].push(s);
    }
}

/// Integrates the master equation from `rho0` and records the requested
/// observables and snapshots.
pub fn evolve(rho0: &DensityMatrix, meq: &MasterEquation, config: &SolverConfig) -> Result<Trajectory> {
    config.validate()?;
    let n = meq.space().dim();
    if rho0.dim() != n {
        return Err(CoreError::DimensionMismatch { expected: n, got: rho0.dim() });
    }
    for o in &config.observables {
        if o.operator.dim() != n {
            return Err(CoreError::DimensionMismatch { expected: n, got: o.operator.dim() });
        }
    }
    let rhs = meq.rhs();
    debug_assert_eq!(rhs.dim(), n);

    let mut outputs = config.output_times.clone();
    outputs.sort_by(|a, b| a.total_cmp(b));
    outputs.dedup();
    let mut snaps = config.snapshot_times.clone();
    snaps.sort_by(|a, b| a.total_cmp(b));
    snaps.dedup();
    let t_end = outputs.last().copied().unwrap_or(config.t_start).max(snaps.last().copied().unwrap_or(config.t_start));

    let mut stops: Vec<f64> = outputs.iter().chain(&snaps).copied().collect();
    stops.extend(meq.breakpoints().into_iter().filter(|&b| b > config.t_start && b < t_end));
    stops.sort_by(|a, b| a.total_cmp(b));
    stops.dedup();

    let obs: Vec<Vec<C64>> = config.observables.iter().map(|o| o.operator.matrix().iter().copied().collect()).collect();
    let mut values: Vec<Vec<C64>> = vec![Vec::with_capacity(outputs.len()); obs.len()];
    let mut snapshots = Vec::with_capacity(snaps.len());

    let mut y: Vec<C64> = rho0.matrix().iter().copied().collect();
    symmetrize(n, &mut y);
    let mut integ = Integrator {
        rhs: &rhs,
        n,
        w: Work::new(n * n),
        stats: SolverStats { min_snapshot_eigenvalue: 1.0, ..SolverStats::default() },
        fsal: false,
        h: match config.method {
            Method::Rk4 { dt } => dt,
            Method::Adaptive { .. } => 1e-3,
        },
    };
    integ.check_trace(config.t_start, &y)?;

    let mut t = config.t_start;
    let mut oi = 0;
    let mut si = 0;
    let mut handle_stop = |t: f64, y: &[C64], integ: &mut Integrator, oi: &mut usize, si: &mut usize| {
        if *oi < outputs.len() && outputs[*oi] == t {
            record(y, n, &obs, &mut values);
            let m = Array2::from_shape_vec((n, n), y.to_vec()).expect("square buffer");
            integ.stats.max_hermiticity_defect = integ.stats.max_hermiticity_defect.max(hermiticity_defect(&m));
            *oi += 1;
        }
        if *si < snaps.len() && snaps[*si] == t {
            let m = Array2::from_shape_vec((n, n), y.to_vec()).expect("square buffer");
            let ev = hermitian_eigenvalues(&m);
            integ.stats.min_snapshot_eigenvalue = integ.stats.min_snapshot_eigenvalue.min(ev[0]);
            snapshots.push(Snapshot { time: t, state: DensityMatrix::from_raw(rho0.space().clone(), m) });
            *si += 1;
        }
    };
    handle_stop(t, &y, &mut integ, &mut oi, &mut si);

    for &stop in stops.iter().filter(|&&s| s > config.t_start) {
        match config.method {
            Method::Rk4 { dt } => {
                let span = stop - t;
                let steps = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
                let h = span / steps as f64;
                for i in 0..steps {
                    let ti = t + i as f64 * h;
                    integ.rk4_step(ti, &mut y, h);
                    integ.check_trace(ti + h, &y)?;
                }
                t = stop;
            }
            Method::Adaptive { rtol, atol } => {
                let max_step = config.max_step.unwrap_or(f64::INFINITY);
                // The derivative is discontinuous at breakpoints.
                integ.fsal = false;
                integ.advance_adaptive(&mut t, &mut y, stop, rtol, atol, max_step)?;
            }
        }
        handle_stop(t, &y, &mut integ, &mut oi, &mut si);
    }

    let final_state = DensityMatrix::from_raw(rho0.space().clone(), Array2::from_shape_vec((n, n), y).expect("square buffer"));
    Ok(Trajectory {
        times: outputs,
        labels: config.observables.iter().map(|o| o.label.clone()).collect(),
        values,
        snapshots,
        final_state,
        stats: integ.stats,
    })
}

//! Scenario implementations and their canonical configurations.

mod photocount;
mod storage;

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use photocount_core::analysis::TheoryForm;
use photocount_core::drives::DisplacementConvention;
use photocount_core::dynamics::models::{PulseTiming, STORAGE};
use photocount_core::dynamics::{evolve, MasterEquation, SolverConfig, SolverStats, Trajectory};
use photocount_core::hilbert::{hermitian_eigenvalues, DensityMatrix};
use photocount_core::params::SystemParams;
use photocount_core::readout::RabiForm;
use photocount_core::wigner::{wigner, GridSpec, Reconstruction, Reconstructor, WignerGrid, YQuadrature};

use crate::config::{
    AnalysisSettings, DriveSettings, ProbeKind, Resolved, ScenarioConfig, SolverSettings, SweepAxis, TomographySettings,
};
use crate::error::{Result, ScenarioError};
use crate::result::{Table, WignerRecord};
use crate::units::{Frequency, Time, UnitKind};
use crate::Scenario;

pub(crate) struct RunOutput {
    pub tables: Vec<Table>,
    pub wigner: Vec<WignerRecord>,
    pub notes: Vec<String>,
    pub stats: SolverStats,
    pub simulations: usize,
}

#[derive(Default)]
struct Output {
    tables: Vec<Table>,
    wigner: Vec<WignerRecord>,
    notes: Vec<String>,
}

/// Shared state of one run: the resolved config and solver bookkeeping.
struct Ctx<'a> {
    r: &'a Resolved,
    p: SystemParams,
    stats: Mutex<SolverStats>,
    simulations: AtomicUsize,
}

impl<'a> Ctx<'a> {
    fn new(r: &'a Resolved) -> Self {
        Self { r, p: r.params, stats: Mutex::new(SolverStats::default()), simulations: AtomicUsize::new(0) }
    }

    /// Integrates and records stats, including the final state's spectrum.
    fn evolve(&self, rho0: &DensityMatrix, meq: &MasterEquation, cfg: &SolverConfig) -> Result<Trajectory> {
        let tr = evolve(rho0, meq, cfg)?;
        let mut st = tr.stats;
        let min_eig = hermitian_eigenvalues(tr.final_state.matrix()).into_iter().fold(f64::INFINITY, f64::min);
        st.min_snapshot_eigenvalue = st.min_snapshot_eigenvalue.min(min_eig);
        self.record(&st, 1);
        Ok(tr)
    }

    fn record(&self, st: &SolverStats, simulations: usize) {
        self.stats.lock().expect("stats lock").merge(st);
        self.simulations.fetch_add(simulations, Ordering::Relaxed);
    }

    fn drive(&self) -> &DriveSettings {
        self.r.drive()
    }

    fn analysis(&self) -> &AnalysisSettings {
        &self.r.config.analysis
    }
}

pub(crate) fn run(r: &Resolved) -> Result<RunOutput> {
    let ctx = Ctx::new(r);
    let out = match r.scenario {
        Scenario::PhotocountYesno => photocount::yesno(&ctx)?,
        Scenario::PhotocountSingleTone => photocount::single_tone(&ctx)?,
        Scenario::PhotocountMultiplexed => photocount::multiplexed(&ctx)?,
        Scenario::CalibrateDisplacement => photocount::calibrate(&ctx)?,
        Scenario::RabiCalibration => photocount::rabi(&ctx)?,
        Scenario::RamseyStorage => storage::ramsey(&ctx)?,
        Scenario::MidSweep => storage::mid_sweep(&ctx)?,
        Scenario::SingleDriveDecoherence => storage::single_drive(&ctx)?,
        Scenario::CoherenceRevivals => storage::revivals(&ctx)?,
        Scenario::QndCheck => storage::qnd(&ctx)?,
        Scenario::WignerSnapshot => storage::wigner_snapshot(&ctx)?,
    };
    let stats = *ctx.stats.lock().expect("stats lock");
    Ok(RunOutput {
        tables: out.tables,
        wigner: out.wigner,
        notes: out.notes,
        stats,
        simulations: ctx.simulations.load(Ordering::Relaxed),
    })
}

fn missing(name: &str) -> ScenarioError {
    ScenarioError::Config(format!("`{name}` is not set"))
}

fn req<T: Copy>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| missing(name))
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect(),
    }
}

fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2).zip(y.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])).sum()
}

/// Prefactor k of the displacement drive, |beta| = 2 pi k eps area.
fn displacement_prefactor(conv: DisplacementConvention) -> f64 {
    match conv {
        DisplacementConvention::AngularRate => 1.0 / (2.0 * PI),
        DisplacementConvention::LinearFrequency => 1.0,
    }
}

/// Mean photon number of a lossless displacement of peak rate `eps`.
fn nbar_estimate(eps: f64, timing: &PulseTiming, conv: DisplacementConvention) -> f64 {
    let b = 2.0 * PI * displacement_prefactor(conv) * eps * timing.displacement.area();
    b * b
}

/// Peak rate giving a lossless displacement of `nbar` photons.
fn eps_for_nbar(nbar: f64, timing: &PulseTiming, conv: DisplacementConvention) -> f64 {
    nbar.max(0.0).sqrt() / (2.0 * PI * displacement_prefactor(conv) * timing.displacement.area())
}

/// Moves the probe to start `gap` after the displacement ends.
fn with_gap(timing: PulseTiming, gap: f64) -> PulseTiming {
    let start = timing.displacement.end() + gap;
    timing.with_probe_delay(start)
}

/// Three-point parabolic refinement of the sample maximum at `i`.
fn refine(x: &[f64], y: &[f64], i: usize) -> (f64, f64) {
    if i == 0 || i + 1 >= y.len() {
        return (x[i], y[i]);
    }
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let den = y0 - 2.0 * y1 + y2;
    let h = x[i + 1] - x[i];
    if den.abs() < 1e-300 || (x[i] - x[i - 1] - h).abs() > 1e-9 * h.abs().max(1.0) {
        return (x[i], y1);
    }
    let s = 0.5 * (y0 - y2) / den;
    (x[i] + s * h, y1 - 0.25 * (y0 - y2) * s)
}

/// Local maxima above `floor * max`, refined.
fn peaks(x: &[f64], y: &[f64], floor: f64) -> Vec<(f64, f64)> {
    let top = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    photocount_core::analysis::local_maxima(y).into_iter().filter(|&i| y[i] >= floor * top).map(|i| refine(x, y, i)).collect()
}

/// Global maximum, refined.
fn refined_argmax(x: &[f64], y: &[f64]) -> (f64, f64) {
    let i = (0..y.len()).max_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap_or(0);
    refine(x, y, i)
}

/// Non-decreasing up to the maximum and non-increasing after it, up to
/// `tol * max`.
fn is_unimodal(y: &[f64], tol: f64) -> bool {
    let Some(i) = (0..y.len()).max_by(|&a, &b| y[a].total_cmp(&y[b])) else {
        return true;
    };
    let eps = tol * y[i].abs();
    (1..=i).all(|k| y[k] >= y[k - 1] - eps) && (i + 1..y.len()).all(|k| y[k] <= y[k - 1] + eps)
}

/// Storage density matrix, read directly or through Wigner sampling and
/// reconstruction.
struct StorageTomography {
    spec: GridSpec,
    reconstructor: Option<Reconstructor>,
}

struct StorageState {
    direct: Array2<C64>,
    wigner: Option<WignerGrid>,
    reconstruction: Option<Reconstruction>,
}

impl StorageState {
    /// The matrix analyses should read: reconstructed if available.
    fn rho(&self) -> &Array2<C64> {
        self.reconstruction.as_ref().map_or(&self.direct, |r| r.rho.matrix())
    }
}

impl StorageTomography {
    /// `force` samples Wigner grids even when reconstruction is disabled.
    fn new(t: &TomographySettings, force: bool) -> Result<Self> {
        let extent = req(t.extent, "tomography.extent")?;
        let points = req(t.points, "tomography.points")?;
        let spec = GridSpec::square(extent, points);
        let enabled = t.enabled.unwrap_or(false) || force;
        let reconstructor = if enabled {
            Some(Reconstructor::new(&spec, req(t.n_max, "tomography.n_max")?, &YQuadrature::default())?)
        } else {
            None
        };
        Ok(Self { spec, reconstructor })
    }

    fn state(&self, full: &DensityMatrix) -> Result<StorageState> {
        let s = full.partial_trace(STORAGE)?;
        let direct = s.matrix().clone();
        match &self.reconstructor {
            None => Ok(StorageState { direct, wigner: None, reconstruction: None }),
            Some(rec) => {
                let w = wigner(&s, &self.spec)?;
                let r = rec.reconstruct(&w)?;
                Ok(StorageState { direct, wigner: Some(w), reconstruction: Some(r) })
            }
        }
    }
}

/// Largest photon number a scenario resolves, for the truncation check.
pub(crate) fn max_photon_probed(s: Scenario, r: &Resolved) -> Result<Option<usize>> {
    let d = r.drive();
    let p = &r.params;
    let conv = r.model_options().displacement;
    let ceil = |v: f64| v.max(0.0).ceil() as usize;
    let axis_max = |name: &str| r.axes.get(name).map(|v| v.iter().cloned().fold(0.0, f64::max)).unwrap_or(0.0);
    let beta_sq = d.beta.map_or(0.0, |b| b * b);
    let recon = if r.config.tomography.enabled == Some(true) { r.config.tomography.n_max.unwrap_or(0) } else { 0 };
    let k = match s {
        Scenario::PhotocountYesno => {
            let nbar = nbar_estimate(axis_max("eps_max"), &PulseTiming::yes_no(), conv);
            ceil(axis_max("delta_f") / p.chi_s_yn).max(ceil(nbar))
        }
        Scenario::PhotocountSingleTone => {
            let nbar = nbar_estimate(axis_max("eps_max"), &PulseTiming::multiplexing(), conv);
            ceil(axis_max("delta_f") / p.chi_s_mp).max(ceil(nbar))
        }
        Scenario::PhotocountMultiplexed => d.n_tones.unwrap_or(1).saturating_sub(1).max(ceil(axis_max("nbar"))),
        Scenario::CalibrateDisplacement => ceil(nbar_estimate(axis_max("eps_max"), &PulseTiming::multiplexing(), conv)),
        Scenario::RamseyStorage | Scenario::CoherenceRevivals => ceil(beta_sq).max(3),
        Scenario::MidSweep => ceil(beta_sq).max(8),
        Scenario::SingleDriveDecoherence => {
            let n = r.config.analysis.n_max.unwrap_or(0);
            n.max(ceil(axis_max("delta_f") / p.chi_s_mp)).max(ceil(beta_sq)).max(recon)
        }
        Scenario::QndCheck => ceil(beta_sq).max(6),
        Scenario::WignerSnapshot => ceil(beta_sq).max(r.config.tomography.n_max.unwrap_or(0)),
        Scenario::RabiCalibration => return Ok(None),
    };
    Ok(Some(k))
}

fn solver(dim: usize) -> SolverSettings {
    SolverSettings { storage_dim: Some(dim), ..SolverSettings::default() }
}

/// The shipped configuration of each scenario.
pub(crate) fn canonical(s: Scenario) -> ScenarioConfig {
    use UnitKind::{Dimensionless as D, Frequency as F, Rate as R, Time as T, Voltage as V};
    let mut c = ScenarioConfig::new(s);
    let gap = Some(Time(0.0));
    match s {
        Scenario::PhotocountYesno => {
            c.drive.probe_delay = gap;
            c.solver = solver(20);
            c.sweep = vec![SweepAxis::list("eps_max", R, &[0.0, 17.0, 34.0]), SweepAxis::range("delta_f", F, -1.0, 10.0, 111)];
        }
        Scenario::PhotocountSingleTone => {
            c.drive.omega_over_chi = Some(0.25);
            c.drive.probe_delay = gap;
            c.solver = solver(22);
            c.sweep = vec![SweepAxis::list("eps_max", R, &[17.0, 34.0, 50.0]), SweepAxis::range("delta_f", F, -3.0, 48.0, 103)];
        }
        Scenario::PhotocountMultiplexed => {
            c.drive.omega_over_chi = Some(0.5);
            c.drive.n_tones = Some(9);
            c.drive.probe_delay = gap;
            c.solver = solver(20);
            c.sweep = vec![SweepAxis::range("nbar", D, 0.0, 9.0, 19)];
        }
        Scenario::CalibrateDisplacement => {
            c.solver = solver(25);
            c.sweep = vec![SweepAxis::range("eps_max", R, 0.0, 50.0, 11)];
        }
        Scenario::RamseyStorage => {
            c.drive.beta = Some(-1.55);
            c.drive.delta_f_s0 = Some(Frequency(3.96));
            c.solver = solver(14);
            c.sweep = vec![SweepAxis::range("time", T, 0.0, 5.0, 101)];
        }
        Scenario::MidSweep => {
            c.drive.beta = Some(-1.55);
            c.drive.delta_f_s0 = Some(Frequency(3.96));
            c.solver = solver(14);
            c.analysis.two_tone_threshold = Some(0.9);
            c.sweep = vec![SweepAxis::range("omega_over_chi", D, 0.0, 1.2, 13), SweepAxis::range("duration", T, 0.1, 5.0, 50)];
        }
        Scenario::SingleDriveDecoherence => {
            c.drive.beta = Some(-1.7);
            c.drive.omega_over_chi = Some(0.5);
            c.drive.delta_f_s0 = Some(Frequency(0.0));
            c.solver = solver(16);
            c.analysis.fit_start = Some(Time(0.2));
            c.analysis.n_max = Some(4);
            c.analysis.theory_form = Some(TheoryForm::Printed);
            c.analysis.coherence_floor = Some(1e-6);
            c.tomography = TomographySettings { enabled: Some(false), extent: Some(4.5), points: Some(91), n_max: Some(8) };
            c.sweep = vec![SweepAxis::range("delta_f", F, -4.9, 24.5, 13), SweepAxis::range("time", T, 0.0, 2.0, 41)];
        }
        Scenario::CoherenceRevivals => {
            c.drive.beta = Some(-1.55);
            c.drive.delta_f_s0 = Some(Frequency(0.0));
            c.drive.n_tones = Some(9);
            c.solver = solver(14);
            c.sweep = vec![SweepAxis::list("omega_over_chi", D, &[0.25, 0.5, 0.75, 1.0]), SweepAxis::range("time", T, 0.0, 3.0, 151)];
        }
        Scenario::QndCheck => {
            c.drive.beta = Some(-1.55);
            c.drive.delta_f_s0 = Some(Frequency(0.0));
            c.drive.n_tones = Some(9);
            c.solver = solver(14);
            c.sweep = vec![
                SweepAxis::list("omega_over_chi", D, &[0.0, 0.05, 0.09, 0.25, 0.5]),
                SweepAxis::range("time", T, 0.0, 5.0, 21),
            ];
        }
        Scenario::RabiCalibration => {
            c.solver = solver(2);
            c.analysis.rabi_form = Some(RabiForm::Printed);
            c.sweep = vec![SweepAxis::list("v_mp", V, &[0.01, 0.02]), SweepAxis::range("time", T, 0.0, 1.0, 401)];
        }
        Scenario::WignerSnapshot => {
            c.drive.beta = Some(-1.55);
            c.drive.omega_over_chi = Some(0.5);
            c.drive.delta_f_s0 = Some(Frequency(3.96));
            c.drive.n_tones = Some(9);
            c.drive.probe = Some(ProbeKind::Comb);
            c.solver = solver(14);
            c.analysis.n_max = Some(4);
            c.tomography = TomographySettings { enabled: Some(true), extent: Some(4.0), points: Some(81), n_max: Some(8) };
            c.sweep = vec![SweepAxis::list("time", T, &[0.5])];
        }
    }
    c
}

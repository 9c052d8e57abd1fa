//! Device Hamiltonians and dissipators for the storage / yes-no / multiplexing
//! circuit.
//!
//! Mode labels are [`STORAGE`], [`YES_NO`] and [`MULTIPLEXING`]. An idle qubit
//! that starts in |g> and is never driven stays there exactly, so by default it
//! is eliminated and its `sigma_z` replaced by -1.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::master::{Dissipator, MasterEquation};
use crate::drives::{gaussian_comb, DisplacementConvention, DriveForm, DriveSpec, Envelope};
use crate::error::{CoreError, Result};
use crate::hilbert::{
    annihilation, coherent_state, embed, excited_projector, ground_state, number, pauli_x, pauli_y, pauli_z,
    sigma_minus, thermal_state, DensityMatrix, HilbertSpace, Operator,
};
use crate::params::SystemParams;

pub const STORAGE: &str = "s";
pub const YES_NO: &str = "yn";
pub const MULTIPLEXING: &str = "mp";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spectator {
    /// Drop undriven qubits, exact when they start in |g>.
    #[default]
    Eliminate,
    Keep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelOptions {
    pub storage_dim: usize,
    pub spectator: Spectator,
    pub displacement: DisplacementConvention,
    /// Storage energy relaxation (and thermal excitation) channels.
    pub storage_loss: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self { storage_dim: 25, spectator: Spectator::Eliminate, displacement: DisplacementConvention::AngularRate, storage_loss: true }
    }
}

/// Displacement window and qubit probe envelope of one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseTiming {
    pub displacement: Envelope,
    pub probe: Envelope,
}

impl PulseTiming {
    /// 100 ns / 25 ns displacement, then a 1.9 us / 475 ns pi pulse.
    pub fn yes_no() -> Self {
        let displacement = Envelope::gaussian(0.1, 0.025);
        let probe = Envelope::gaussian(1.9, 0.475).delayed(displacement.end());
        Self { displacement, probe }
    }

    /// 100 ns / 25 ns displacement, then a 2 us / 250 ns probe.
    pub fn multiplexing() -> Self {
        let displacement = Envelope::gaussian(0.1, 0.025);
        let probe = Envelope::gaussian(2.0, 0.25).delayed(displacement.end());
        Self { displacement, probe }
    }

    pub fn with_probe_delay(mut self, delay: f64) -> Self {
        self.probe.delay = delay;
        self
    }

    pub fn end(&self) -> f64 {
        self.displacement.end().max(self.probe.end())
    }
}

/// Mode operators on one device space.
#[derive(Debug, Clone)]
pub struct DeviceOps {
    pub space: Arc<HilbertSpace>,
    pub a: Operator,
    pub n: Operator,
    /// n (n - 1).
    pub nn1: Operator,
    pub identity: Operator,
    yn: bool,
    mp: bool,
}

impl DeviceOps {
    pub fn new(storage_dim: usize, yes_no: bool, multiplexing: bool) -> Result<Self> {
        let mut modes = vec![(STORAGE, storage_dim)];
        if yes_no {
            modes.push((YES_NO, 2));
        }
        if multiplexing {
            modes.push((MULTIPLEXING, 2));
        }
        let space = Arc::new(HilbertSpace::new(modes)?);
        let a = embed(&annihilation(storage_dim)?, STORAGE, &space)?;
        let n = embed(&number(storage_dim)?, STORAGE, &space)?;
        let identity = Operator::identity(space.clone());
        let nn1 = n.dot(&n.sub(&identity)?)?;
        Ok(Self { space, a, n, nn1, identity, yn: yes_no, mp: multiplexing })
    }

    pub fn has(&self, label: &str) -> bool {
        match label {
            YES_NO => self.yn,
            MULTIPLEXING => self.mp,
            STORAGE => true,
            _ => false,
        }
    }

    /// Embedded sigma_z, or -1 for an eliminated qubit.
    pub fn sigma_z(&self, label: &str) -> Result<Operator> {
        if self.has(label) {
            embed(&pauli_z(), label, &self.space)
        } else {
            Ok(self.identity.scale_re(-1.0))
        }
    }

    pub fn qubit_op(&self, label: &str, op: &Operator) -> Result<Operator> {
        embed(op, label, &self.space)
    }

    /// X = (a + a^dagger)/2.
    pub fn x_quadrature(&self) -> Operator {
        self.a.add(&self.a.adjoint()).expect("same space").scale_re(0.5)
    }

    /// P = (a - a^dagger)/(2i).
    pub fn p_quadrature(&self) -> Operator {
        self.a.sub(&self.a.adjoint()).expect("same space").scale(C64::new(0.0, -0.5))
    }

    /// thermal(n_th) storage, qubits in |g>.
    pub fn thermal_initial(&self, n_th: f64) -> Result<DensityMatrix> {
        let s = thermal_state(n_th, self.space.mode_dim(STORAGE)?)?;
        self.with_ground_qubits(&s)
    }

    /// |beta> storage, qubits in |g>.
    pub fn coherent_initial(&self, beta: C64) -> Result<DensityMatrix> {
        let s = coherent_state(beta, self.space.mode_dim(STORAGE)?)?;
        self.with_ground_qubits(&s)
    }

    pub fn with_ground_qubits(&self, storage: &DensityMatrix) -> Result<DensityMatrix> {
        let g = ground_state();
        let mut parts: Vec<&DensityMatrix> = vec![storage];
        for _ in 1..self.space.modes().len() {
            parts.push(&g);
        }
        DensityMatrix::tensor(self.space.clone(), &parts)
    }
}

fn lin(terms: &[(f64, &Operator)], space: &Arc<HilbertSpace>) -> Result<Operator> {
    let mut m = Operator::zeros(space.clone()).into_matrix();
    for (c, op) in terms {
        if *c != 0.0 {
            m.scaled_add(C64::new(*c, 0.0), op.matrix());
        }
    }
    Operator::from_matrix(space.clone(), m)
}

/// Static dispersive part shared by the three-mode models, in the frame of
/// the storage at f_s - chi_s_mp/2 - chi_s_yn/2.
fn dispersive_static(p: &SystemParams, ops: &DeviceOps) -> Result<Operator> {
    let szy = ops.sigma_z(YES_NO)?;
    let szm = ops.sigma_z(MULTIPLEXING)?;
    let n_szy = ops.n.dot(&szy)?;
    let n_szm = ops.n.dot(&szm)?;
    let nn1_szy = ops.nn1.dot(&szy)?;
    let nn1_szm = ops.nn1.dot(&szm)?;
    lin(
        &[
            (-p.chi_s_yn / 2.0, &n_szy),
            (-p.chi_s_mp / 2.0, &n_szm),
            (-p.chi_s_s, &ops.nn1),
            (-p.chi_s_s_yn / 2.0, &nn1_szy),
            (-p.chi_s_s_mp / 2.0, &nn1_szm),
        ],
        &ops.space,
    )
}

fn storage_dissipators(p: &SystemParams, ops: &DeviceOps, opts: &ModelOptions, thermal: bool, meq: &mut MasterEquation) -> Result<()> {
    meq.add_dissipator(Dissipator::new("storage dephasing", ops.n.clone(), 2.0 * p.gamma_phi_s()))?;
    if opts.storage_loss {
        let n_th = if thermal { p.n_th_s } else { 0.0 };
        meq.add_dissipator(Dissipator::new("storage loss", ops.a.clone(), (1.0 + n_th) * p.gamma_1_s))?;
        meq.add_dissipator(Dissipator::new("storage excitation", ops.a.adjoint(), n_th * p.gamma_1_s))?;
    }
    Ok(())
}

fn qubit_dissipators(ops: &DeviceOps, label: &str, gamma_1: f64, gamma_phi: f64, meq: &mut MasterEquation) -> Result<()> {
    if !ops.has(label) {
        return Ok(());
    }
    meq.add_dissipator(Dissipator::new(format!("{label} dephasing"), ops.qubit_op(label, &pauli_z())?, gamma_phi / 2.0))?;
    meq.add_dissipator(Dissipator::new(format!("{label} relaxation"), ops.qubit_op(label, &sigma_minus())?, gamma_1))?;
    Ok(())
}

fn displacement_drive(p: &SystemParams, eps_max: f64, timing: &PulseTiming, opts: &ModelOptions) -> DriveSpec {
    DriveSpec::new(STORAGE, DriveForm::Displacement(opts.displacement), eps_max, timing.displacement.clone())
        .detuned((p.chi_s_mp + p.chi_s_yn) / 2.0)
}

fn three_mode(
    p: &SystemParams,
    opts: &ModelOptions,
    driven: &str,
    detuning_term: f64,
    eps_max: f64,
    timing: &PulseTiming,
) -> Result<(DeviceOps, MasterEquation)> {
    p.validate()?;
    let keep = opts.spectator == Spectator::Keep;
    let ops = DeviceOps::new(opts.storage_dim, keep || driven == YES_NO, keep || driven == MULTIPLEXING)?;
    let mut h = dispersive_static(p, &ops)?;
    if detuning_term != 0.0 {
        h = h.add(&ops.qubit_op(driven, &pauli_z())?.scale_re(detuning_term / 2.0))?;
    }
    let mut meq = MasterEquation::new(h);
    if eps_max != 0.0 {
        meq.add_drive(&displacement_drive(p, eps_max, timing, opts))?;
    }
    storage_dissipators(p, &ops, opts, true, &mut meq)?;
    qubit_dissipators(&ops, YES_NO, p.gamma_1_yn, p.gamma_phi_yn(), &mut meq)?;
    qubit_dissipators(&ops, MULTIPLEXING, p.gamma_1_mp, p.gamma_phi_mp(), &mut meq)?;
    Ok((ops, meq))
}

/// Amplitude scale `s` of a quadrature drive `(s/2) g(t) sigma_x` that
/// performs a pi rotation.
pub fn pi_pulse_strength(envelope: &Envelope) -> f64 {
    1.0 / (2.0 * envelope.area())
}

/// Yes-no photocounting: displacement, then a conditional pi pulse on the
/// yes-no qubit in the frame at f_yn - delta_f_yn.
pub fn build_h1_yesno(
    p: &SystemParams,
    delta_f_yn: f64,
    eps_max: f64,
    timing: &PulseTiming,
    pi_pulse: bool,
    opts: &ModelOptions,
) -> Result<(DeviceOps, MasterEquation)> {
    let (ops, mut meq) = three_mode(p, opts, YES_NO, delta_f_yn, eps_max, timing)?;
    if pi_pulse {
        let s = pi_pulse_strength(&timing.probe);
        meq.add_drive(&DriveSpec::new(YES_NO, DriveForm::Quadrature, s, timing.probe.clone()))?;
    }
    Ok((ops, meq))
}

/// Single-tone photocounting: Rabi drive of frequency `omega` on the
/// multiplexing qubit in the frame at f_mp - delta_f_mp.
pub fn build_h2_single_tone(
    p: &SystemParams,
    delta_f_mp: f64,
    omega: f64,
    eps_max: f64,
    timing: &PulseTiming,
    opts: &ModelOptions,
) -> Result<(DeviceOps, MasterEquation)> {
    let (ops, mut meq) = three_mode(p, opts, MULTIPLEXING, delta_f_mp, eps_max, timing)?;
    if omega != 0.0 {
        meq.add_drive(&DriveSpec::new(MULTIPLEXING, DriveForm::Quadrature, omega, timing.probe.clone()))?;
    }
    Ok((ops, meq))
}

/// Multiplexed photocounting: `n_tones` comb on the multiplexing qubit,
/// spaced by chi_s_mp. The comb replaces the probe's tone list.
pub fn build_h3_comb(
    p: &SystemParams,
    omega: f64,
    eps_max: f64,
    n_tones: usize,
    timing: &PulseTiming,
    opts: &ModelOptions,
) -> Result<(DeviceOps, MasterEquation)> {
    let (ops, mut meq) = three_mode(p, opts, MULTIPLEXING, 0.0, eps_max, timing)?;
    if omega != 0.0 {
        let comb = crate::drives::make_comb(n_tones, p.chi_s_mp, Envelope { tones: Vec::new(), ..timing.probe.clone() })?;
        meq.add_drive(&DriveSpec::new(MULTIPLEXING, DriveForm::Ladder, omega, comb))?;
    }
    Ok((ops, meq))
}

/// Storage displacement alone, both qubits eliminated.
pub fn build_displacement_only(
    p: &SystemParams,
    eps_max: f64,
    timing: &PulseTiming,
    opts: &ModelOptions,
) -> Result<(DeviceOps, MasterEquation)> {
    p.validate()?;
    let ops = DeviceOps::new(opts.storage_dim, false, false)?;
    let h = dispersive_static(p, &ops)?;
    let mut meq = MasterEquation::new(h);
    meq.add_drive(&displacement_drive(p, eps_max, timing, opts))?;
    storage_dissipators(p, &ops, opts, true, &mut meq)?;
    Ok((ops, meq))
}

/// Storage + multiplexing qubit under an arbitrary probe envelope, in the
/// frame of the qubit and of the storage at f_s + delta_f_s0.
pub fn build_h4_with_probe(
    p: &SystemParams,
    omega: f64,
    delta_f_s0: f64,
    probe: &Envelope,
    opts: &ModelOptions,
) -> Result<(DeviceOps, MasterEquation)> {
    p.validate()?;
    let ops = DeviceOps::new(opts.storage_dim, false, true)?;
    let pe = ops.qubit_op(MULTIPLEXING, &excited_projector())?;
    let pe_n = pe.dot(&ops.n)?;
    let pe_nn1 = pe.dot(&ops.nn1)?;
    let h = lin(&[(-p.chi_s_mp, &pe_n), (-delta_f_s0, &ops.n), (-p.chi_s_s_mp, &pe_nn1)], &ops.space)?;
    let mut meq = MasterEquation::new(h);
    if omega != 0.0 {
        meq.add_drive(&DriveSpec::new(MULTIPLEXING, DriveForm::Ladder, omega, probe.clone()))?;
    }
    storage_dissipators(p, &ops, opts, false, &mut meq)?;
    qubit_dissipators(&ops, MULTIPLEXING, p.gamma_1_mp, p.gamma_phi_mp(), &mut meq)?;
    Ok((ops, meq))
}

/// Measurement-induced dephasing model: nine-tone comb on a Gaussian of the
/// given duration and width duration/4.
pub fn build_h4_mid(
    p: &SystemParams,
    omega: f64,
    delta_f_s0: f64,
    duration: f64,
    opts: &ModelOptions,
) -> Result<(DeviceOps, MasterEquation)> {
    if !(duration > 0.0) {
        return Err(CoreError::InvalidArgument(format!("pulse duration {duration} must be > 0")));
    }
    build_h4_with_probe(p, omega, delta_f_s0, &gaussian_comb(9, p.chi_s_mp, duration)?, opts)
}

/// Undriven lab-frame Hamiltonian of storage + two qubits, MHz, with the
/// anharmonic qubits truncated to two levels.
pub fn build_full_hamiltonian(p: &SystemParams, storage_dim: usize) -> Result<(DeviceOps, Operator)> {
    p.validate()?;
    let ops = DeviceOps::new(storage_dim, true, true)?;
    let ny = ops.qubit_op(YES_NO, &excited_projector())?;
    let nm = ops.qubit_op(MULTIPLEXING, &excited_projector())?;
    let n_ny = ops.n.dot(&ny)?;
    let n_nm = ops.n.dot(&nm)?;
    let h = lin(
        &[
            (p.f_s * 1e3, &ops.n),
            (p.f_yn * 1e3, &ny),
            (p.f_mp * 1e3, &nm),
            (-p.chi_s_yn, &n_ny),
            (-p.chi_s_mp, &n_nm),
            (-p.chi_s_s, &ops.nn1),
        ],
        &ops.space,
    )?;
    Ok((ops, h))
}

/// Convenience observables on a device space.
pub fn sigma_y_mp(ops: &DeviceOps) -> Result<Operator> {
    ops.qubit_op(MULTIPLEXING, &pauli_y())
}

pub fn sigma_x_mp(ops: &DeviceOps) -> Result<Operator> {
    ops.qubit_op(MULTIPLEXING, &pauli_x())
}

pub fn sigma_z_yn(ops: &DeviceOps) -> Result<Operator> {
    ops.qubit_op(YES_NO, &pauli_z())
}

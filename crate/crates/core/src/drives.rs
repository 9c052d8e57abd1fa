//! Drive envelopes (Gaussian, square, frequency comb) and drive specifications.
//!
//! All frequencies are linear, in MHz; times are in us. The complex value of
//! an envelope is the coefficient of the raising operator of the driven mode
//! in a frame rotating at the carrier. A tone offset `df` below the carrier
//! therefore contributes `exp(-2 pi i df t)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::hilbert::{annihilation, embed, HilbertSpace, Operator};

/// Window shape of an envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    Gaussian { width: f64 },
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeKind {
    Gaussian,
    Square,
    Comb,
}

/// One comb tone: offset from the carrier (MHz) and relative phase (rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub offset: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub shape: Shape,
    pub duration: f64,
    pub amplitude: f64,
    pub delay: f64,
    pub phase: f64,
    /// Empty unless the envelope is a comb.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tones: Vec<Tone>,
}

impl Envelope {
    pub fn gaussian(duration: f64, width: f64) -> Self {
        Self { shape: Shape::Gaussian { width }, duration, amplitude: 1.0, delay: 0.0, phase: 0.0, tones: Vec::new() }
    }

    pub fn square(duration: f64) -> Self {
        Self { shape: Shape::Square, duration, amplitude: 1.0, delay: 0.0, phase: 0.0, tones: Vec::new() }
    }

    pub fn delayed(mut self, delay: f64) -> Self {
        self.delay = delay;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn kind(&self) -> EnvelopeKind {
        if !self.tones.is_empty() {
            return EnvelopeKind::Comb;
        }
        match self.shape {
            Shape::Gaussian { .. } => EnvelopeKind::Gaussian,
            Shape::Square => EnvelopeKind::Square,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(CoreError::InvalidArgument(format!("envelope duration {} must be > 0", self.duration)));
        }
        if let Shape::Gaussian { width } = self.shape {
            if !(width > 0.0) {
                return Err(CoreError::InvalidArgument(format!("gaussian width {width} must be > 0")));
            }
        }
        if !self.delay.is_finite() || !self.amplitude.is_finite() || !self.phase.is_finite() {
            return Err(CoreError::InvalidArgument("envelope parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn start(&self) -> f64 {
        self.delay
    }

    pub fn end(&self) -> f64 {
        self.delay + self.duration
    }

    pub fn center(&self) -> f64 {
        self.delay + self.duration / 2.0
    }

    /// Real window value including amplitude, zero outside the support.
    pub fn window(&self, t: f64) -> f64 {
        if t < self.start() || t > self.end() {
            return 0.0;
        }
        match self.shape {
            Shape::Square => self.amplitude,
            Shape::Gaussian { width } => {
                let x = t - self.center();
                self.amplitude * (-x * x / (2.0 * width * width)).exp()
            }
        }
    }

    /// Unwindowed tone sum; 1 for non-comb envelopes.
    pub fn oscillatory_factor(&self, t: f64) -> C64 {
        if self.tones.is_empty() {
            return C64::new(1.0, 0.0);
        }
        self.tones.iter().map(|tone| C64::from_polar(1.0, -2.0 * PI * tone.offset * t + tone.phase)).sum()
    }

    pub fn evaluate(&self, t: f64) -> C64 {
        let w = self.window(t);
        if w == 0.0 {
            return C64::new(0.0, 0.0);
        }
        C64::from_polar(w, self.phase) * self.oscillatory_factor(t)
    }

    /// Integral of the real window over its support (Simpson, 4000 panels).
    pub fn area(&self) -> f64 {
        let n = 4000;
        let h = self.duration / n as f64;
        let mut s = self.window(self.start()) + self.window(self.end());
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * self.window(self.start() + i as f64 * h);
        }
        s * h / 3.0
    }

    /// Times where the envelope or its derivative jumps.
    pub fn breakpoints(&self) -> [f64; 2] {
        [self.start(), self.end()]
    }
}

/// Comb of `n_tones` tones descending from the carrier by `spacing` MHz.
pub fn make_comb(n_tones: usize, spacing: f64, base: Envelope) -> Result<Envelope> {
    if n_tones < 1 {
        return Err(CoreError::InvalidArgument("a comb needs at least one tone".into()));
    }
    let tones = (0..n_tones).map(|k| Tone { offset: -(k as f64) * spacing, phase: 0.0 }).collect();
    Ok(Envelope { tones, ..base })
}

/// Comb on a Gaussian base of width `duration / 4`.
pub fn gaussian_comb(n_tones: usize, spacing: f64, duration: f64) -> Result<Envelope> {
    make_comb(n_tones, spacing, Envelope::gaussian(duration, duration / 4.0))
}

/// Normalization of a displacement drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisplacementConvention {
    /// Strength is an angular rate; the Hamiltonian carries 1/(2 pi).
    #[default]
    AngularRate,
    /// Strength is a linear frequency; no 1/(2 pi).
    LinearFrequency,
}

/// Operator structure of a drive on mode `b` with coefficient `c(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriveForm {
    /// (s/2)(c b^dagger + c* b).
    Ladder,
    /// (s/2) Re(c) (b + b^dagger).
    Quadrature,
    /// k s (c b^dagger + c* b) with k from the convention.
    Displacement(DisplacementConvention),
}

pub type Coefficient = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

/// An operator with a scalar time-dependent coefficient, `f(t) O`.
#[derive(Clone)]
pub struct DriveTerm {
    pub operator: Operator,
    pub coefficient: Coefficient,
    pub breakpoints: Vec<f64>,
}

impl std::fmt::Debug for DriveTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DriveTerm").field("dim", &self.operator.dim()).field("breakpoints", &self.breakpoints).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub target: String,
    pub form: DriveForm,
    /// Rabi frequency or displacement rate, MHz.
    pub strength: f64,
    pub envelope: Envelope,
    /// Carrier offset from the frame, MHz.
    pub detuning: f64,
}

impl DriveSpec {
    pub fn new(target: impl Into<String>, form: DriveForm, strength: f64, envelope: Envelope) -> Self {
        Self { target: target.into(), form, strength, envelope, detuning: 0.0 }
    }

    pub fn detuned(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strength >= 0.0) || !self.strength.is_finite() {
            return Err(CoreError::InvalidArgument(format!("drive strength {} must be >= 0", self.strength)));
        }
        self.envelope.validate()
    }

    /// c(t) = envelope(t) exp(-2 pi i detuning t).
    pub fn coefficient(&self, t: f64) -> C64 {
        let e = self.envelope.evaluate(t);
        if self.detuning == 0.0 {
            e
        } else {
            e * C64::from_polar(1.0, -2.0 * PI * self.detuning * t)
        }
    }

    /// Expands the drive into operator terms on `space`.
    pub fn terms(&self, space: &Arc<HilbertSpace>) -> Result<Vec<DriveTerm>> {
        self.validate()?;
        let b = embed(&annihilation(space.mode_dim(&self.target)?)?, &self.target, space)?;
        let bd = b.adjoint();
        let bp = self.envelope.breakpoints().to_vec();
        let spec = Arc::new(self.clone());
        let prefactor = match self.form {
            DriveForm::Ladder => 0.5,
            DriveForm::Displacement(DisplacementConvention::AngularRate) => 1.0 / (2.0 * PI),
            DriveForm::Displacement(DisplacementConvention::LinearFrequency) => 1.0,
            DriveForm::Quadrature => {
                let s = spec.clone();
                let k = 0.5 * self.strength;
                return Ok(vec![DriveTerm {
                    operator: b.add(&bd)?,
                    coefficient: Arc::new(move |t| C64::new(k * s.coefficient(t).re, 0.0)),
                    breakpoints: bp,
                }]);
            }
        };
        let k = prefactor * self.strength;
        let s1 = spec.clone();
        let s2 = spec;
        Ok(vec![
            DriveTerm { operator: bd, coefficient: Arc::new(move |t| s1.coefficient(t) * k), breakpoints: bp.clone() },
            DriveTerm { operator: b, coefficient: Arc::new(move |t| s2.coefficient(t).conj() * k), breakpoints: bp },
        ])
    }
}

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use super::sparse::Sparse;
use crate::drives::{Coefficient, DriveSpec, DriveTerm};
use crate::error::{CoreError, Result};
use crate::hilbert::{HilbertSpace, Operator};

/// A collapse operator `c` with rate `gamma`, contributing `gamma L(c)`.
#[derive(Debug, Clone)]
pub struct Dissipator {
    pub label: String,
    pub operator: Operator,
    pub rate: f64,
}

impl Dissipator {
    pub fn new(label: impl Into<String>, operator: Operator, rate: f64) -> Self {
        Self { label: label.into(), operator, rate }
    }
}

/// H(t)/h = H0 + sum_k f_k(t) O_k in MHz, plus dissipators in 1/us.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    space: Arc<HilbertSpace>,
    static_h: Operator,
    terms: Vec<DriveTerm>,
    dissipators: Vec<Dissipator>,
}

impl MasterEquation {
    pub fn new(static_h: Operator) -> Self {
        Self { space: static_h.space().clone(), static_h, terms: Vec::new(), dissipators: Vec::new() }
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn static_hamiltonian(&self) -> &Operator {
        &self.static_h
    }

    pub fn dissipators(&self) -> &[Dissipator] {
        &self.dissipators
    }

    pub fn drive_terms(&self) -> &[DriveTerm] {
        &self.terms
    }

    pub fn with_drive(mut self, spec: &DriveSpec) -> Result<Self> {
        self.add_drive(spec)?;
        Ok(self)
    }

    pub fn add_drive(&mut self, spec: &DriveSpec) -> Result<()> {
        for term in spec.terms(&self.space)? {
            self.add_term(term)?;
        }
        Ok(())
    }

    pub fn add_term(&mut self, term: DriveTerm) -> Result<()> {
        if term.operator.dim() != self.space.dim() {
            return Err(CoreError::DimensionMismatch { expected: self.space.dim(), got: term.operator.dim() });
        }
        self.terms.push(term);
        Ok(())
    }

    pub fn add_coefficient_term(&mut self, operator: Operator, coefficient: Coefficient, breakpoints: Vec<f64>) -> Result<()> {
        self.add_term(DriveTerm { operator, coefficient, breakpoints })
    }

    pub fn with_dissipator(mut self, d: Dissipator) -> Result<Self> {
        self.add_dissipator(d)?;
        Ok(self)
    }

    /// Zero-rate dissipators are accepted and dropped.
    pub fn add_dissipator(&mut self, d: Dissipator) -> Result<()> {
        if !(d.rate >= 0.0) || !d.rate.is_finite() {
            return Err(CoreError::InvalidArgument(format!("dissipator `{}` has rate {} < 0", d.label, d.rate)));
        }
        if d.operator.dim() != self.space.dim() {
            return Err(CoreError::DimensionMismatch { expected: self.space.dim(), got: d.operator.dim() });
        }
        if d.rate > 0.0 {
            self.dissipators.push(d);
        }
        Ok(())
    }

    /// H(t)/h in MHz.
    pub fn hamiltonian(&self, t: f64) -> Operator {
        let mut m = self.static_h.matrix().clone();
        for term in &self.terms {
            let f = (term.coefficient)(t);
            if f != C64::new(0.0, 0.0) {
                m.scaled_add(f, term.operator.matrix());
            }
        }
        Operator::from_matrix(self.space.clone(), m).expect("dimensions match by construction")
    }

    /// Largest Hermiticity defect of H(t) over `times`.
    pub fn hermiticity_defect(&self, times: &[f64]) -> f64 {
        times.iter().map(|&t| self.hamiltonian(t).hermiticity_defect()).fold(0.0, f64::max)
    }

    pub fn validate(&self, times: &[f64]) -> Result<()> {
        let defect = self.hermiticity_defect(times);
        if defect > 1e-10 {
            return Err(CoreError::InvalidArgument(format!("hamiltonian is not Hermitian (defect {defect:.3e})")));
        }
        Ok(())
    }

    /// Sorted, deduplicated discontinuity times of all drive terms.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut bp: Vec<f64> = self.terms.iter().flat_map(|t| t.breakpoints.iter().copied()).collect();
        bp.sort_by(|a, b| a.total_cmp(b));
        bp.dedup();
        bp
    }

    pub(crate) fn rhs(&self) -> Rhs {
        let n = self.space.dim();
        let two_pi = C64::new(2.0 * PI, 0.0);
        let mut k0 = self.static_h.matrix() * two_pi;
        let mut jumps = Vec::with_capacity(self.dissipators.len());
        for d in &self.dissipators {
            let c = d.operator.matrix();
            let cdc = crate::hilbert::dagger(c).dot(c);
            k0.scaled_add(C64::new(0.0, -0.5 * d.rate), &cdc);
            jumps.push((Sparse::from_dense(c), d.rate));
        }
        let drives = self
            .terms
            .iter()
            .map(|t| (Sparse::from_dense(&(t.operator.matrix() * two_pi)), t.coefficient.clone()))
            .collect();
        Rhs { n, k0: Sparse::from_dense(&k0), drives, jumps }
    }
}

/// rho' = -i (K rho - (K rho)^dagger) + sum gamma c rho c^dagger with
/// K = 2 pi H - (i/2) sum gamma c^dagger c.
pub(crate) struct Rhs {
    n: usize,
    k0: Sparse,
    drives: Vec<(Sparse, Coefficient)>,
    jumps: Vec<(Sparse, f64)>,
}

impl Rhs {
    pub fn dim(&self) -> usize {
        self.n
    }

    #[allow(dead_code)]
    pub fn nnz(&self) -> usize {
        self.k0.nnz() + self.drives.iter().map(|d| d.0.nnz()).sum::<usize>()
    }

    pub fn eval(&self, t: f64, rho: &[C64], out: &mut [C64], scratch: &mut [C64]) {
        let n = self.n;
        scratch.fill(C64::new(0.0, 0.0));
        self.k0.mul_acc(C64::new(1.0, 0.0), rho, scratch);
        for (op, f) in &self.drives {
            let c = f(t);
            if c.re != 0.0 || c.im != 0.0 {
                op.mul_acc(c, rho, scratch);
            }
        }
        for i in 0..n {
            for j in 0..n {
                let d = scratch[i * n + j] - scratch[j * n + i].conj();
                out[i * n + j] = C64::new(d.im, -d.re);
            }
        }
        for (op, g) in &self.jumps {
            op.sandwich_acc(*g, rho, out);
        }
    }
}

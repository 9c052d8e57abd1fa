//! Truncated Hilbert spaces, mode operators, embeddings and canonical states.
//!
//! Qubits use the basis order (|g>, |e>) with `sigma_z = diag(-1, +1)`.
//! Oscillators use Fock order `0..dim`. Composite spaces follow the Kronecker
//! order of their mode list, first mode most significant.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

const HERMITICITY_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-8;
const POSITIVITY_TOL: f64 = -1e-7;

/// A single named mode of a composite space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mode {
    pub label: String,
    pub dim: usize,
}

/// Ordered tensor product of truncated modes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertSpace {
    modes: Vec<Mode>,
}

impl HilbertSpace {
    pub fn new<I, S>(modes: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut out: Vec<Mode> = Vec::new();
        for (label, dim) in modes {
            let label = label.into();
            if dim < 2 {
                return Err(CoreError::InvalidDimension(dim));
            }
            if out.iter().any(|m| m.label == label) {
                return Err(CoreError::DuplicateLabel(label));
            }
            out.push(Mode { label, dim });
        }
        if out.is_empty() {
            return Err(CoreError::InvalidArgument("a space needs at least one mode".into()));
        }
        Ok(Self { modes: out })
    }

    pub fn single(label: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new([(label.into(), dim)])
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn dim(&self) -> usize {
        self.modes.iter().map(|m| m.dim).product()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m.label == label)
            .ok_or_else(|| CoreError::UnknownLabel(label.to_string()))
    }

    pub fn mode_dim(&self, label: &str) -> Result<usize> {
        Ok(self.modes[self.index_of(label)?].dim)
    }

    /// Dimensions of all modes, in Kronecker order.
    pub fn dims(&self) -> Vec<usize> {
        self.modes.iter().map(|m| m.dim).collect()
    }
}

impl fmt::Display for HilbertSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.modes.iter().map(|m| format!("{}[{}]", m.label, m.dim)).collect();
        write!(f, "{}", parts.join(" x "))
    }
}

fn single_space(dim: usize) -> Result<Arc<HilbertSpace>> {
    Ok(Arc::new(HilbertSpace::single("mode", dim)?))
}

/// Dense operator on a [`HilbertSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: Arc<HilbertSpace>,
    matrix: Array2<C64>,
}

impl Operator {
    pub fn from_matrix(space: Arc<HilbertSpace>, matrix: Array2<C64>) -> Result<Self> {
        let dim = space.dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(CoreError::DimensionMismatch { expected: dim, got: matrix.nrows().max(matrix.ncols()) });
        }
        Ok(Self { space, matrix: matrix.as_standard_layout().to_owned() })
    }

    pub fn identity(space: Arc<HilbertSpace>) -> Self {
        let matrix = Array2::eye(space.dim());
        Self { space, matrix }
    }

    pub fn zeros(space: Arc<HilbertSpace>) -> Self {
        let d = space.dim();
        Self { space, matrix: Array2::zeros((d, d)) }
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self { space: self.space.clone(), matrix: dagger(&self.matrix) }
    }

    pub fn dot(&self, other: &Operator) -> Result<Operator> {
        self.check_same(other)?;
        Ok(Self { space: self.space.clone(), matrix: self.matrix.dot(&other.matrix) })
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.check_same(other)?;
        Ok(Self { space: self.space.clone(), matrix: &self.matrix + &other.matrix })
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        self.check_same(other)?;
        Ok(Self { space: self.space.clone(), matrix: &self.matrix - &other.matrix })
    }

    pub fn scale(&self, c: C64) -> Operator {
        Self { space: self.space.clone(), matrix: &self.matrix * c }
    }

    pub fn scale_re(&self, c: f64) -> Operator {
        self.scale(C64::new(c, 0.0))
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        self.dot(other)?.sub(&other.dot(self)?)
    }

    pub fn trace(&self) -> C64 {
        self.matrix.diag().sum()
    }

    /// Largest elementwise |A - A^dagger|.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.matrix)
    }

    /// Eigenvalues of the Hermitian part (A + A^dagger)/2, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// Matrix exponential by scaling and squaring.
    pub fn expm(&self) -> Operator {
        Self { space: self.space.clone(), matrix: expm(&self.matrix) }
    }

    /// Max elementwise |A^dagger A - I|.
    pub fn unitarity_defect(&self) -> f64 {
        let p = dagger(&self.matrix).dot(&self.matrix);
        let mut worst = 0.0f64;
        for ((i, j), v) in p.indexed_iter() {
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            worst = worst.max((v - target).norm());
        }
        worst
    }

    /// Max elementwise |A - B|.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        max_abs_diff(&self.matrix, &other.matrix)
    }

    fn check_same(&self, other: &Operator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(CoreError::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(())
    }
}

/// Diagnostics of a candidate density matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateDiagnostics {
    pub hermiticity_defect: f64,
    pub trace_defect: f64,
    pub min_eigenvalue: f64,
}

impl StateDiagnostics {
    pub fn of(matrix: &Array2<C64>) -> Self {
        let trace: C64 = matrix.diag().sum();
        let eig = hermitian_eigenvalues(matrix);
        Self {
            hermiticity_defect: hermiticity_defect(matrix),
            trace_defect: (trace - C64::new(1.0, 0.0)).norm(),
            min_eigenvalue: eig.first().copied().unwrap_or(0.0),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.hermiticity_defect <= HERMITICITY_TOL
            && self.trace_defect <= TRACE_TOL
            && self.min_eigenvalue >= POSITIVITY_TOL
    }
}

/// Validated density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: Arc<HilbertSpace>,
    matrix: Array2<C64>,
}

impl DensityMatrix {
    /// Checks Hermiticity, unit trace and positivity.
    pub fn new(space: Arc<HilbertSpace>, matrix: Array2<C64>) -> Result<Self> {
        let dim = space.dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(CoreError::DimensionMismatch { expected: dim, got: matrix.nrows() });
        }
        let diag = StateDiagnostics::of(&matrix);
        if diag.hermiticity_defect > HERMITICITY_TOL {
            return Err(CoreError::InvalidState(format!(
                "hermiticity defect {:.3e}",
                diag.hermiticity_defect
            )));
        }
        if diag.trace_defect > TRACE_TOL {
            return Err(CoreError::InvalidState(format!("trace defect {:.3e}", diag.trace_defect)));
        }
        if diag.min_eigenvalue < POSITIVITY_TOL {
            return Err(CoreError::InvalidState(format!("minimum eigenvalue {:.3e}", diag.min_eigenvalue)));
        }
        Ok(Self { space, matrix: matrix.as_standard_layout().to_owned() })
    }

    /// Wraps an integrator output without the eigen check. Callers record
    /// diagnostics separately.
    pub(crate) fn from_raw(space: Arc<HilbertSpace>, matrix: Array2<C64>) -> Self {
        Self { space, matrix }
    }

    /// Projector onto a normalized copy of `ket`.
    pub fn pure(space: Arc<HilbertSpace>, ket: &[C64]) -> Result<Self> {
        let dim = space.dim();
        if ket.len() != dim {
            return Err(CoreError::DimensionMismatch { expected: dim, got: ket.len() });
        }
        let norm = ket.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(CoreError::InvalidState("zero state vector".into()));
        }
        let v: Vec<C64> = ket.iter().map(|c| c / norm).collect();
        let m = Array2::from_shape_fn((dim, dim), |(i, j)| v[i] * v[j].conj());
        Ok(Self { space, matrix: m })
    }

    /// Fock state |n> on a single mode.
    pub fn fock(n: usize, dim: usize) -> Result<Self> {
        let space = single_space(dim)?;
        if n >= dim {
            return Err(CoreError::InvalidArgument(format!("Fock index {n} outside dimension {dim}")));
        }
        let mut m = Array2::zeros((dim, dim));
        m[(n, n)] = C64::new(1.0, 0.0);
        Ok(Self { space, matrix: m })
    }

    /// Kronecker product of single-mode states, relabelled onto `space`.
    pub fn tensor(space: Arc<HilbertSpace>, parts: &[&DensityMatrix]) -> Result<Self> {
        let dims = space.dims();
        if dims.len() != parts.len() {
            return Err(CoreError::DimensionMismatch { expected: dims.len(), got: parts.len() });
        }
        let mut acc = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
        for (d, p) in dims.iter().zip(parts) {
            if p.dim() != *d {
                return Err(CoreError::DimensionMismatch { expected: *d, got: p.dim() });
            }
            acc = kron(&acc, &p.matrix);
        }
        Ok(Self { space, matrix: acc })
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn element(&self, n: usize, m: usize) -> C64 {
        self.matrix[(n, m)]
    }

    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diag().iter().map(|c| c.re).collect()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.diag().sum()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn diagnostics(&self) -> StateDiagnostics {
        StateDiagnostics::of(&self.matrix)
    }

    /// Tr(A rho).
    pub fn expect(&self, op: &Operator) -> Result<C64> {
        if op.dim() != self.dim() {
            return Err(CoreError::DimensionMismatch { expected: self.dim(), got: op.dim() });
        }
        Ok(trace_product(op.matrix(), &self.matrix))
    }

    /// Reduced state of one mode.
    pub fn partial_trace(&self, keep: &str) -> Result<DensityMatrix> {
        let k = self.space.index_of(keep)?;
        let dims = self.space.dims();
        let dk = dims[k];
        let inner: usize = dims[k + 1..].iter().product();
        let outer: usize = dims[..k].iter().product();
        let mut out = Array2::<C64>::zeros((dk, dk));
        for o in 0..outer {
            for i in 0..dk {
                for j in 0..dk {
                    let mut s = C64::new(0.0, 0.0);
                    for r in 0..inner {
                        let a = (o * dk + i) * inner + r;
                        let b = (o * dk + j) * inner + r;
                        s += self.matrix[(a, b)];
                    }
                    out[(i, j)] += s;
                }
            }
        }
        let space = Arc::new(HilbertSpace::single(keep, dk)?);
        Ok(Self { space, matrix: out })
    }
}

/// Tr(A B) without forming the product.
pub fn trace_product(a: &Array2<C64>, b: &Array2<C64>) -> C64 {
    let n = a.nrows();
    let mut s = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

pub fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|c| c.conj()).as_standard_layout().to_owned()
}

pub fn hermiticity_defect(m: &Array2<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Ascending eigenvalues of the Hermitian part of `m`.
pub fn hermitian_eigenvalues(m: &Array2<C64>) -> Vec<f64> {
    let n = m.nrows();
    let h = DMatrix::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

fn one_norm(m: &Array2<C64>) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|c| c.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// exp(A) via scaling and squaring with a Taylor core on ||A/2^s||_1 <= 1/2.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / C64::new(2f64.powi(s), 0.0);
    let mut result: Array2<C64> = Array2::eye(n);
    let mut term: Array2<C64> = Array2::eye(n);
    for k in 1..=40 {
        term = term.dot(&scaled) / C64::new(k as f64, 0.0);
        result += &term;
        if one_norm(&term) <= 1e-18 * one_norm(&result).max(1.0) {
            break;
        }
    }
    for _ in 0..s {
        result = result.dot(&result);
    }
    result
}

fn op_from(dim: usize, f: impl Fn(usize, usize) -> C64) -> Result<Operator> {
    let space = single_space(dim)?;
    Ok(Operator { space, matrix: Array2::from_shape_fn((dim, dim), |(i, j)| f(i, j)) })
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Lowering operator with a[n-1, n] = sqrt(n).
pub fn annihilation(dim: usize) -> Result<Operator> {
    op_from(dim, |i, j| if j == i + 1 { c((j as f64).sqrt()) } else { c(0.0) })
}

pub fn creation(dim: usize) -> Result<Operator> {
    Ok(annihilation(dim)?.adjoint())
}

pub fn number(dim: usize) -> Result<Operator> {
    op_from(dim, |i, j| if i == j { c(i as f64) } else { c(0.0) })
}

pub fn identity(dim: usize) -> Result<Operator> {
    op_from(dim, |i, j| if i == j { c(1.0) } else { c(0.0) })
}

/// |g><e| in the (|g>, |e>) basis.
pub fn sigma_minus() -> Operator {
    annihilation(2).expect("qubit dimension is valid")
}

pub fn sigma_plus() -> Operator {
    sigma_minus().adjoint()
}

pub fn pauli_z() -> Operator {
    op_from(2, |i, j| match (i, j) {
        (0, 0) => c(-1.0),
        (1, 1) => c(1.0),
        _ => c(0.0),
    })
    .expect("qubit dimension is valid")
}

pub fn pauli_x() -> Operator {
    op_from(2, |i, j| if i != j { c(1.0) } else { c(0.0) }).expect("qubit dimension is valid")
}

/// -i sigma_+ + i sigma_-, so that <sigma_y> = -2 Im <sigma_->.
pub fn pauli_y() -> Operator {
    op_from(2, |i, j| match (i, j) {
        (0, 1) => C64::new(0.0, 1.0),
        (1, 0) => C64::new(0.0, -1.0),
        _ => c(0.0),
    })
    .expect("qubit dimension is valid")
}

/// |e><e|.
pub fn excited_projector() -> Operator {
    op_from(2, |i, j| if i == 1 && j == 1 { c(1.0) } else { c(0.0) }).expect("qubit dimension is valid")
}

/// diag((-1)^n).
pub fn parity(dim: usize) -> Result<Operator> {
    op_from(dim, |i, j| if i == j { c(if i % 2 == 0 { 1.0 } else { -1.0 }) } else { c(0.0) })
}

/// Places a single-mode operator on `target`, identity elsewhere.
pub fn embed(op: &Operator, target: &str, space: &Arc<HilbertSpace>) -> Result<Operator> {
    let k = space.index_of(target)?;
    let dims = space.dims();
    if op.dim() != dims[k] {
        return Err(CoreError::DimensionMismatch { expected: dims[k], got: op.dim() });
    }
    let outer: usize = dims[..k].iter().product();
    let inner: usize = dims[k + 1..].iter().product();
    let dk = dims[k];
    let d = space.dim();
    let mut m = Array2::<C64>::zeros((d, d));
    for o in 0..outer {
        for i in 0..dk {
            for j in 0..dk {
                let v = op.matrix[(i, j)];
                if v == c(0.0) {
                    continue;
                }
                for r in 0..inner {
                    m[((o * dk + i) * inner + r, (o * dk + j) * inner + r)] = v;
                }
            }
        }
    }
    Ok(Operator { space: space.clone(), matrix: m })
}

fn truncation_guard(alpha: C64, dim: usize, defect: impl FnOnce() -> f64) -> Result<()> {
    let limit = dim as f64 / 4.0;
    if alpha.norm_sqr() > limit {
        return Err(CoreError::Truncation { alpha_sq: alpha.norm_sqr(), limit, defect: defect() });
    }
    Ok(())
}

fn displacement_unchecked(alpha: C64, dim: usize) -> Result<Operator> {
    let a = annihilation(dim)?;
    let gen = &a.adjoint().matrix * alpha - &a.matrix * alpha.conj();
    Ok(Operator { space: a.space.clone(), matrix: expm(&gen) })
}

/// Largest deviation of D(alpha)|0> from the untruncated coherent amplitudes.
fn vacuum_column_defect(d: &Operator, alpha: C64) -> f64 {
    let mut cur = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    let mut worst: f64 = 0.0;
    for n in 0..d.dim() {
        if n > 0 {
            cur = cur * alpha / (n as f64).sqrt();
        }
        worst = worst.max((d.matrix[(n, 0)] - cur).norm());
    }
    worst
}

/// D(alpha) = exp(alpha a^dagger - alpha* a) on the truncated space. The
/// truncation error carries the deviation of D(alpha)|0> from |alpha>.
pub fn displacement(alpha: C64, dim: usize) -> Result<Operator> {
    let d = displacement_unchecked(alpha, dim)?;
    truncation_guard(alpha, dim, || vacuum_column_defect(&d, alpha))?;
    Ok(d)
}

/// Fock amplitudes of |beta>, truncated and renormalized.
pub fn coherent_amplitudes(beta: C64, dim: usize) -> Vec<C64> {
    let mut amp = Vec::with_capacity(dim);
    let mut cur = C64::new((-beta.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            cur = cur * beta / (n as f64).sqrt();
        }
        amp.push(cur);
    }
    let norm = amp.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    amp.iter().map(|c| c / norm).collect()
}

pub fn coherent_state(beta: C64, dim: usize) -> Result<DensityMatrix> {
    let amp = coherent_amplitudes(beta, dim);
    truncation_guard(beta, dim, || {
        let d = displacement_unchecked(beta, dim).expect("dimension checked");
        vacuum_column_defect(&d, beta)
    })?;
    DensityMatrix::pure(single_space(dim)?, &amp)
}

/// Geometric populations with mean `n_th`, normalized on the truncated space.
pub fn thermal_state(n_th: f64, dim: usize) -> Result<DensityMatrix> {
    if !(n_th >= 0.0) {
        return Err(CoreError::InvalidArgument(format!("thermal occupation {n_th} must be >= 0")));
    }
    let space = single_space(dim)?;
    let q = n_th / (1.0 + n_th);
    let weights: Vec<f64> = (0..dim).map(|n| q.powi(n as i32)).collect();
    let z: f64 = weights.iter().sum();
    let mut m = Array2::zeros((dim, dim));
    for (n, w) in weights.iter().enumerate() {
        m[(n, n)] = c(w / z);
    }
    Ok(DensityMatrix { space, matrix: m })
}

/// Qubit ground state |g><g|.
pub fn ground_state() -> DensityMatrix {
    DensityMatrix::fock(0, 2).expect("qubit dimension is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_diagonal() {
        let m = Array2::from_diag(&ndarray::arr1(&[c(1.0), C64::new(0.0, 2.0)]));
        let e = expm(&m);
        assert!((e[(0, 0)] - c(1f64.exp())).norm() < 1e-13);
        assert!((e[(1, 1)] - C64::new(0.0, 2.0).exp()).norm() < 1e-13);
    }

    #[test]
    fn expm_large_norm_rotation() {
        let theta = 37.3;
        let gen = &pauli_y().matrix * C64::new(0.0, -theta);
        let e = expm(&gen);
        assert!((e[(0, 0)].re - theta.cos()).abs() < 1e-11);
    }

    #[test]
    fn partial_trace_of_product() {
        let space = Arc::new(HilbertSpace::new([("s", 3), ("q", 2)]).unwrap());
        let s = thermal_state(0.5, 3).unwrap();
        let q = DensityMatrix::fock(1, 2).unwrap();
        let joint = DensityMatrix::tensor(space, &[&s, &q]).unwrap();
        let rs = joint.partial_trace("s").unwrap();
        let rq = joint.partial_trace("q").unwrap();
        assert!(max_abs_diff(rs.matrix(), s.matrix()) < 1e-15);
        assert!(max_abs_diff(rq.matrix(), q.matrix()) < 1e-15);
    }
}

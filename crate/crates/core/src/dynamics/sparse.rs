//! Coordinate-format operators for the Lindblad right-hand side.

use ndarray::Array2;
use num_complex::Complex64 as C64;

#[derive(Debug, Clone)]
pub(crate) struct Sparse {
    n: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl Sparse {
    pub fn from_dense(m: &Array2<C64>) -> Self {
        let n = m.nrows();
        let entries = m
            .indexed_iter()
            .filter(|(_, v)| v.re != 0.0 || v.im != 0.0)
            .map(|((i, j), v)| (i, j, *v))
            .collect();
        Self { n, entries }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// out += f * S x, with x and out row-major n x n.
    pub fn mul_acc(&self, f: C64, x: &[C64], out: &mut [C64]) {
        let n = self.n;
        for &(r, c, v) in &self.entries {
            let g = f * v;
            let src = &x[c * n..(c + 1) * n];
            let dst = &mut out[r * n..(r + 1) * n];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += g * s;
            }
        }
    }

    /// out += g * S x S^dagger.
    pub fn sandwich_acc(&self, g: f64, x: &[C64], out: &mut [C64]) {
        let n = self.n;
        for &(r1, c1, v1) in &self.entries {
            let w = v1 * g;
            for &(r2, c2, v2) in &self.entries {
                out[r1 * n + r2] += w * v2.conj() * x[c1 * n + c2];
            }
        }
    }
}

//! Coordinate-format operators acting on dense density matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    pub dim: usize,
    pub entries: Vec<(usize, usize, Complex64)>,
}

impl SparseOp {
    /// Keeps the exactly nonzero entries of a dense operator.
    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        let mut entries = Vec::new();
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                let v = m[(r, c)];
                if v.re != 0.0 || v.im != 0.0 {
                    entries.push((r, c, v));
                }
            }
        }
        SparseOp { dim: m.nrows(), entries }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// `out += A rho`.
    pub fn left_mul_acc(&self, rho: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        let n = rho.ncols();
        for &(r, c, v) in &self.entries {
            for j in 0..n {
                out[(r, j)] += v * rho[(c, j)];
            }
        }
    }

    /// `out += rho A^dag`.
    pub fn right_mul_adjoint_acc(&self, rho: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        let n = rho.nrows();
        for &(r, c, v) in &self.entries {
            let vc = v.conj();
            let (src, dst) = (rho.column(c), r);
            for i in 0..n {
                out[(i, dst)] += src[i] * vc;
            }
        }
    }

    /// `Tr(A rho)`.
    pub fn expectation(&self, rho: &DMatrix<Complex64>) -> Complex64 {
        self.entries.iter().map(|&(r, c, v)| v * rho[(c, r)]).sum()
    }
}

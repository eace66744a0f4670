//! Cholesky factorization `B = L·Lᴴ` and triangular solves with `L`.

use num_complex::Complex64;
use rayon::prelude::*;

use super::dense::{axpy, dotc, DenseMatrix};
use super::hermitian::HermitianView;
use crate::error::{Error, Result};

/// Lower-triangular factor with a real, strictly positive diagonal.
///
/// The strictly upper part of the backing storage is kept at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerTriangular {
    factor: DenseMatrix,
}

impl LowerTriangular {
    /// Validates a lower-triangular matrix: square, zero upper part, positive real diagonal.
    pub fn new(m: DenseMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dims("triangular factor must be square"));
        }
        let n = m.rows();
        for j in 0..n {
            for i in 0..j {
                if m[(i, j)] != Complex64::new(0.0, 0.0) {
                    return Err(Error::dims(format!("entry ({i},{j}) above the diagonal is nonzero")));
                }
            }
            let d = m[(j, j)];
            if !(d.re > 0.0) || d.im != 0.0 {
                return Err(Error::SingularTriangular(j));
            }
        }
        Ok(Self { factor: m })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            factor: DenseMatrix::identity(n),
        }
    }

    pub fn n(&self) -> usize {
        self.factor.rows()
    }

    pub fn as_matrix(&self) -> &DenseMatrix {
        &self.factor
    }

    /// `L·Lᴴ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        super::gemm::matmul(&self.factor, super::Op::None, &self.factor, super::Op::Adjoint)
    }
}

/// Which triangular system [`triangular_solve`] solves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TriangularMode {
    /// `L·Z = X`
    Lower,
    /// `Lᴴ·Z = X`
    Adjoint,
}

/// Factors a Hermitian positive definite matrix. Only the lower triangle is read.
pub fn cholesky(b: &HermitianView) -> Result<LowerTriangular> {
    let n = b.n();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        // Column j of the trailing part: b[j.., j] − Σ_k l[j.., k]·conj(l[j, k]).
        let mut col: Vec<Complex64> = b.col(j)[j..].to_vec();
        for k in 0..j {
            let ljk = l[(j, k)].conj();
            if ljk != Complex64::new(0.0, 0.0) {
                axpy(-ljk, &l.col(k)[j..], &mut col);
            }
        }
        let pivot = col[0].re;
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: pivot });
        }
        let d = pivot.sqrt();
        let out = &mut l.col_mut(j)[j..];
        out[0] = Complex64::new(d, 0.0);
        for (o, c) in out.iter_mut().zip(&col).skip(1) {
            *o = c / d;
        }
    }
    Ok(LowerTriangular { factor: l })
}

/// Solves `L·Z = X` or `Lᴴ·Z = X` column by column without forming `L⁻¹`.
pub fn triangular_solve(
    l: &LowerTriangular,
    x: &DenseMatrix,
    mode: TriangularMode,
) -> Result<DenseMatrix> {
    let n = l.n();
    if x.rows() != n {
        return Err(Error::dims(format!(
            "triangular solve: factor is {n}x{n}, right-hand side has {} rows",
            x.rows()
        )));
    }
    let lm = &l.factor;
    for j in 0..n {
        if lm[(j, j)] == Complex64::new(0.0, 0.0) {
            return Err(Error::SingularTriangular(j));
        }
    }
    let mut z = x.clone();
    if n == 0 || x.cols() == 0 {
        return Ok(z);
    }
    let solve_col = |col: &mut [Complex64]| match mode {
        TriangularMode::Lower => {
            for k in 0..n {
                let zk = col[k] / lm[(k, k)];
                col[k] = zk;
                if zk != Complex64::new(0.0, 0.0) {
                    let (_, tail) = col.split_at_mut(k + 1);
                    axpy(-zk, &lm.col(k)[k + 1..], tail);
                }
            }
        }
        TriangularMode::Adjoint => {
            for k in (0..n).rev() {
                let s = dotc(&lm.col(k)[k + 1..], &col[k + 1..]);
                col[k] = (col[k] - s) / lm[(k, k)].conj();
            }
        }
    };
    z.data_mut().par_chunks_mut(n).for_each(solve_col);
    Ok(z)
}

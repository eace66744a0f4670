use std::ops::Deref;

use super::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Relative tolerance used by [`HermitianView::new`].
pub const DEFAULT_HERMITIAN_TOL: f64 = 1e-10;

/// A square matrix checked to be Hermitian on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianView {
    matrix: DenseMatrix,
    tolerance: f64,
}

impl HermitianView {
    /// Accepts `m` when `‖M − Mᴴ‖_max ≤ 1e-10·max(1, ‖M‖_max)`.
    pub fn new(m: DenseMatrix) -> Result<Self> {
        let tol = DEFAULT_HERMITIAN_TOL * m.max_abs().max(1.0);
        Self::with_tolerance(m, tol)
    }

    pub fn with_tolerance(m: DenseMatrix, tolerance: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dims(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let deviation = m.hermitian_deviation();
        if deviation > tolerance || !deviation.is_finite() {
            return Err(Error::NotHermitian {
                deviation,
                tolerance,
            });
        }
        Ok(Self {
            matrix: m,
            tolerance,
        })
    }

    /// Forces exact symmetry by `(M + Mᴴ)/2` instead of checking it.
    pub fn symmetrized(mut m: DenseMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dims("Hermitian matrix must be square"));
        }
        m.symmetrize();
        Ok(Self {
            matrix: m,
            tolerance: 0.0,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn into_inner(self) -> DenseMatrix {
        self.matrix
    }
}

impl Deref for HermitianView {
    type Target = DenseMatrix;

    fn deref(&self) -> &DenseMatrix {
        &self.matrix
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn rejects_non_hermitian() {
        let m = DenseMatrix::from_fn(2, 2, |i, j| Complex64::new((i + 2 * j) as f64, 0.0));
        assert!(matches!(HermitianView::new(m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn rejects_non_square() {
        assert!(matches!(
            HermitianView::new(DenseMatrix::zeros(2, 3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn accepts_within_tolerance() {
        let mut m = DenseMatrix::identity(3);
        m[(0, 1)] = Complex64::new(0.5, 0.25);
        m[(1, 0)] = Complex64::new(0.5, -0.25 + 1e-13);
        assert!(HermitianView::new(m.clone()).is_ok());
        assert!(HermitianView::with_tolerance(m, 1e-14).is_err());
    }
}

//! Dense complex linear algebra kernels.

mod cholesky;
mod dense;
mod eigh;
mod gemm;
mod hermitian;
mod qr;

pub use cholesky::{cholesky, triangular_solve, LowerTriangular, TriangularMode};
pub use dense::{axpy, dotc, norm2, DenseMatrix};
pub use eigh::{hermitian_eig, symmetric_tridiagonal_eigenvalues, EigWant, HermitianEigen};
pub use gemm::{adjoint_mul, gemm, matmul, mul, Op};
pub use hermitian::{HermitianView, DEFAULT_HERMITIAN_TOL};
pub use qr::{project_out, qr_orthonormalize, RANK_TOLERANCE};

/// Ascending eigenvalues and unitary eigenvectors of a small Hermitian
/// matrix that is Hermitian only up to rounding (e.g. `Yᴴ·H·Y`).
pub(crate) fn eig_symmetrized(g: DenseMatrix) -> crate::Result<HermitianEigen> {
    let g = HermitianView::symmetrized(g)?;
    hermitian_eig(&g, EigWant::ValuesAndVectors)
}

//! Householder QR orthonormalization of tall blocks.

use num_complex::Complex64;

use super::dense::{axpy, dotc, norm2, DenseMatrix};
use crate::error::{Error, Result};

/// Relative threshold below which a column is declared dependent.
pub const RANK_TOLERANCE: f64 = 1e-13;

/// Orthonormal basis `Q` (same shape as `y`) of the column span of `y`.
///
/// Fails with [`Error::RankDeficient`] naming the first column whose norm
/// after projecting out the preceding columns falls below
/// `1e-13 · max_j ‖y_j‖`.
pub fn qr_orthonormalize(y: &DenseMatrix) -> Result<DenseMatrix> {
    let (n, p) = (y.rows(), y.cols());
    if n < p {
        return Err(Error::dims(format!("QR needs rows >= cols, got {n}x{p}")));
    }
    let scale = (0..p).map(|j| y.column_norm(j)).fold(0.0, f64::max);
    let threshold = RANK_TOLERANCE * scale;

    let mut r = y.clone();
    // Householder vectors u_k (acting on rows k..n) and u_kᴴu_k / 2.
    let mut reflectors: Vec<(Vec<Complex64>, f64)> = Vec::with_capacity(p);
    for k in 0..p {
        let x = &r.col(k)[k..];
        let xnorm = norm2(x);
        if xnorm <= threshold || !xnorm.is_finite() {
            return Err(Error::RankDeficient { column: k });
        }
        let alpha = x[0];
        let phase = if alpha.norm() > 0.0 {
            alpha / alpha.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let mut u = x.to_vec();
        u[0] += phase * xnorm;
        let h = xnorm * (xnorm + alpha.norm());
        for j in k + 1..p {
            let col = &mut r.col_mut(j)[k..];
            let s = dotc(&u, col) / h;
            axpy(-s, &u, col);
        }
        reflectors.push((u, h));
    }

    // Q = P_0 P_1 ... P_{p-1} applied to the leading p columns of the identity.
    let mut q = DenseMatrix::zeros(n, p);
    for j in 0..p {
        q[(j, j)] = Complex64::new(1.0, 0.0);
    }
    for (k, (u, h)) in reflectors.iter().enumerate().rev() {
        for j in k..p {
            let col = &mut q.col_mut(j)[k..];
            let s = dotc(u, col) / h;
            axpy(-s, u, col);
        }
    }
    Ok(q)
}

/// Removes from `y` its components along the orthonormal columns of `basis`
/// (classical Gram-Schmidt, applied twice).
pub fn project_out(basis: &DenseMatrix, y: &mut DenseMatrix) {
    if basis.cols() == 0 || y.cols() == 0 {
        return;
    }
    for _ in 0..2 {
        let coeffs = super::gemm::adjoint_mul(basis, y);
        super::gemm::gemm(
            Complex64::new(-1.0, 0.0),
            basis,
            super::Op::None,
            &coeffs,
            super::Op::None,
            Complex64::new(1.0, 0.0),
            y,
        )
        .expect("shapes conform by construction");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gemm::{adjoint_mul, mul};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gram_error(q: &DenseMatrix) -> f64 {
        adjoint_mul(q, q).max_abs_diff(&DenseMatrix::identity(q.cols()))
    }

    /// Residual of `y` after projection onto span(q), relative to ‖y‖_F.
    fn span_residual(q: &DenseMatrix, y: &DenseMatrix) -> f64 {
        let mut r = y.clone();
        let c = adjoint_mul(q, y);
        r.add_scaled_mut(Complex64::new(-1.0, 0.0), &mul(q, &c));
        r.frobenius_norm() / y.frobenius_norm()
    }

    #[test]
    fn orthonormal_input_is_kept_up_to_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = qr_orthonormalize(&DenseMatrix::random_gaussian(12, 4, &mut rng)).unwrap();
        let q = qr_orthonormalize(&y).unwrap();
        for j in 0..4 {
            let overlap = dotc(y.col(j), q.col(j));
            assert!((overlap.norm() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn dependent_columns_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v = DenseMatrix::random_gaussian(6, 1, &mut rng);
        let mut y = v.clone();
        let twice: Vec<_> = v.col(0).iter().map(|z| z * 2.0).collect();
        y.push_column(&twice);
        assert!(matches!(
            qr_orthonormalize(&y),
            Err(Error::RankDeficient { column: 1 })
        ));
    }

    #[test]
    fn random_50x8() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let y = DenseMatrix::random_gaussian(50, 8, &mut rng);
        let q = qr_orthonormalize(&y).unwrap();
        assert!(gram_error(&q) <= 1e-12);
        assert!(span_residual(&q, &y) <= 1e-10);
    }

    #[test]
    fn wide_block_is_rejected() {
        assert!(matches!(
            qr_orthonormalize(&DenseMatrix::zeros(2, 3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn project_out_leaves_orthogonal_remainder() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let basis = qr_orthonormalize(&DenseMatrix::random_gaussian(20, 5, &mut rng)).unwrap();
        let mut y = DenseMatrix::random_gaussian(20, 3, &mut rng);
        project_out(&basis, &mut y);
        assert!(adjoint_mul(&basis, &y).max_abs() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn applying_twice_keeps_span(n in 2usize..40, seed in any::<u64>(), pfrac in 0.1f64..1.0) {
            let p = ((n as f64 * pfrac) as usize).max(1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y = DenseMatrix::random_gaussian(n, p, &mut rng);
            let q1 = qr_orthonormalize(&y).unwrap();
            let q2 = qr_orthonormalize(&q1).unwrap();
            prop_assert!(gram_error(&q1) <= 1e-12);
            // Largest principal angle between the spans: sin θ_max = ‖(I − Q1Q1ᴴ)Q2‖₂ ≤ ‖·‖_F.
            prop_assert!(span_residual(&q1, &q2) * (p as f64).sqrt() <= 1e-10);
            prop_assert!(span_residual(&q1, &y) <= 1e-10);
        }
    }
}

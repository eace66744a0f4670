//! Lanczos estimate of the top of the spectrum.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dotc, mul, norm2, symmetric_tridiagonal_eigenvalues, DenseMatrix, HermitianView};
use crate::solver::random_column;

/// Outcome of a short Lanczos run.
#[derive(Clone, Debug)]
pub struct LanczosEstimate {
    /// Upper bound for `λ_max(H)`.
    pub upper: f64,
    /// Ritz values of the tridiagonal, ascending.
    pub ritz: Vec<f64>,
    /// Steps actually taken (each one a single matvec).
    pub steps: usize,
}

/// Upper bound for the largest eigenvalue of `H` from `k` Lanczos steps.
pub fn lanczos_upper_bound(h: &HermitianView, k: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(lanczos_estimate(h, k, &mut rng)?.upper)
}

/// Full-reorthogonalization Lanczos from a random unit vector.
///
/// The bound is the largest Ritz value plus the norm of the final
/// residual vector. On breakdown the Krylov space is invariant and the
/// previous off-diagonal entry is added instead.
pub fn lanczos_estimate<R: Rng + ?Sized>(
    h: &HermitianView,
    k: usize,
    rng: &mut R,
) -> Result<LanczosEstimate> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("Lanczos needs k >= 2, got {k}")));
    }
    let n = h.n();
    if n == 0 {
        return Err(Error::dims("Lanczos on an empty matrix"));
    }
    let k = k.min(n);
    let mut basis = DenseMatrix::zeros(n, 0);
    let mut v = random_column(n, rng);
    let mut alpha = Vec::with_capacity(k);
    let mut beta: Vec<f64> = Vec::with_capacity(k);
    let mut scale = 0.0f64;

    for j in 0..k {
        basis.push_column(&v);
        let vm = DenseMatrix::from_col_major(n, 1, v.clone())?;
        let mut w = mul(h.matrix(), &vm).into_data();
        let a = dotc(&v, &w).re;
        alpha.push(a);
        // Full reorthogonalization, twice, subsumes the three-term update.
        for _ in 0..2 {
            for i in 0..basis.cols() {
                let c = dotc(basis.col(i), &w);
                axpy(-c, basis.col(i), &mut w);
            }
        }
        let b = norm2(&w);
        scale = scale.max(a.abs()).max(b);
        let breakdown = b <= 1e-10 * scale || b == 0.0;
        if breakdown || j + 1 == k {
            let ritz = symmetric_tridiagonal_eigenvalues(&alpha, &beta)?;
            let top = *ritz.last().expect("at least one Ritz value");
            let slack = if breakdown {
                beta.last().copied().unwrap_or(0.0)
            } else {
                b
            };
            return Ok(LanczosEstimate {
                upper: top + slack,
                ritz,
                steps: j + 1,
            });
        }
        beta.push(b);
        v = w.into_iter().map(|z| z / Complex64::new(b, 0.0)).collect();
    }
    unreachable!("loop returns on its last step")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eig, EigWant};

    fn random_hermitian(n: usize, seed: u64) -> HermitianView {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DenseMatrix::random_gaussian(n, n, &mut rng);
        let mut h = g.clone();
        h.add_scaled_mut(Complex64::new(1.0, 0.0), &g.adjoint());
        HermitianView::symmetrized(h).unwrap()
    }

    #[test]
    fn zero_matrix_gives_zero() {
        let h = HermitianView::new(DenseMatrix::zeros(8, 8)).unwrap();
        assert_eq!(lanczos_upper_bound(&h, 5, 1).unwrap(), 0.0);
    }

    #[test]
    fn exhausted_krylov_space_bounds_exactly() {
        let d: Vec<f64> = (1..=10).map(f64::from).collect();
        let h = HermitianView::new(DenseMatrix::from_real_diagonal(&d)).unwrap();
        let est = lanczos_estimate(&h, 10, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert!(est.upper >= 10.0);
        assert!((est.ritz[9] - 10.0).abs() < 1e-10);
    }

    #[test]
    fn random_100_bound_is_valid_and_tight() {
        for seed in 0..5 {
            let h = random_hermitian(100, seed);
            let eig = hermitian_eig(&h, EigWant::ValuesOnly).unwrap();
            let (lo, hi) = (eig.values[0], eig.values[99]);
            let bound = lanczos_upper_bound(&h, 30, seed + 100).unwrap();
            assert!(bound >= hi, "bound {bound} below λ_max {hi}");
            assert!(bound <= 1.5 * lo.abs().max(hi.abs()));
        }
    }

    #[test]
    fn rejects_single_step() {
        let h = HermitianView::new(DenseMatrix::identity(3)).unwrap();
        assert!(lanczos_upper_bound(&h, 1, 0).is_err());
    }
}

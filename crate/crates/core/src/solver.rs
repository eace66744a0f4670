//! Pieces shared by the iterative solvers.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{axpy, dotc, norm2, qr_orthonormalize, DenseMatrix, RANK_TOLERANCE};

/// Work counters and diagnostics of one iterative solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// ChFSI: outer repeat loops. LOBPCG: full iterations (trial-subspace
    /// Rayleigh-Ritz steps after the initial one).
    pub inner_loops: usize,
    /// Columns passed through the Chebyshev filter, summed over loops
    /// (zero for LOBPCG).
    pub filtered_vectors: usize,
    /// Single-column applications of the operator (`H`, or `A` for a pencil).
    pub matvecs: usize,
    /// Part of `matvecs` spent in the Lanczos bound estimate.
    pub lanczos_matvecs: usize,
    /// Part of `matvecs` spent forming Rayleigh quotients and residuals.
    pub residual_matvecs: usize,
    /// Single-column applications of `B` (generalized LOBPCG only).
    pub b_applications: usize,
    /// ChFSI: pairs locked in each loop. Empty for LOBPCG.
    pub locked_per_loop: Vec<usize>,
    /// Relative residual `‖Hv − λv‖/‖v‖` of each returned pair.
    pub final_residuals: Vec<f64>,
    /// Largest `|λ|` bound seen; multiplies a relative residual into an absolute one.
    pub norm_estimate: f64,
    pub converged: bool,
    pub wall_time: f64,
}

impl SolveReport {
    pub fn max_residual(&self) -> f64 {
        self.final_residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// `n × k` block of i.i.d. complex Gaussian columns, orthonormalized.
pub fn random_start<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<DenseMatrix> {
    let mut attempts = 0;
    loop {
        let y = DenseMatrix::random_gaussian(n, k, rng);
        match qr_orthonormalize(&y) {
            Ok(q) => return Ok(q),
            Err(e) if attempts >= 3 => return Err(e),
            Err(_) => attempts += 1,
        }
    }
}

/// Replacement column for a rank-deficient block: Gaussian, unit norm.
pub(crate) fn random_column<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Complex64> {
    let v = DenseMatrix::random_gaussian(n, 1, rng).into_data();
    let nrm = norm2(&v);
    v.into_iter().map(|z| z / nrm).collect()
}

/// Orthonormalizes `y` column by column against the orthonormal `locked`
/// columns (when given) and the columns already accepted. A column that
/// vanishes under the projection is replaced by a random vector, at most
/// `retries` times per column.
pub(crate) fn orthonormalize_panel<R: Rng + ?Sized>(
    locked: Option<&DenseMatrix>,
    y: DenseMatrix,
    retries: usize,
    rng: &mut R,
) -> Result<DenseMatrix> {
    let n = y.rows();
    if y.cols() > n {
        return Err(crate::Error::dims(format!("panel of {} columns in dimension {n}", y.cols())));
    }
    let empty = DenseMatrix::zeros(n, 0);
    let locked = locked.unwrap_or(&empty);
    let mut q = DenseMatrix::zeros(n, 0);
    for j in 0..y.cols() {
        let mut v = y.col(j).to_vec();
        let mut attempt = 0;
        loop {
            let start = norm2(&v);
            if start > 0.0 && start.is_finite() {
                v.iter_mut().for_each(|z| *z /= start);
                let left = project_twice(locked, &q, &mut v);
                if left > RANK_TOLERANCE {
                    v.iter_mut().for_each(|z| *z /= left);
                    // One more sweep cleans up the amplified rounding of a small remainder.
                    let again = project_twice(locked, &q, &mut v);
                    v.iter_mut().for_each(|z| *z /= again);
                    q.push_column(&v);
                    break;
                }
            }
            if attempt == retries {
                return Err(crate::Error::RankDeficient { column: j });
            }
            attempt += 1;
            log::debug!("replacing dependent column {j} (attempt {attempt})");
            v = random_column(n, rng);
        }
    }
    Ok(q)
}

/// Two classical Gram-Schmidt sweeps of `v` against the columns of `a`
/// and `b`; returns the remaining norm.
fn project_twice(a: &DenseMatrix, b: &DenseMatrix, v: &mut [Complex64]) -> f64 {
    for _ in 0..2 {
        for basis in [a, b] {
            let coeffs: Vec<Complex64> = (0..basis.cols()).map(|i| dotc(basis.col(i), v)).collect();
            for (i, c) in coeffs.into_iter().enumerate() {
                axpy(-c, basis.col(i), v);
            }
        }
    }
    norm2(v)
}

/// Column-wise relative residuals `‖HY_j − λ_j Y_j‖ / ‖Y_j‖` from a
/// precomputed image `HY` (and `BY`, if generalized).
pub(crate) fn block_residuals(
    hy: &DenseMatrix,
    by: &DenseMatrix,
    y: &DenseMatrix,
    values: &[f64],
) -> Vec<f64> {
    (0..y.cols())
        .map(|j| {
            let r: f64 = hy
                .col(j)
                .iter()
                .zip(by.col(j))
                .map(|(a, b)| (a - b * values[j]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let yn = y.column_norm(j);
            if yn > 0.0 {
                r / yn
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

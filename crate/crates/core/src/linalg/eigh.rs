//! Dense Hermitian eigensolver.
//!
//! The matrix is reduced to a complex Hermitian tridiagonal by Householder
//! reflections, a diagonal unitary makes the off-diagonal real, and the
//! resulting real symmetric tridiagonal is diagonalized by the implicit QL
//! algorithm with Wilkinson-type shifts. Eigenvectors are mapped back
//! through the diagonal phases and the reflectors.

use num_complex::Complex64;

use super::dense::{axpy, dotc, norm2, DenseMatrix};
use super::hermitian::HermitianView;
use crate::error::{Error, Result};

/// What [`hermitian_eig`] should compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigWant {
    ValuesOnly,
    ValuesAndVectors,
}

/// Ascending eigenvalues with (optionally) the matching unitary eigenvector matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Option<DenseMatrix>,
}

pub fn hermitian_eig(g: &HermitianView, want: EigWant) -> Result<HermitianEigen> {
    let n = g.n();
    if n == 0 {
        return Ok(HermitianEigen {
            values: Vec::new(),
            vectors: (want == EigWant::ValuesAndVectors).then(|| DenseMatrix::zeros(0, 0)),
        });
    }
    let mut work = g.matrix().clone();
    let tri = tridiagonalize(&mut work);
    let with_vectors = want == EigWant::ValuesAndVectors;

    let mut d = tri.diag.clone();
    let mut e: Vec<f64> = tri.offdiag.iter().map(|z| z.norm()).collect();
    e.push(0.0);
    let mut z = with_vectors.then(|| identity_real(n));
    tridiagonal_ql(&mut d, &mut e, z.as_mut())?;

    let order = ascending_order(&d);
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let vectors = z.map(|z| {
        // Phases: D = diag(p), p_0 = 1, p_{k+1} = p_k · e_k / |e_k|.
        let mut phase = vec![Complex64::new(1.0, 0.0); n];
        for k in 0..n - 1 {
            let ek = tri.offdiag[k];
            phase[k + 1] = if ek.norm() > 0.0 {
                phase[k] * (ek / ek.norm())
            } else {
                phase[k]
            };
        }
        let mut w = DenseMatrix::from_fn(n, n, |i, j| phase[i] * z[order[j] * n + i]);
        tri.apply_q(&mut w);
        w
    });
    Ok(HermitianEigen { values, vectors })
}

fn identity_real(n: usize) -> Vec<f64> {
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    z
}

/// Stable ascending order; ties keep their original index order.
fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order
}

struct Tridiagonal {
    diag: Vec<f64>,
    /// `offdiag[k]` is entry `(k+1, k)` of `QᴴAQ`.
    offdiag: Vec<Complex64>,
    /// Reflector `k` acts on rows `k+1..n`: `P = I − u·uᴴ / h`.
    reflectors: Vec<Option<(Vec<Complex64>, f64)>>,
}

impl Tridiagonal {
    /// `w ← Q·w` with `Q = P_0 P_1 ⋯ P_{n-2}`.
    fn apply_q(&self, w: &mut DenseMatrix) {
        let cols = w.cols();
        for (k, refl) in self.reflectors.iter().enumerate().rev() {
            if let Some((u, h)) = refl {
                for j in 0..cols {
                    let col = &mut w.col_mut(j)[k + 1..];
                    let s = dotc(u, col) / *h;
                    axpy(-s, u, col);
                }
            }
        }
    }
}

/// Householder reduction of a full-storage Hermitian matrix (overwritten).
fn tridiagonalize(a: &mut DenseMatrix) -> Tridiagonal {
    let n = a.rows();
    let mut diag = Vec::with_capacity(n);
    let mut offdiag = Vec::with_capacity(n.saturating_sub(1));
    let mut reflectors = Vec::with_capacity(n.saturating_sub(1));
    let mut p = vec![Complex64::new(0.0, 0.0); n];

    for k in 0..n.saturating_sub(1) {
        diag.push(a[(k, k)].re);
        let m = n - k - 1;
        let x = &a.col(k)[k + 1..];
        let tail = norm2(&x[1..]);
        if tail == 0.0 {
            offdiag.push(x[0]);
            reflectors.push(None);
            continue;
        }
        let xnorm = norm2(x);
        let alpha = x[0];
        let phase = if alpha.norm() > 0.0 {
            alpha / alpha.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let mut u = x.to_vec();
        u[0] += phase * xnorm;
        let h = xnorm * (xnorm + alpha.norm());
        offdiag.push(-phase * xnorm);

        // p = A22·u / h; K = uᴴp / 2h; q = p − K·u; A22 −= q·uᴴ + u·qᴴ.
        let p = &mut p[..m];
        p.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for j in 0..m {
            let uj = u[j] / h;
            axpy(uj, &a.col(k + 1 + j)[k + 1..], p);
        }
        let kk = dotc(&u, p).re / (2.0 * h);
        for (pi, ui) in p.iter_mut().zip(&u) {
            *pi -= kk * ui;
        }
        for j in 0..m {
            let (qj, uj) = (p[j].conj(), u[j].conj());
            let col = &mut a.col_mut(k + 1 + j)[k + 1..];
            for ((c, qi), ui) in col.iter_mut().zip(p.iter()).zip(&u) {
                *c -= qi * uj + ui * qj;
            }
        }
        reflectors.push(Some((u, h)));
    }
    diag.push(a[(n - 1, n - 1)].re);
    Tridiagonal {
        diag,
        offdiag,
        reflectors,
    }
}

/// Implicit QL on a real symmetric tridiagonal (`d` diagonal, `e[i]` couples
/// `i` and `i+1`, `e[n-1] = 0`). On return `d` holds the eigenvalues in no
/// particular order and the columns of `z` (column-major `n×n`, if given) the
/// rotated basis.
pub(crate) fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut Vec<f64>>) -> Result<()> {
    let n = d.len();
    assert_eq!(e.len(), n);
    if n == 0 {
        return Ok(());
    }
    let cap = 30 * n.max(1);
    let mut iterations = 0usize;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    e[n - 1] = 0.0;

    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            loop {
                iterations += 1;
                if iterations > cap {
                    return Err(Error::EigenNoConvergence(cap));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = z.as_deref_mut() {
                        let (left, right) = z.split_at_mut((i + 1) * n);
                        let zi = &mut left[i * n..];
                        let zi1 = &mut right[..n];
                        for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                            let hk = *b;
                            *b = s * *a + c * hk;
                            *a = c * *a - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Ascending eigenvalues of the real symmetric tridiagonal with diagonal
/// `diag` and off-diagonal `off` (`off.len() == diag.len() - 1`).
pub fn symmetric_tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.resize(d.len(), 0.0);
    tridiagonal_ql(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gemm::{adjoint_mul, matmul, mul};
    use crate::linalg::Op;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> HermitianView {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        HermitianView::symmetrized(DenseMatrix::random_gaussian(n, n, &mut rng)).unwrap()
    }

    fn check_decomposition(g: &HermitianView, eig: &HermitianEigen, tol: f64) {
        let n = g.n();
        let w = eig.vectors.as_ref().unwrap();
        let norm = g.frobenius_norm().max(1.0);
        assert!(adjoint_mul(w, w).max_abs_diff(&DenseMatrix::identity(n)) <= 1e-12 * (n as f64).max(1.0));
        let gw = mul(g, w);
        for j in 0..n {
            let r: f64 = gw
                .col(j)
                .iter()
                .zip(w.col(j))
                .map(|(a, b)| (a - b * eig.values[j]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(r <= tol * norm, "column {j} residual {r:e}");
        }
        assert!(eig.values.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn diagonal_input() {
        let g = HermitianView::new(DenseMatrix::from_real_diagonal(&[3.0, 1.0, 2.0])).unwrap();
        let eig = hermitian_eig(&g, EigWant::ValuesAndVectors).unwrap();
        assert_eq!(eig.values, vec![1.0, 2.0, 3.0]);
        let w = eig.vectors.unwrap();
        for (j, &row) in [1usize, 2, 0].iter().enumerate() {
            assert!((w[(row, j)].norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_by_two_swap() {
        let mut m = DenseMatrix::zeros(2, 2);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        m[(1, 0)] = Complex64::new(1.0, 0.0);
        let eig = hermitian_eig(&HermitianView::new(m).unwrap(), EigWant::ValuesOnly).unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-15 && (eig.values[1] - 1.0).abs() < 1e-15);
        assert!(eig.vectors.is_none());
    }

    #[test]
    fn complex_two_by_two() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let m = DenseMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => Complex64::new(0.0, 1.0),
            (1, 0) => Complex64::new(0.0, -1.0),
            _ => Complex64::new(2.0, 0.0),
        });
        let g = HermitianView::new(m).unwrap();
        let eig = hermitian_eig(&g, EigWant::ValuesAndVectors).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14 && (eig.values[1] - 3.0).abs() < 1e-14);
        check_decomposition(&g, &eig, 1e-14);
    }

    #[test]
    fn random_40_reconstructs() {
        let g = random_hermitian(40, 40);
        let eig = hermitian_eig(&g, EigWant::ValuesAndVectors).unwrap();
        let w = eig.vectors.as_ref().unwrap();
        let mut wl = w.clone();
        wl.scale_columns_mut(&eig.values);
        let rec = matmul(&wl, Op::None, w, Op::Adjoint);
        assert!(rec.max_abs_diff(&g) <= 1e-11 * g.max_abs());
        check_decomposition(&g, &eig, 1e-12);
    }

    #[test]
    fn values_only_matches_full() {
        let g = random_hermitian(25, 3);
        let a = hermitian_eig(&g, EigWant::ValuesOnly).unwrap();
        let b = hermitian_eig(&g, EigWant::ValuesAndVectors).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_and_tiny_cases() {
        let g = HermitianView::new(DenseMatrix::identity(5)).unwrap();
        let eig = hermitian_eig(&g, EigWant::ValuesAndVectors).unwrap();
        assert_eq!(eig.values, vec![1.0; 5]);
        let one = HermitianView::new(DenseMatrix::from_real_diagonal(&[-4.0])).unwrap();
        assert_eq!(hermitian_eig(&one, EigWant::ValuesAndVectors).unwrap().values, vec![-4.0]);
        let z = HermitianView::new(DenseMatrix::zeros(6, 6)).unwrap();
        assert!(hermitian_eig(&z, EigWant::ValuesOnly).unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tridiagonal_values() {
        // Path graph Laplacian-like T = tridiag(-1, 2, -1), n = 5: 2 − 2cos(kπ/6).
        let vals = symmetric_tridiagonal_eigenvalues(&[2.0; 5], &[-1.0; 4]).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let want = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / 6.0).cos();
            assert!((v - want).abs() < 1e-14);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn residuals_trace_and_order(n in 1usize..48, seed in any::<u64>()) {
            let g = random_hermitian(n, seed);
            let eig = hermitian_eig(&g, EigWant::ValuesAndVectors).unwrap();
            check_decomposition(&g, &eig, 1e-12);
            let trace = g.trace().re;
            let sum: f64 = eig.values.iter().sum();
            prop_assert!((trace - sum).abs() <= 1e-10 * g.frobenius_norm().max(1.0));
        }
    }
}

//! Generalized pencils, their reduction to standard form, and solutions.
//!
//! With `B = L·Lᴴ`, the pencil `A x = λ B x` becomes `H y = λ y` where
//! `H = L⁻¹·A·L⁻ᴴ` and `y = Lᴴ x`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    adjoint_mul, cholesky, matmul, mul, triangular_solve, DenseMatrix, HermitianView,
    LowerTriangular, Op, TriangularMode,
};

/// One generalized problem `A x = λ B x` of a sequence.
#[derive(Clone, Debug)]
pub struct EigenPencil {
    pub a: HermitianView,
    pub b: HermitianView,
    /// Position `ℓ ≥ 1` in its sequence.
    pub label: usize,
}

impl EigenPencil {
    /// Checks that `A` and `B` share a dimension and that `B` factors.
    pub fn new(a: HermitianView, b: HermitianView, label: usize) -> Result<Self> {
        if a.n() != b.n() {
            return Err(Error::dims(format!(
                "pencil matrices differ in size: A is {}, B is {}",
                a.n(),
                b.n()
            )));
        }
        cholesky(&b)?;
        Ok(Self { a, b, label })
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }
}

/// `H = L⁻¹·A·L⁻ᴴ` together with the factor needed to map solutions back.
#[derive(Clone, Debug)]
pub struct StandardProblem {
    pub h: HermitianView,
    pub l: LowerTriangular,
    pub source_label: usize,
}

impl StandardProblem {
    pub fn n(&self) -> usize {
        self.h.n()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolutionForm {
    /// Orthonormal `y` vectors of `H y = λ y`.
    Standard,
    /// `B`-orthonormal `x` vectors of `A x = λ B x`.
    Generalized,
}

/// Lowest eigenpairs of one problem, values ascending.
#[derive(Clone, Debug)]
pub struct EigenSolution {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
    pub form: SolutionForm,
    pub label: usize,
}

impl EigenSolution {
    pub fn nev(&self) -> usize {
        self.values.len()
    }

    /// `‖VᴴV − I‖_max` (standard) or `‖VᴴBV − I‖_max` (generalized, `b` required).
    pub fn orthonormality_error(&self, b: Option<&DenseMatrix>) -> f64 {
        let gram = match (self.form, b) {
            (SolutionForm::Generalized, Some(b)) => adjoint_mul(&self.vectors, &mul(b, &self.vectors)),
            _ => adjoint_mul(&self.vectors, &self.vectors),
        };
        gram.max_abs_diff(&DenseMatrix::identity(self.vectors.cols()))
    }
}

/// Reduces a pencil with two triangular solves; `H` is re-symmetrized.
pub fn to_standard(p: &EigenPencil) -> Result<StandardProblem> {
    let l = cholesky(&p.b)?;
    // W = L⁻¹A, then H = L⁻¹Wᴴ = L⁻¹AL⁻ᴴ since A is Hermitian.
    let w = triangular_solve(&l, p.a.matrix(), TriangularMode::Lower)?;
    let h = triangular_solve(&l, &w.adjoint(), TriangularMode::Lower)?;
    Ok(StandardProblem {
        h: HermitianView::symmetrized(h)?,
        l,
        source_label: p.label,
    })
}

/// `x = L⁻ᴴ y` for every vector of a standard-form solution.
pub fn back_transform(l: &LowerTriangular, sol: &EigenSolution) -> Result<EigenSolution> {
    if sol.form != SolutionForm::Standard {
        return Err(Error::InvalidConfig(
            "back_transform expects a standard-form solution".into(),
        ));
    }
    if sol.vectors.rows() != l.n() {
        return Err(Error::dims(format!(
            "solution vectors have {} rows, factor is {}x{}",
            sol.vectors.rows(),
            l.n(),
            l.n()
        )));
    }
    Ok(EigenSolution {
        values: sol.values.clone(),
        vectors: triangular_solve(l, &sol.vectors, TriangularMode::Adjoint)?,
        form: SolutionForm::Generalized,
        label: sol.label,
    })
}

/// `y = Lᴴ x`, the inverse of [`back_transform`].
pub fn forward_transform(l: &LowerTriangular, sol: &EigenSolution) -> Result<EigenSolution> {
    if sol.vectors.rows() != l.n() {
        return Err(Error::dims("solution vectors do not match the factor"));
    }
    Ok(EigenSolution {
        values: sol.values.clone(),
        vectors: matmul(l.as_matrix(), Op::Adjoint, &sol.vectors, Op::None),
        form: SolutionForm::Standard,
        label: sol.label,
    })
}

/// Operator whose residual is measured.
#[derive(Clone, Copy)]
pub enum ResidualTarget<'a> {
    Standard(&'a DenseMatrix),
    Generalized { a: &'a DenseMatrix, b: &'a DenseMatrix },
}

impl<'a> From<&'a StandardProblem> for ResidualTarget<'a> {
    fn from(p: &'a StandardProblem) -> Self {
        ResidualTarget::Standard(p.h.matrix())
    }
}

impl<'a> From<&'a EigenPencil> for ResidualTarget<'a> {
    fn from(p: &'a EigenPencil) -> Self {
        ResidualTarget::Generalized {
            a: p.a.matrix(),
            b: p.b.matrix(),
        }
    }
}

/// `‖M v − λ (B) v‖₂ / ‖v‖₂`.
pub fn residual<'a>(target: impl Into<ResidualTarget<'a>>, value: f64, vector: &[Complex64]) -> Result<f64> {
    let target = target.into();
    let (m, b) = match target {
        ResidualTarget::Standard(h) => (h, None),
        ResidualTarget::Generalized { a, b } => (a, Some(b)),
    };
    if vector.len() != m.cols() {
        return Err(Error::dims("residual vector length does not match the operator"));
    }
    let vnorm = crate::linalg::norm2(vector);
    if vnorm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let v = DenseMatrix::from_col_major(vector.len(), 1, vector.to_vec())?;
    let mv = mul(m, &v);
    let bv = match b {
        Some(b) => mul(b, &v),
        None => v,
    };
    let r: f64 = mv
        .col(0)
        .iter()
        .zip(bv.col(0))
        .map(|(x, y)| (x - y * value).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(r / vnorm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eig, EigWant};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn diag(v: &[f64]) -> HermitianView {
        HermitianView::new(DenseMatrix::from_real_diagonal(v)).unwrap()
    }

    pub(crate) fn random_pencil(n: usize, seed: u64) -> EigenPencil {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = HermitianView::symmetrized(DenseMatrix::random_gaussian(n, n, &mut rng)).unwrap();
        let g = DenseMatrix::random_gaussian(n, n, &mut rng);
        let mut b = adjoint_mul(&g, &g);
        for i in 0..n {
            b[(i, i)] += c(0.5 * n as f64);
        }
        EigenPencil::new(a, HermitianView::symmetrized(b).unwrap(), 1).unwrap()
    }

    /// Smallest |eigenvalue| of `A − λB`; zero exactly at pencil eigenvalues.
    fn smallest_abs_eig(a: &DenseMatrix, b: &DenseMatrix, lambda: f64) -> f64 {
        let mut m = a.clone();
        m.add_scaled_mut(c(-lambda), b);
        let eig = hermitian_eig(&HermitianView::symmetrized(m).unwrap(), EigWant::ValuesOnly).unwrap();
        eig.values.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn identity_b_gives_a() {
        let p = random_pencil(6, 1);
        let p = EigenPencil::new(p.a.clone(), HermitianView::new(DenseMatrix::identity(6)).unwrap(), 1).unwrap();
        let s = to_standard(&p).unwrap();
        assert_eq!(s.h.matrix(), p.a.matrix());
    }

    #[test]
    fn diagonal_pencil() {
        let p = EigenPencil::new(diag(&[1.0, 2.0]), diag(&[4.0, 1.0]), 1).unwrap();
        let s = to_standard(&p).unwrap();
        assert_eq!(s.l.as_matrix(), &DenseMatrix::from_real_diagonal(&[2.0, 1.0]));
        assert_eq!(s.h.matrix(), &DenseMatrix::from_real_diagonal(&[0.25, 2.0]));
        // Direct 2×2 check: det(A − λB) = (1 − 4λ)(2 − λ).
        for lambda in [0.25, 2.0] {
            assert_eq!((1.0 - 4.0 * lambda) * (2.0 - lambda), 0.0);
        }

        let y = EigenSolution {
            values: vec![0.25],
            vectors: DenseMatrix::from_fn(2, 1, |i, _| c(if i == 0 { 1.0 } else { 0.0 })),
            form: SolutionForm::Standard,
            label: 1,
        };
        let x = back_transform(&s.l, &y).unwrap();
        assert_eq!(x.vectors.col(0), &[c(0.5), c(0.0)]);
        assert!(x.orthonormality_error(Some(p.b.matrix())) < 1e-15);
    }

    #[test]
    fn random_20_spectrum_preserved() {
        let p = random_pencil(20, 20);
        let s = to_standard(&p).unwrap();
        assert!(s.h.hermitian_deviation() <= 1e-10 * s.h.max_abs());
        let vals = hermitian_eig(&s.h, EigWant::ValuesOnly).unwrap().values;
        let scale = p.a.max_abs() + p.b.max_abs();
        for &lambda in &vals {
            assert!(smallest_abs_eig(p.a.matrix(), p.b.matrix(), lambda) <= 1e-9 * scale * (1.0 + lambda.abs()));
        }
    }

    #[test]
    fn random_back_transform_residuals() {
        let p = random_pencil(30, 7);
        let s = to_standard(&p).unwrap();
        let eig = hermitian_eig(&s.h, EigWant::ValuesAndVectors).unwrap();
        let sol = EigenSolution {
            values: eig.values.clone(),
            vectors: eig.vectors.unwrap(),
            form: SolutionForm::Standard,
            label: 1,
        };
        let x = back_transform(&s.l, &sol).unwrap();
        assert!(x.orthonormality_error(Some(p.b.matrix())) <= 1e-8);
        let (an, bn) = (p.a.frobenius_norm(), p.b.frobenius_norm());
        for (j, &lambda) in x.values.iter().enumerate() {
            let r = residual(&p, lambda, x.vectors.col(j)).unwrap() * x.vectors.column_norm(j);
            assert!(r <= 1e-8 * (an + lambda.abs() * bn));
        }
    }

    #[test]
    fn back_transform_identity_and_errors() {
        let sol = EigenSolution {
            values: vec![1.0],
            vectors: DenseMatrix::from_fn(3, 1, |i, _| c(i as f64)),
            form: SolutionForm::Standard,
            label: 1,
        };
        let x = back_transform(&LowerTriangular::identity(3), &sol).unwrap();
        assert_eq!(x.vectors, sol.vectors);
        assert!(matches!(
            back_transform(&LowerTriangular::identity(4), &sol),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn residual_examples() {
        let h = DenseMatrix::from_real_diagonal(&[1.0, 2.0, 3.0]);
        let e2 = [c(0.0), c(1.0), c(0.0)];
        assert!(residual(ResidualTarget::Standard(&h), 2.0, &e2).unwrap() <= 1e-15);
        let h2 = DenseMatrix::from_real_diagonal(&[1.0, 2.0]);
        assert_eq!(residual(ResidualTarget::Standard(&h2), 1.0, &[c(0.0), c(1.0)]).unwrap(), 1.0);
        assert!(matches!(
            residual(ResidualTarget::Standard(&h2), 1.0, &[c(0.0), c(0.0)]),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn residual_matches_naive_loops() {
        let p = random_pencil(9, 99);
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let v = DenseMatrix::random_gaussian(9, 1, &mut rng);
        let lambda = 0.37;
        let mut acc = 0.0;
        for i in 0..9 {
            let mut s = c(0.0);
            for j in 0..9 {
                s += (p.a[(i, j)] - p.b[(i, j)] * lambda) * v[(j, 0)];
            }
            acc += s.norm_sqr();
        }
        let vn: f64 = (0..9).map(|i| v[(i, 0)].norm_sqr()).sum::<f64>().sqrt();
        let want = acc.sqrt() / vn;
        let got = residual(&p, lambda, v.col(0)).unwrap();
        assert!((got - want).abs() <= 1e-13 * want);
    }

    #[test]
    fn mismatched_pencil_rejected() {
        let a = HermitianView::new(DenseMatrix::identity(3)).unwrap();
        let b = HermitianView::new(DenseMatrix::identity(2)).unwrap();
        assert!(matches!(EigenPencil::new(a, b, 1), Err(Error::DimensionMismatch(_))));
        let a = HermitianView::new(DenseMatrix::identity(2)).unwrap();
        let b = diag(&[1.0, -1.0]);
        assert!(matches!(EigenPencil::new(a, b, 1), Err(Error::NotPositiveDefinite { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn round_trip_forward_back(n in 2usize..40, k in 1usize..6, seed in any::<u64>()) {
            let p = random_pencil(n, seed);
            let l = cholesky(&p.b).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
            let x = EigenSolution {
                values: vec![0.0; k],
                vectors: DenseMatrix::random_gaussian(n, k, &mut rng),
                form: SolutionForm::Generalized,
                label: 1,
            };
            let y = forward_transform(&l, &x).unwrap();
            let back = back_transform(&l, &y).unwrap();
            prop_assert!(back.vectors.max_abs_diff(&x.vectors) <= 1e-12 * x.vectors.max_abs().max(1.0));
        }

        #[test]
        fn spectrum_preservation(n in 2usize..60, seed in any::<u64>()) {
            let p = random_pencil(n, seed);
            let s = to_standard(&p).unwrap();
            let eig = hermitian_eig(&s.h, EigWant::ValuesAndVectors).unwrap();
            let sol = EigenSolution { values: eig.values, vectors: eig.vectors.unwrap(), form: SolutionForm::Standard, label: 1 };
            let x = back_transform(&s.l, &sol).unwrap();
            // Generalized Rayleigh quotients of the back-transformed vectors reproduce the values.
            let ax = adjoint_mul(&x.vectors, &mul(p.a.matrix(), &x.vectors));
            for j in 0..n {
                let scale = sol.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                prop_assert!((ax[(j, j)].re - sol.values[j]).abs() <= 1e-9 * scale);
            }
        }
    }
}

//! Scaled Chebyshev polynomial filter.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{gemm, DenseMatrix, HermitianView, Op};

/// Interval `[a, b]` to damp, and the point `scale_ref < a` where the
/// filtered polynomial is normalized to one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterWindow {
    pub a: f64,
    pub b: f64,
    pub scale_ref: f64,
}

impl FilterWindow {
    pub fn new(a: f64, b: f64, scale_ref: f64) -> Result<Self> {
        let w = Self { a, b, scale_ref };
        if w.is_valid() {
            Ok(w)
        } else {
            Err(Error::InvalidConfig(format!(
                "filter window needs scale_ref < a < b, got scale_ref={scale_ref}, a={a}, b={b}"
            )))
        }
    }

    pub fn is_valid(&self) -> bool {
        self.scale_ref < self.a && self.a < self.b && self.b.is_finite() && self.scale_ref.is_finite()
    }

    fn center_and_half_width(&self) -> (f64, f64) {
        ((self.b + self.a) / 2.0, (self.b - self.a) / 2.0)
    }
}

/// `p_m(H)·Y` for the degree-`deg` Chebyshev polynomial of the window,
/// scaled so that `p_m(scale_ref) = 1`.
pub fn chebyshev_filter(
    h: &HermitianView,
    y: &DenseMatrix,
    deg: usize,
    w: &FilterWindow,
) -> Result<DenseMatrix> {
    if deg == 0 {
        return Err(Error::InvalidConfig("filter degree must be at least 1".into()));
    }
    if !w.is_valid() {
        return Err(Error::InvalidConfig(format!("invalid filter window {w:?}")));
    }
    if y.rows() != h.n() {
        return Err(Error::dims(format!(
            "filter block has {} rows, operator is {}x{}",
            y.rows(),
            h.n(),
            h.n()
        )));
    }
    let (c, e) = w.center_and_half_width();
    let sigma1 = e / (w.scale_ref - c);
    let tau = 2.0 / sigma1;

    // Y1 = (σ1/e)(H − cI)Y0
    let mut prev = y.clone();
    let mut cur = y.clone();
    let s = sigma1 / e;
    gemm(
        Complex64::new(s, 0.0),
        h.matrix(),
        Op::None,
        y,
        Op::None,
        Complex64::new(-s * c, 0.0),
        &mut cur,
    )?;

    let mut sigma = sigma1;
    for _ in 2..=deg {
        let sigma_new = 1.0 / (tau - sigma);
        let s = 2.0 * sigma_new / e;
        // next = s(H − cI)cur − σσ_new·prev, built in place of prev.
        prev.data_mut()
            .iter_mut()
            .zip(cur.data())
            .for_each(|(p, &q)| *p = -sigma * sigma_new * *p - s * c * q);
        gemm(
            Complex64::new(s, 0.0),
            h.matrix(),
            Op::None,
            &cur,
            Op::None,
            Complex64::new(1.0, 0.0),
            &mut prev,
        )?;
        std::mem::swap(&mut prev, &mut cur);
        sigma = sigma_new;
    }
    Ok(cur)
}

/// The filter's recurrence run on a scalar: `p_m(λ)`.
pub fn chebyshev_scalar(lambda: f64, deg: usize, w: &FilterWindow) -> f64 {
    let (c, e) = w.center_and_half_width();
    let sigma1 = e / (w.scale_ref - c);
    let tau = 2.0 / sigma1;
    let mut prev = 1.0;
    let mut cur = sigma1 / e * (lambda - c);
    let mut sigma = sigma1;
    for _ in 2..=deg {
        let sigma_new = 1.0 / (tau - sigma);
        let next = 2.0 * sigma_new / e * (lambda - c) * cur - sigma * sigma_new * prev;
        prev = cur;
        cur = next;
        sigma = sigma_new;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eig, mul, qr_orthonormalize, EigWant};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn window() -> FilterWindow {
        FilterWindow::new(0.2, 1.0, -1.0).unwrap()
    }

    #[test]
    fn window_validation() {
        assert!(FilterWindow::new(1.0, 0.5, 0.0).is_err());
        assert!(FilterWindow::new(0.5, 1.0, 0.7).is_err());
        assert!(FilterWindow::new(0.5, 1.0, 0.5).is_err());
    }

    #[test]
    fn scalar_is_one_at_scale_ref() {
        let w = window();
        for m in [1, 2, 8, 25, 40] {
            assert!((chebyshev_scalar(w.scale_ref, m, &w) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn damped_interval_never_exceeds_amplified_region() {
        let w = window();
        for m in [1, 3, 8, 25] {
            let edge = chebyshev_scalar(w.a, m, &w).abs().max(chebyshev_scalar(w.b, m, &w).abs());
            for i in 0..200 {
                let inside = w.a + (w.b - w.a) * f64::from(i) / 199.0;
                assert!(chebyshev_scalar(inside, m, &w).abs() <= edge * (1.0 + 1e-12));
                let below = w.a - 3.0 * f64::from(i + 1) / 200.0;
                assert!(chebyshev_scalar(below, m, &w).abs() >= edge);
            }
        }
    }

    #[test]
    fn eigenvector_is_scaled_by_scalar_value() {
        let d: Vec<f64> = (0..10).map(|i| -1.0 + 0.2 * f64::from(i)).collect();
        let h = HermitianView::new(DenseMatrix::from_real_diagonal(&d)).unwrap();
        let w = FilterWindow::new(0.0, 1.0, -1.0).unwrap();
        for (k, &lambda) in d.iter().enumerate() {
            let mut v = DenseMatrix::zeros(10, 1);
            v[(k, 0)] = Complex64::new(0.6, 0.8);
            let out = chebyshev_filter(&h, &v, 25, &w).unwrap();
            let s = chebyshev_scalar(lambda, 25, &w);
            let mut want = v.clone();
            want.scale_real_mut(s);
            assert!(out.max_abs_diff(&want) <= 1e-12 * s.abs().max(1.0));
        }
    }

    #[test]
    fn rejects_degree_zero_and_bad_shapes() {
        let h = HermitianView::new(DenseMatrix::identity(3)).unwrap();
        assert!(chebyshev_filter(&h, &DenseMatrix::zeros(3, 1), 0, &window()).is_err());
        assert!(chebyshev_filter(&h, &DenseMatrix::zeros(4, 1), 3, &window()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn filter_matches_eigenbasis_evaluation(
            n in 4usize..60,
            m in prop_oneof![Just(1usize), Just(8), Just(25), 2usize..40],
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = qr_orthonormalize(&DenseMatrix::random_gaussian(n, n, &mut rng)).unwrap();
            let lambdas: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
            let mut ql = q.clone();
            ql.scale_columns_mut(&lambdas);
            let h = HermitianView::symmetrized(crate::linalg::matmul(&ql, Op::None, &q, Op::Adjoint)).unwrap();
            let eig = hermitian_eig(&h, EigWant::ValuesAndVectors).unwrap();
            let v = eig.vectors.unwrap();
            let w = FilterWindow::new(-0.5, 1.0 + 1e-3, -1.0).unwrap();
            let got = chebyshev_filter(&h, &v, m, &w).unwrap();
            let scalars: Vec<f64> = eig.values.iter().map(|&l| chebyshev_scalar(l, m, &w)).collect();
            let mut want = v.clone();
            want.scale_columns_mut(&scalars);
            let rel = got.sub(&want).frobenius_norm() / want.frobenius_norm();
            prop_assert!(rel <= 1e-10, "relative error {rel}");
            // V·diag(s) = p(H)·V also holds for the product form.
            let back = mul(&got, &v.adjoint());
            prop_assert!(back.hermitian_deviation() <= 1e-10 * back.max_abs().max(1.0));
        }
    }
}

//! General complex matrix products.
//!
//! The kernel is `matrixmultiply::zgemm`; conjugated operands are
//! materialized first because that kernel has no conjugation support.
//! Output columns are split across the current rayon pool. Every output
//! entry is accumulated in the same order regardless of the split, so
//! results do not depend on the thread count.

use num_complex::Complex64;
use rayon::prelude::*;

use super::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Operator applied to a gemm operand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    None,
    Trans,
    Adjoint,
}

impl Op {
    fn dims(self, m: &DenseMatrix) -> (usize, usize) {
        match self {
            Op::None => (m.rows(), m.cols()),
            Op::Trans | Op::Adjoint => (m.cols(), m.rows()),
        }
    }
}

/// Minimum flop count before output columns are farmed out to threads.
const PARALLEL_WORK: usize = 1 << 18;

/// `C ← alpha·op(A)·op(B) + beta·C`.
pub fn gemm(
    alpha: Complex64,
    a: &DenseMatrix,
    op_a: Op,
    b: &DenseMatrix,
    op_b: Op,
    beta: Complex64,
    c: &mut DenseMatrix,
) -> Result<()> {
    let (m, k) = op_a.dims(a);
    let (kb, n) = op_b.dims(b);
    if k != kb || c.rows() != m || c.cols() != n {
        return Err(Error::dims(format!(
            "gemm: op(A) is {m}x{k}, op(B) is {kb}x{n}, C is {}x{}",
            c.rows(),
            c.cols()
        )));
    }
    gemm_kernel(alpha, a, op_a, b, op_b, beta, c);
    Ok(())
}

/// `op(A)·op(B)` into a fresh matrix. Panics on non-conforming shapes.
pub fn matmul(a: &DenseMatrix, op_a: Op, b: &DenseMatrix, op_b: Op) -> DenseMatrix {
    let (m, k) = op_a.dims(a);
    let (kb, n) = op_b.dims(b);
    assert_eq!(k, kb, "matmul: inner dimensions {k} and {kb} differ");
    let mut c = DenseMatrix::zeros(m, n);
    gemm_kernel(
        Complex64::new(1.0, 0.0),
        a,
        op_a,
        b,
        op_b,
        Complex64::new(0.0, 0.0),
        &mut c,
    );
    c
}

/// `A·B`.
pub fn mul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    matmul(a, Op::None, b, Op::None)
}

/// `Aᴴ·B`.
pub fn adjoint_mul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    matmul(a, Op::Adjoint, b, Op::None)
}

fn gemm_kernel(
    alpha: Complex64,
    a: &DenseMatrix,
    op_a: Op,
    b: &DenseMatrix,
    op_b: Op,
    beta: Complex64,
    c: &mut DenseMatrix,
) {
    let (m, k) = op_a.dims(a);
    let n = c.cols();
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        // zgemm with k = 0 still scales C, but be explicit about beta = 0.
        if beta == Complex64::new(0.0, 0.0) {
            c.data_mut().iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        } else {
            c.scale_mut(beta);
        }
        return;
    }

    let a_conj;
    let a_data: &[Complex64] = if op_a == Op::Adjoint {
        a_conj = a.conj();
        a_conj.data()
    } else {
        a.data()
    };
    let b_conj;
    let b_data: &[Complex64] = if op_b == Op::Adjoint {
        b_conj = b.conj();
        b_conj.data()
    } else {
        b.data()
    };

    // Strides of op(X) viewed in column-major storage of X.
    let (rsa, csa) = match op_a {
        Op::None => (1, a.rows() as isize),
        _ => (a.rows() as isize, 1),
    };
    let (rsb, csb) = match op_b {
        Op::None => (1, b.rows() as isize),
        _ => (b.rows() as isize, 1),
    };

    let threads = rayon::current_num_threads();
    let work = m * n * k;
    let chunk_cols = if threads > 1 && work >= PARALLEL_WORK && n >= 2 {
        n.div_ceil(threads)
    } else {
        n
    };

    let run = |j0: usize, c_chunk: &mut [Complex64]| {
        let ncols = c_chunk.len() / m;
        // SAFETY: Complex64 is repr(C) {re, im}, layout-identical to [f64; 2].
        // All pointers address in-bounds data for the given strides and shapes.
        unsafe {
            matrixmultiply::zgemm(
                matrixmultiply::CGemmOption::Standard,
                matrixmultiply::CGemmOption::Standard,
                m,
                k,
                ncols,
                [alpha.re, alpha.im],
                a_data.as_ptr() as *const [f64; 2],
                rsa,
                csa,
                (b_data.as_ptr() as *const [f64; 2]).offset(j0 as isize * csb),
                rsb,
                csb,
                [beta.re, beta.im],
                c_chunk.as_mut_ptr() as *mut [f64; 2],
                1,
                m as isize,
            );
        }
    };

    if chunk_cols == n {
        run(0, c.data_mut());
    } else {
        c.data_mut()
            .par_chunks_mut(chunk_cols * m)
            .enumerate()
            .for_each(|(idx, chunk)| run(idx * chunk_cols, chunk));
    }
}

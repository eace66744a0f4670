//! Block iterative eigensolvers for sequences of correlated dense Hermitian
//! generalized eigenproblems.
//!
//! A sequence `A⁽ˡ⁾ x = λ B⁽ˡ⁾ x`, `ℓ = 1..N`, is reduced to standard form
//! `H = L⁻¹ A L⁻ᴴ` and solved for its lowest `nev` eigenpairs either by
//! Chebyshev filtered subspace iteration with locking ([`chfsi`]) or by
//! unpreconditioned block LOBPCG ([`lobpcg`]). Eigenvectors of problem `ℓ`
//! can be fed to the solver of problem `ℓ + 1` as a warm start; the
//! [`harness`] module measures what that buys.

pub mod chfsi;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod lobpcg;
pub mod reduction;
pub mod sequence;
pub mod solver;

pub use error::{Error, PartialSolve, Result, EXIT_PARTIAL};
pub use linalg::{DenseMatrix, HermitianView, LowerTriangular, Op};
pub use num_complex::Complex64;
pub use reduction::{EigenPencil, EigenSolution, SolutionForm, StandardProblem};
pub use solver::SolveReport;

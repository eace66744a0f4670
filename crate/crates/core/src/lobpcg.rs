//! Block LOBPCG without preconditioning, with soft locking.
//!
//! The trial space of each iteration is `[X | R | P]`: current Ritz block,
//! residuals of the still-active columns, and the previous directions for
//! those columns. Converged columns keep taking part in the Rayleigh-Ritz
//! step through `X` but contribute no `R` or `P` directions.

use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, PartialSolve, Result};
use crate::linalg::{
    adjoint_mul, cholesky, eig_symmetrized, gemm, mul, triangular_solve, DenseMatrix,
    HermitianView, Op, TriangularMode,
};
use crate::reduction::{EigenSolution, SolutionForm};
use crate::solver::{random_start, SolveReport};

/// Directions whose normalized singular value falls below this are dropped.
const DROP_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct LobpcgConfig {
    pub nev: usize,
    pub blk: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl LobpcgConfig {
    pub fn new(nev: usize) -> Self {
        Self {
            nev,
            blk: (nev as f64 * 1.05).ceil() as usize,
            tol: 1e-10,
            max_iter: 1000,
            seed: 0,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.nev == 0 || self.nev > self.blk || self.blk > n {
            return Err(Error::InvalidConfig(format!(
                "need 0 < nev <= blk <= n, got nev={}, blk={}, n={n}",
                self.nev, self.blk
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Lowest `cfg.nev` eigenpairs of `H y = λ y`.
pub fn lobpcg_solve(
    h: &HermitianView,
    cfg: &LobpcgConfig,
    guess: Option<&DenseMatrix>,
) -> Result<(EigenSolution, SolveReport)> {
    lobpcg_core(h, None, cfg, guess, |_| {})
}

/// Lowest `cfg.nev` eigenpairs of `A x = λ B x`, `B`-orthonormal.
pub fn lobpcg_solve_generalized(
    a: &HermitianView,
    b: &HermitianView,
    cfg: &LobpcgConfig,
    guess: Option<&DenseMatrix>,
) -> Result<(EigenSolution, SolveReport)> {
    if a.n() != b.n() {
        return Err(Error::dims(format!("A is {0}x{0}, B is {1}x{1}", a.n(), b.n())));
    }
    lobpcg_core(a, Some(b), cfg, guess, |_| {})
}

/// Either solver, calling `monitor` with the Ritz values after every iteration.
pub fn lobpcg_solve_monitored<F>(
    a: &HermitianView,
    b: Option<&HermitianView>,
    cfg: &LobpcgConfig,
    guess: Option<&DenseMatrix>,
    monitor: F,
) -> Result<(EigenSolution, SolveReport)>
where
    F: FnMut(&[f64]),
{
    lobpcg_core(a, b, cfg, guess, monitor)
}

/// A block together with its images under `A` and `B`.
struct Block {
    v: DenseMatrix,
    av: DenseMatrix,
    bv: DenseMatrix,
}

impl Block {
    fn empty(n: usize) -> Self {
        Self {
            v: DenseMatrix::zeros(n, 0),
            av: DenseMatrix::zeros(n, 0),
            bv: DenseMatrix::zeros(n, 0),
        }
    }

    fn cols(&self) -> usize {
        self.v.cols()
    }

    fn transform(&self, t: &DenseMatrix) -> Self {
        Self {
            v: mul(&self.v, t),
            av: mul(&self.av, t),
            bv: mul(&self.bv, t),
        }
    }

    fn select(&self, idx: &[usize]) -> Self {
        Self {
            v: self.v.select_columns(idx),
            av: self.av.select_columns(idx),
            bv: self.bv.select_columns(idx),
        }
    }

    /// `self ← self − basis·(basisᴴ B self)`, twice, images included.
    fn orthogonalize_against(&mut self, basis: &Block) {
        if basis.cols() == 0 || self.cols() == 0 {
            return;
        }
        let minus = Complex64::new(-1.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        for _ in 0..2 {
            let c = adjoint_mul(&basis.bv, &self.v);
            for (src, dst) in [
                (&basis.v, &mut self.v),
                (&basis.av, &mut self.av),
                (&basis.bv, &mut self.bv),
            ] {
                gemm(minus, src, Op::None, &c, Op::None, one, dst).expect("conforming");
            }
        }
    }
}

/// Applies the operator, counting single-column applications.
struct Operators<'a> {
    a: &'a HermitianView,
    b: Option<&'a HermitianView>,
    a_count: usize,
    b_count: usize,
}

impl Operators<'_> {
    fn apply_a(&mut self, v: &DenseMatrix) -> DenseMatrix {
        self.a_count += v.cols();
        mul(self.a.matrix(), v)
    }

    fn apply_b(&mut self, v: &DenseMatrix) -> DenseMatrix {
        match self.b {
            Some(b) => {
                self.b_count += v.cols();
                mul(b.matrix(), v)
            }
            None => v.clone(),
        }
    }
}

/// B-orthonormalizes `v` in place (scaled SVD-style Gram eigen-decomposition,
/// two passes), dropping numerically dependent directions. `av` and `bv`
/// follow the same transform.
fn svqb(block: Block) -> Result<Block> {
    // Columns whose B-norm has collapsed are removed before scaling.
    let norms: Vec<f64> = (0..block.cols())
        .map(|j| crate::linalg::dotc(block.v.col(j), block.bv.col(j)).re)
        .collect();
    let max_d = norms.iter().copied().fold(0.0, f64::max);
    let live: Vec<usize> = (0..norms.len())
        .filter(|&j| norms[j] > 0.0 && norms[j] > DROP_TOL * DROP_TOL * max_d)
        .collect();
    let mut block = if live.len() < norms.len() { block.select(&live) } else { block };
    for _ in 0..2 {
        if block.cols() == 0 {
            return Ok(block);
        }
        let g = adjoint_mul(&block.v, &block.bv);
        let k = g.cols();
        let diag = g.real_diagonal();
        if diag.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::IllConditionedBasis);
        }
        let d: Vec<f64> = diag.iter().map(|x| 1.0 / x.sqrt()).collect();
        let mut scaled = g.clone();
        for j in 0..k {
            for i in 0..k {
                scaled[(i, j)] *= d[i] * d[j];
            }
        }
        let eig = eig_symmetrized(scaled)?;
        let theta_max = eig.values.last().copied().unwrap_or(0.0);
        let keep: Vec<usize> = (0..k)
            .filter(|&i| eig.values[i] > 0.0 && eig.values[i].sqrt() >= DROP_TOL * theta_max.sqrt())
            .collect();
        let u = eig.vectors.expect("vectors requested").select_columns(&keep);
        // T = D·U·Θ^{-1/2}
        let mut t = u;
        for j in 0..t.cols() {
            let s = 1.0 / eig.values[keep[j]].sqrt();
            for i in 0..k {
                t[(i, j)] *= d[i] * s;
            }
        }
        block = block.transform(&t);
    }
    Ok(block)
}

/// Eigenpairs of the projected pencil `(G_A, G_B)`, ascending, `G_B`-orthonormal.
fn small_generalized(ga: DenseMatrix, gb: DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let gb = HermitianView::symmetrized(gb)?;
    let l = cholesky(&gb).map_err(|_| Error::IllConditionedBasis)?;
    let w = triangular_solve(&l, &ga, TriangularMode::Lower)?;
    let h = triangular_solve(&l, &w.adjoint(), TriangularMode::Lower)?;
    let eig = eig_symmetrized(h)?;
    let c = triangular_solve(&l, &eig.vectors.expect("vectors requested"), TriangularMode::Adjoint)?;
    Ok((eig.values, c))
}

fn rayleigh_ritz(s: &Block, keep: usize) -> Result<(Vec<f64>, DenseMatrix)> {
    let ga = adjoint_mul(&s.v, &s.av);
    let gb = adjoint_mul(&s.v, &s.bv);
    let (mut values, c) = small_generalized(ga, gb)?;
    values.truncate(keep);
    Ok((values, c))
}

/// `‖A x_j − λ_j B x_j‖ / ‖B x_j‖` and the residual block.
fn residuals(x: &Block, values: &[f64]) -> (DenseMatrix, Vec<f64>) {
    let mut r = x.av.clone();
    let mut bl = x.bv.clone();
    bl.scale_columns_mut(values);
    r.add_scaled_mut(Complex64::new(-1.0, 0.0), &bl);
    let rel = (0..r.cols())
        .map(|j| {
            let d = x.bv.column_norm(j);
            if d > 0.0 {
                r.column_norm(j) / d
            } else {
                f64::INFINITY
            }
        })
        .collect();
    (r, rel)
}

fn lobpcg_core<F>(
    a: &HermitianView,
    b: Option<&HermitianView>,
    cfg: &LobpcgConfig,
    guess: Option<&DenseMatrix>,
    mut monitor: F,
) -> Result<(EigenSolution, SolveReport)>
where
    F: FnMut(&[f64]),
{
    let start = Instant::now();
    let n = a.n();
    cfg.validate(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ops = Operators { a, b, a_count: 0, b_count: 0 };

    let x0 = match guess {
        Some(g) if g.rows() != n || g.cols() != cfg.blk => {
            return Err(Error::dims(format!(
                "initial block is {}x{}, expected {n}x{}",
                g.rows(),
                g.cols(),
                cfg.blk
            )))
        }
        Some(g) => g.clone(),
        None => random_start(n, cfg.blk, &mut rng)?,
    };
    let bx = ops.apply_b(&x0);
    let mut x = svqb(Block { v: x0, av: DenseMatrix::zeros(n, cfg.blk), bv: bx })?;
    if x.cols() < cfg.blk {
        return Err(Error::RankDeficient { column: x.cols() });
    }
    x.av = ops.apply_a(&x.v);
    let (values, c) = rayleigh_ritz(&x, cfg.blk)?;
    x = x.transform(&c.columns(0..cfg.blk));
    let mut lambda = values;
    let mut p = Block::empty(n);
    let mut iterations = 0;

    let mut res = loop {
        let (r_all, res) = residuals(&x, &lambda);
        if res[..cfg.nev].iter().all(|&r| r <= cfg.tol) || iterations >= cfg.max_iter {
            break res;
        }
        iterations += 1;

        let active: Vec<usize> = (0..cfg.blk).filter(|&j| !(res[j] <= cfg.tol)).collect();
        let r_v = r_all.select_columns(&active);
        // A·R is formed after the basis is settled; until then `av` is a placeholder.
        let mut r = Block { bv: ops.apply_b(&r_v), v: r_v, av: DenseMatrix::zeros(n, active.len()) };
        r.orthogonalize_against(&x);
        let mut r = svqb(r)?;
        r.av = ops.apply_a(&r.v);

        let mut dirs = if p.cols() > 0 {
            let mut pa = p.select(&active);
            pa.orthogonalize_against(&x);
            pa.orthogonalize_against(&r);
            svqb(pa)?
        } else {
            Block::empty(n)
        };

        let (values, c, with_p) = loop {
            let s = stack(&[&x, &r, &dirs]);
            match rayleigh_ritz(&s, cfg.blk) {
                Ok((values, c)) => break (values, c, s),
                Err(Error::IllConditionedBasis) if dirs.cols() > 0 => {
                    log::debug!("dropping P block at iteration {iterations}");
                    dirs = Block::empty(n);
                }
                Err(e) => return Err(e),
            }
        };
        let s = with_p;
        let cx = c.columns(0..cfg.blk);
        let kx = x.cols();
        let tail = c.submatrix(kx..c.rows(), 0..cfg.blk);
        let rp = Block {
            v: s.v.columns(kx..s.cols()),
            av: s.av.columns(kx..s.cols()),
            bv: s.bv.columns(kx..s.cols()),
        };
        p = rp.transform(&tail);
        x = s.transform(&cx);
        lambda = values;
        monitor(&lambda);
    };

    // Final B-renormalization against accumulated rounding.
    if b.is_some() {
        let g = adjoint_mul(&x.v, &x.bv);
        if g.max_abs_diff(&DenseMatrix::identity(cfg.blk)) > 1e-10 {
            let l = cholesky(&HermitianView::symmetrized(g)?)?;
            let fix = triangular_solve(&l, &DenseMatrix::identity(cfg.blk), TriangularMode::Adjoint)?;
            x = x.transform(&fix);
            res = residuals(&x, &lambda).1;
        }
    }

    let converged = res[..cfg.nev].iter().all(|&r| r <= cfg.tol);
    let report = SolveReport {
        inner_loops: iterations,
        matvecs: ops.a_count,
        b_applications: ops.b_count,
        final_residuals: res[..cfg.nev].to_vec(),
        norm_estimate: lambda.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        converged,
        wall_time: start.elapsed().as_secs_f64(),
        ..SolveReport::default()
    };
    let solution = EigenSolution {
        values: lambda[..cfg.nev].to_vec(),
        vectors: x.v.columns(0..cfg.nev),
        form: if b.is_some() { SolutionForm::Generalized } else { SolutionForm::Standard },
        label: 0,
    };
    if converged {
        Ok((solution, report))
    } else {
        let done = report.final_residuals.iter().take_while(|&&r| r <= cfg.tol).count();
        Err(Error::NoConvergence {
            solver: "lobpcg",
            converged: done,
            nev: cfg.nev,
            iterations,
            partial: Box::new(PartialSolve { solution, report }),
        })
    }
}

fn stack(blocks: &[&Block]) -> Block {
    let pick = |f: fn(&Block) -> &DenseMatrix| {
        let parts: Vec<&DenseMatrix> = blocks.iter().map(|b| f(b)).collect();
        DenseMatrix::hcat(&parts).expect("equal row counts")
    };
    Block {
        v: pick(|b| &b.v),
        av: pick(|b| &b.av),
        bv: pick(|b| &b.bv),
    }
}

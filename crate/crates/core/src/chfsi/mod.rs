//! Chebyshev filtered subspace iteration with locking.
//!
//! Converged pairs are locked and never filtered again; the remaining
//! panel is kept orthogonal to them before every Rayleigh-Ritz step.

mod filter;
mod lanczos;

pub use filter::{chebyshev_filter, chebyshev_scalar, FilterWindow};
pub use lanczos::{lanczos_estimate, lanczos_upper_bound, LanczosEstimate};

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, PartialSolve, Result};
use crate::linalg::{adjoint_mul, eig_symmetrized, mul, DenseMatrix, HermitianView};
use crate::reduction::{EigenSolution, SolutionForm};
use crate::solver::{block_residuals, orthonormalize_panel, random_start, SolveReport};

/// Lanczos steps used to re-estimate `b` on a warm start.
pub const WARM_LANCZOS_STEPS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct ChfsiConfig {
    pub nev: usize,
    pub blk: usize,
    pub deg: usize,
    pub tol: f64,
    /// `None` picks `min(3·blk, max(10, n/10))`, clamped to `[10, 3·blk]`.
    pub lanczos_steps: Option<usize>,
    pub max_repeats: usize,
    pub seed: u64,
}

impl ChfsiConfig {
    pub fn new(nev: usize) -> Self {
        Self {
            nev,
            blk: nev + 40,
            deg: 25,
            tol: 1e-10,
            lanczos_steps: None,
            max_repeats: 50,
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
        if self.deg == 0 {
            return Err(Error::InvalidConfig("deg must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_repeats == 0 {
            return Err(Error::InvalidConfig("max_repeats must be at least 1".into()));
        }
        Ok(())
    }

    /// Lanczos steps for a random start on an `n × n` problem.
    pub fn random_lanczos_steps(&self, n: usize) -> usize {
        let rule = self
            .lanczos_steps
            .unwrap_or_else(|| (3 * self.blk).min((n / 10).max(10)));
        rule.clamp(10, (3 * self.blk).max(10)).min(n).max(2)
    }
}

/// Approximate eigenvectors of a nearby problem, with the two eigenvalues
/// that anchor the first filter window.
#[derive(Clone, Debug)]
pub struct WarmStart {
    /// `n × blk`.
    pub vectors: DenseMatrix,
    pub lambda1: f64,
    pub lambda_blk_plus1: f64,
}

/// Locked block and active panel at the end of one loop.
pub struct LoopState<'a> {
    pub iteration: usize,
    pub locked: &'a DenseMatrix,
    pub panel: &'a DenseMatrix,
    pub window: &'a FilterWindow,
}

/// Ritz values (ascending) and Ritz vectors of `H` on the span of the
/// orthonormal block `y`.
pub fn rayleigh_ritz(h: &HermitianView, y: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    if y.rows() != h.n() {
        return Err(Error::dims(format!(
            "Rayleigh-Ritz block has {} rows, operator is {}x{}",
            y.rows(),
            h.n(),
            h.n()
        )));
    }
    let gram_err = adjoint_mul(y, y).max_abs_diff(&DenseMatrix::identity(y.cols()));
    if gram_err > 1e-10 {
        return Err(Error::InvalidConfig(format!(
            "Rayleigh-Ritz needs an orthonormal block, Gram error {gram_err:e}"
        )));
    }
    let hy = mul(h.matrix(), y);
    let (values, y, _) = project(y, &hy)?;
    Ok((values, y))
}

/// `G = YᴴHY`; returns Ritz values, `Y·W` and `HY·W`.
fn project(y: &DenseMatrix, hy: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix, DenseMatrix)> {
    let eig = eig_symmetrized(adjoint_mul(y, hy))?;
    let w = eig.vectors.expect("vectors requested");
    Ok((eig.values, mul(y, &w), mul(hy, &w)))
}

/// Lowest `cfg.nev` eigenpairs of `H`.
pub fn chfsi_solve(
    h: &HermitianView,
    cfg: &ChfsiConfig,
    guess: Option<&WarmStart>,
) -> Result<(EigenSolution, SolveReport)> {
    chfsi_solve_monitored(h, cfg, guess, |_| {})
}

/// [`chfsi_solve`] calling `monitor` after every loop.
pub fn chfsi_solve_monitored<F>(
    h: &HermitianView,
    cfg: &ChfsiConfig,
    guess: Option<&WarmStart>,
    mut monitor: F,
) -> Result<(EigenSolution, SolveReport)>
where
    F: FnMut(&LoopState<'_>),
{
    let start = Instant::now();
    let n = h.n();
    cfg.validate(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = SolveReport::default();

    let (mut panel, mut window) = match guess {
        Some(g) => {
            if g.vectors.rows() != n || g.vectors.cols() != cfg.blk {
                return Err(Error::dims(format!(
                    "warm start is {}x{}, expected {n}x{}",
                    g.vectors.rows(),
                    g.vectors.cols(),
                    cfg.blk
                )));
            }
            let est = lanczos_estimate(h, WARM_LANCZOS_STEPS.min(n).max(2), &mut rng)?;
            report.lanczos_matvecs += est.steps;
            let window = sanitize(g.lambda_blk_plus1, est.upper, g.lambda1, None);
            (g.vectors.clone(), window)
        }
        None => {
            let est = lanczos_estimate(h, cfg.random_lanczos_steps(n), &mut rng)?;
            report.lanczos_matvecs += est.steps;
            let ritz = &est.ritz;
            let lo = ritz[0];
            let hi = *ritz.last().expect("non-empty");
            let a = if ritz.len() > cfg.blk {
                ritz[cfg.blk]
            } else {
                hi - 0.1 * (hi - lo)
            };
            let window = sanitize(a, est.upper, lo, None);
            (random_start(n, cfg.blk, &mut rng)?, window)
        }
    };
    report.norm_estimate = window.b.abs().max(window.scale_ref.abs());

    let mut locked = DenseMatrix::zeros(n, 0);
    let mut locked_values: Vec<f64> = Vec::with_capacity(cfg.nev);
    let mut locked_residuals: Vec<f64> = Vec::with_capacity(cfg.nev);

    for iteration in 1..=cfg.max_repeats {
        report.inner_loops = iteration;
        let p = panel.cols();

        let filtered = chebyshev_filter(h, &panel, cfg.deg, &window)?;
        report.filtered_vectors += p;

        let y = orthonormalize_panel(Some(&locked), filtered, 3, &mut rng)?;
        let hy = mul(h.matrix(), &y);
        report.residual_matvecs += p;
        let (values, y, hy) = project(&y, &hy)?;
        let residuals = block_residuals(&hy, &y, &y, &values);

        let mut newly = 0;
        for j in 0..p {
            if locked_values.len() >= cfg.nev || !(residuals[j] < cfg.tol) {
                break;
            }
            locked.push_column(y.col(j));
            locked_values.push(values[j]);
            locked_residuals.push(residuals[j]);
            newly += 1;
        }
        report.locked_per_loop.push(newly);
        panel = y.columns(newly..p);

        if locked_values.len() < cfg.nev {
            let scale_ref = values[newly];
            let a = values[p - 1];
            window = sanitize(a, window.b, scale_ref, Some(window.a));
        }
        monitor(&LoopState {
            iteration,
            locked: &locked,
            panel: &panel,
            window: &window,
        });
        if locked_values.len() >= cfg.nev {
            break;
        }
    }

    report.matvecs = cfg.deg * report.filtered_vectors + report.lanczos_matvecs + report.residual_matvecs;
    report.final_residuals = locked_residuals;
    report.converged = locked_values.len() >= cfg.nev;
    report.wall_time = start.elapsed().as_secs_f64();
    let solution = EigenSolution {
        values: locked_values,
        vectors: locked,
        form: SolutionForm::Standard,
        label: 0,
    };
    if report.converged {
        Ok((solution, report))
    } else {
        Err(Error::NoConvergence {
            solver: "chfsi",
            converged: solution.nev(),
            nev: cfg.nev,
            iterations: report.inner_loops,
            partial: Box::new(PartialSolve { solution, report }),
        })
    }
}

/// Forces `scale_ref < a < b`, preferring `fallback_a` when `a` is unusable.
fn sanitize(a: f64, b: f64, scale_ref: f64, fallback_a: Option<f64>) -> FilterWindow {
    let candidate = FilterWindow { a, b, scale_ref };
    if candidate.is_valid() {
        return candidate;
    }
    if let Some(fa) = fallback_a {
        let w = FilterWindow { a: fa, b, scale_ref };
        if w.is_valid() {
            return w;
        }
    }
    // b may be a loose bound below the Ritz values only through rounding.
    let b = b.max(scale_ref.abs().max(1.0) * 1e-8 + scale_ref.max(a));
    let a = if scale_ref < a && a < b {
        a
    } else {
        scale_ref + 0.1 * (b - scale_ref)
    };
    FilterWindow { a, b, scale_ref }
}

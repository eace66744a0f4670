//! The random-start vs warm-start comparison along a sequence.
//!
//! For every problem a dense oracle provides the reference spectrum and
//! the block of approximate eigenvectors handed to the next problem.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chfsi::{chfsi_solve, ChfsiConfig, WarmStart};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, DenseMatrix, EigWant};
use crate::lobpcg::{lobpcg_solve, lobpcg_solve_generalized, LobpcgConfig};
use crate::reduction::{
    back_transform, to_standard, EigenPencil, EigenSolution, SolutionForm, StandardProblem,
};
use crate::sequence::{angle_report, generate_sequence, median, CorrelationSchedule, PencilSequence};
use crate::solver::SolveReport;

use super::mtx::read_sequence;

/// Absolute agreement required between iterative and dense eigenvalues.
pub const ORACLE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Chfsi,
    Lobpcg,
    LobpcgGeneralized,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Chfsi => "chfsi",
            SolverKind::Lobpcg => "lobpcg",
            SolverKind::LobpcgGeneralized => "lobpcg-generalized",
        })
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chfsi" => Ok(SolverKind::Chfsi),
            "lobpcg" => Ok(SolverKind::Lobpcg),
            "lobpcg-generalized" => Ok(SolverKind::LobpcgGeneralized),
            other => Err(Error::InvalidConfig(format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Generate {
        n: usize,
        schedule: CorrelationSchedule,
        seed: u64,
    },
    Load(PathBuf),
}

impl Source {
    pub fn materialize(&self) -> Result<PencilSequence> {
        match self {
            Source::Generate { n, schedule, seed } => generate_sequence(*n, schedule, *seed),
            Source::Load(dir) => read_sequence(dir),
        }
    }
}

/// Optional replacements for the solver defaults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverOverrides {
    pub blk: Option<usize>,
    pub deg: Option<usize>,
    pub tol: Option<f64>,
    /// ChFSI repeat cap or LOBPCG iteration cap.
    pub max_iter: Option<usize>,
    pub lanczos_steps: Option<usize>,
}

/// Solver settings for one problem size, with the defaults filled in.
#[derive(Clone, Debug, PartialEq)]
pub enum SolverSetup {
    Chfsi(ChfsiConfig),
    Lobpcg(LobpcgConfig, bool),
}

impl SolverSetup {
    pub fn new(kind: SolverKind, nev: usize, n: usize, o: &SolverOverrides) -> Result<Self> {
        let setup = match kind {
            SolverKind::Chfsi => {
                let mut c = ChfsiConfig::new(nev);
                // λ_{blk+1} must exist for the warm-start window.
                c.blk = o.blk.unwrap_or(c.blk.min(n.saturating_sub(1)));
                c.deg = o.deg.unwrap_or(c.deg);
                c.tol = o.tol.unwrap_or(c.tol);
                c.max_repeats = o.max_iter.unwrap_or(c.max_repeats);
                c.lanczos_steps = o.lanczos_steps;
                c.validate(n)?;
                SolverSetup::Chfsi(c)
            }
            SolverKind::Lobpcg | SolverKind::LobpcgGeneralized => {
                let mut c = LobpcgConfig::new(nev);
                c.blk = o.blk.unwrap_or(c.blk.min(n));
                c.tol = o.tol.unwrap_or(c.tol);
                c.max_iter = o.max_iter.unwrap_or(c.max_iter);
                c.validate(n)?;
                SolverSetup::Lobpcg(c, kind == SolverKind::LobpcgGeneralized)
            }
        };
        Ok(setup)
    }

    pub fn blk(&self) -> usize {
        match self {
            SolverSetup::Chfsi(c) => c.blk,
            SolverSetup::Lobpcg(c, _) => c.blk,
        }
    }

    pub fn tol(&self) -> f64 {
        match self {
            SolverSetup::Chfsi(c) => c.tol,
            SolverSetup::Lobpcg(c, _) => c.tol,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        match &mut s {
            SolverSetup::Chfsi(c) => c.seed = seed,
            SolverSetup::Lobpcg(c, _) => c.seed = seed,
        }
        s
    }
}

/// Dense reference data for one problem.
#[derive(Clone, Debug)]
pub struct OracleData {
    pub label: usize,
    pub values: Vec<f64>,
    /// Lowest `blk` standard-form eigenvectors.
    pub vectors: DenseMatrix,
    pub lambda1: f64,
    pub lambda_blk_plus1: f64,
}

impl OracleData {
    pub fn compute(sp: &StandardProblem, blk: usize) -> Result<Self> {
        let eig = hermitian_eig(&sp.h, EigWant::ValuesAndVectors)?;
        let vectors = eig.vectors.expect("vectors requested").columns(0..blk);
        let lambda_blk_plus1 = eig.values.get(blk).copied().unwrap_or_else(|| {
            // blk = n: nothing above the block; use a point just past the top.
            let top = eig.values[blk - 1];
            top + top.abs().max(1.0) * 1e-3
        });
        Ok(Self {
            label: sp.source_label,
            lambda1: eig.values[0],
            lambda_blk_plus1,
            values: eig.values,
            vectors,
        })
    }

    pub fn solution(&self, nev: usize) -> EigenSolution {
        EigenSolution {
            values: self.values[..nev].to_vec(),
            vectors: self.vectors.columns(0..nev),
            form: SolutionForm::Standard,
            label: self.label,
        }
    }
}

/// A problem in both forms.
pub struct Problem<'a> {
    pub pencil: &'a EigenPencil,
    pub standard: &'a StandardProblem,
}

/// Result of one iterative solve, converged or not.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub solution: Option<EigenSolution>,
    pub report: SolveReport,
    pub converged: bool,
}

/// Runs the configured solver, from random vectors when `warm` is `None`.
/// Convergence failures are returned as an unconverged outcome.
pub fn solve_problem(
    problem: &Problem<'_>,
    setup: &SolverSetup,
    warm: Option<&OracleData>,
    prev_standard: Option<&StandardProblem>,
) -> Result<SolveOutcome> {
    let result = match setup {
        SolverSetup::Chfsi(cfg) => {
            let guess = warm.map(|w| WarmStart {
                vectors: w.vectors.columns(0..cfg.blk),
                lambda1: w.lambda1,
                lambda_blk_plus1: w.lambda_blk_plus1,
            });
            chfsi_solve(&problem.standard.h, cfg, guess.as_ref())
        }
        SolverSetup::Lobpcg(cfg, false) => {
            let guess = warm.map(|w| w.vectors.columns(0..cfg.blk));
            lobpcg_solve(&problem.standard.h, cfg, guess.as_ref())
        }
        SolverSetup::Lobpcg(cfg, true) => {
            // The stored block is in standard form of the previous problem.
            let guess = match (warm, prev_standard) {
                (Some(w), Some(prev)) => {
                    let y = w.solution(cfg.blk);
                    Some(back_transform(&prev.l, &y)?.vectors)
                }
                _ => None,
            };
            lobpcg_solve_generalized(&problem.pencil.a, &problem.pencil.b, cfg, guess.as_ref())
        }
    };
    match result {
        Ok((mut solution, report)) => {
            solution.label = problem.pencil.label;
            Ok(SolveOutcome { solution: Some(solution), report, converged: true })
        }
        Err(Error::NoConvergence { partial, .. }) => Ok(SolveOutcome {
            solution: None,
            report: partial.report,
            converged: false,
        }),
        Err(e) => Err(e),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub source: Source,
    pub solver: SolverKind,
    pub nev: usize,
    pub overrides: SolverOverrides,
    pub tracked_fraction: f64,
    pub repetitions: usize,
    /// Seeds the solvers' random starts and Lanczos vectors.
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
        }
        if !(self.tracked_fraction > 0.0 && self.tracked_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "tracked fraction must lie in (0, 1], got {}",
                self.tracked_fraction
            )));
        }
        Ok(())
    }
}

/// One comparison row: problem `ell` solved from random vectors and from
/// the stored solution of problem `ell − 1`. Times are medians; counts are
/// lower medians over the repetitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub ell: usize,
    pub t_random_s: f64,
    pub t_approx_s: f64,
    pub speedup_time: f64,
    pub matvecs_random: usize,
    pub matvecs_approx: usize,
    pub speedup_matvec: f64,
    pub filtered_random: usize,
    pub filtered_approx: usize,
    pub inner_loops_random: usize,
    pub inner_loops_approx: usize,
    pub median_angle: f64,
    pub residual_max_random: f64,
    pub residual_max_approx: f64,
    pub converged_random: bool,
    pub converged_approx: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub solver: SolverKind,
    pub n: usize,
    #[serde(rename = "N")]
    pub seq_len: usize,
    pub nev: usize,
    pub blk: usize,
    pub tol: f64,
    pub repetitions: usize,
    pub seed: u64,
    pub tracked: usize,
    pub rows: Vec<ExperimentRow>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    /// True when some cell hit its iteration cap.
    pub fn partial(&self) -> bool {
        self.rows.iter().any(|r| !(r.converged_random && r.converged_approx))
    }
}

/// SplitMix64 finalizer, used to derive independent per-cell seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn cell_seed(seed: u64, ell: usize, rep: usize, warm: bool) -> u64 {
    let mut s = splitmix64(seed);
    s = splitmix64(s ^ ell as u64);
    s = splitmix64(s ^ rep as u64);
    splitmix64(s ^ u64::from(warm))
}

fn lower_median(mut v: Vec<usize>) -> usize {
    v.sort_unstable();
    v[(v.len() - 1) / 2]
}

struct CellSummary {
    time: f64,
    matvecs: usize,
    filtered: usize,
    inner_loops: usize,
    residual_max: f64,
    converged: bool,
}

fn check_oracle(outcome: &SolveOutcome, oracle: &OracleData, solver: SolverKind) -> Result<()> {
    let Some(sol) = &outcome.solution else {
        return Ok(());
    };
    for (i, (got, want)) in sol.values.iter().zip(&oracle.values).enumerate() {
        if !((got - want).abs() <= ORACLE_TOL) {
            return Err(Error::OracleMismatch(format!(
                "{solver} at ell={}: eigenvalue {} is {got:.15e}, dense oracle gives {want:.15e}",
                oracle.label,
                i + 1
            )));
        }
    }
    Ok(())
}

/// Dense oracle per problem, random and warm iterative solves
/// of every problem after the first, and the resulting speedups.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let seq = spec.source.materialize()?;
    let n = seq.n();
    let setup = SolverSetup::new(spec.solver, spec.nev, n, &spec.overrides)?;
    let blk = setup.blk();
    let mut warnings = Vec::new();

    let standard = seq.pencils.iter().map(to_standard).collect::<Result<Vec<_>>>()?;
    let oracle = standard
        .iter()
        .map(|sp| OracleData::compute(sp, blk))
        .collect::<Result<Vec<_>>>()?;

    let nev = spec.nev;
    let oracle_solutions: Vec<EigenSolution> = oracle.iter().map(|o| o.solution(nev)).collect();
    let angles = angle_report(&seq, &oracle_solutions, spec.tracked_fraction)?;

    if seq.len() < 2 {
        let msg = "sequence has a single problem; nothing to compare".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let mut rows = Vec::with_capacity(seq.len().saturating_sub(1));
    for ell in 2..=seq.len() {
        let problem = Problem {
            pencil: &seq.pencils[ell - 1],
            standard: &standard[ell - 1],
        };
        let run_cell = |warm: bool| -> Result<CellSummary> {
            let mut outcomes = Vec::with_capacity(spec.repetitions);
            for rep in 0..spec.repetitions {
                let s = setup.with_seed(cell_seed(spec.seed, ell, rep, warm));
                let outcome = if warm {
                    solve_problem(&problem, &s, Some(&oracle[ell - 2]), Some(&standard[ell - 2]))?
                } else {
                    solve_problem(&problem, &s, None, None)?
                };
                check_oracle(&outcome, &oracle[ell - 1], spec.solver)?;
                outcomes.push(outcome);
            }
            Ok(CellSummary {
                time: median(&outcomes.iter().map(|o| o.report.wall_time).collect::<Vec<_>>()),
                matvecs: lower_median(outcomes.iter().map(|o| o.report.matvecs).collect()),
                filtered: lower_median(outcomes.iter().map(|o| o.report.filtered_vectors).collect()),
                inner_loops: lower_median(outcomes.iter().map(|o| o.report.inner_loops).collect()),
                residual_max: outcomes.iter().map(|o| o.report.max_residual()).fold(0.0, f64::max),
                converged: outcomes.iter().all(|o| o.converged),
            })
        };
        let random = run_cell(false)?;
        let approx = run_cell(true)?;
        for (cell, name) in [(&random, "random"), (&approx, "warm")] {
            if !cell.converged {
                let msg = format!("ell={ell}: {name}-start solve hit its iteration cap");
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
        rows.push(ExperimentRow {
            ell,
            t_random_s: random.time,
            t_approx_s: approx.time,
            speedup_time: random.time / approx.time,
            matvecs_random: random.matvecs,
            matvecs_approx: approx.matvecs,
            speedup_matvec: random.matvecs as f64 / approx.matvecs as f64,
            filtered_random: random.filtered,
            filtered_approx: approx.filtered,
            inner_loops_random: random.inner_loops,
            inner_loops_approx: approx.inner_loops,
            median_angle: angles.per_index[ell - 2].median,
            residual_max_random: random.residual_max,
            residual_max_approx: approx.residual_max,
            converged_random: random.converged,
            converged_approx: approx.converged,
        });
        log::info!("ell={ell} done");
    }

    Ok(ExperimentReport {
        solver: spec.solver,
        n,
        seq_len: seq.len(),
        nev,
        blk,
        tol: setup.tol(),
        repetitions: spec.repetitions,
        seed: spec.seed,
        tracked: angles.tracked,
        rows,
        warnings,
    })
}

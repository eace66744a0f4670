//! Experiment driver, file formats and reports.

pub mod experiment;
pub mod mtx;
pub mod report;

pub use experiment::{
    run_experiment, solve_problem, ExperimentReport, ExperimentRow, ExperimentSpec, OracleData,
    Problem, SolveOutcome, SolverKind, SolverOverrides, SolverSetup, Source,
};
pub use mtx::{read_matrix, read_pencil, read_sequence, write_matrix, write_pencil, write_sequence};
pub use report::{emit_report, render_report, ReportFormat, CSV_COLUMNS};

/// Environment variable capping the worker threads used by the kernels.
pub const THREADS_ENV: &str = "SPECTRAL_CHAIN_THREADS";

/// Sizes the global rayon pool from [`THREADS_ENV`], if set. Returns the
/// cap that was applied.
pub fn apply_thread_cap() -> crate::Result<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| crate::Error::InvalidConfig(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| crate::Error::InvalidConfig(format!("cannot size thread pool: {e}")))?;
    Ok(Some(threads))
}

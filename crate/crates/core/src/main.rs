use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use spectral_chain::harness::{
    apply_thread_cap, emit_report, run_experiment, solve_problem, write_sequence, ExperimentSpec,
    OracleData, Problem, ReportFormat, SolverKind, SolverOverrides, SolverSetup, Source,
};
use spectral_chain::reduction::to_standard;
use spectral_chain::sequence::{angle_report, CorrelationSchedule, PencilSequence};
use spectral_chain::{Error, Result, SolveReport, EXIT_PARTIAL};

#[derive(Parser)]
#[command(name = "spectral-chain", version, about = "Eigensolvers along sequences of correlated Hermitian pencils")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a correlated pencil sequence and write it as Matrix Market files.
    Generate {
        #[command(flatten)]
        gen: GenArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one problem of a sequence and compare with the dense solver.
    Solve {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Problem index, starting at 1.
        #[arg(long, default_value_t = 1)]
        ell: usize,
        /// Start from the dense solution of problem `ell − 1`.
        #[arg(long)]
        warm: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random vs warm start along a whole sequence.
    Experiment {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Fraction of the lowest `nev` eigenvectors tracked for the angle medians.
        #[arg(long, default_value_t = 1.0)]
        fraction: f64,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Median angles between matched eigenvectors of neighbouring problems.
    Angles {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        nev: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        fraction: f64,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 12)]
    seq_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Target condition number of every `B`.
    #[arg(long, default_value_t = 1e6)]
    cond_b: f64,
    #[arg(long, default_value_t = 0.5)]
    eps0: f64,
    #[arg(long, default_value_t = 0.6)]
    eps_decay: f64,
}

impl GenArgs {
    fn source(&self) -> Source {
        let mut schedule = CorrelationSchedule::geometric(self.seq_len, self.eps0, self.eps_decay);
        schedule.b_cond_target = self.cond_b;
        Source::Generate { n: self.n, schedule, seed: self.seed }
    }
}

#[derive(Args)]
struct SourceArgs {
    /// Read the sequence from this directory instead of generating it.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    gen: GenArgs,
}

impl SourceArgs {
    fn source(&self) -> Source {
        match &self.input {
            Some(dir) => Source::Load(dir.clone()),
            None => self.gen.source(),
        }
    }

    fn seed(&self) -> u64 {
        self.gen.seed
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "chfsi")]
    solver: SolverKind,
    /// Number of wanted eigenpairs; a tenth of the dimension by default.
    #[arg(long)]
    nev: Option<usize>,
    #[arg(long)]
    blk: Option<usize>,
    #[arg(long)]
    deg: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

impl SolverArgs {
    fn overrides(&self) -> SolverOverrides {
        SolverOverrides { blk: self.blk, deg: self.deg, tol: self.tol, ..Default::default() }
    }
}

fn default_nev(nev: Option<usize>, n: usize) -> usize {
    nev.unwrap_or_else(|| n.div_ceil(10).max(1))
}

fn write_output(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveOutput {
    ell: usize,
    solver: SolverKind,
    warm: bool,
    converged: bool,
    values: Vec<f64>,
    oracle_values: Vec<f64>,
    max_oracle_deviation: f64,
    report: SolveReport,
}

fn cmd_solve(source: &SourceArgs, args: &SolverArgs, ell: usize, warm: bool, out: Option<&Path>) -> Result<i32> {
    let seq = source.source().materialize()?;
    if ell == 0 || ell > seq.len() {
        return Err(Error::InvalidConfig(format!("ell must lie in 1..={}, got {ell}", seq.len())));
    }
    if warm && ell == 1 {
        return Err(Error::InvalidConfig("a warm start needs ell >= 2".into()));
    }
    let nev = default_nev(args.nev, seq.n());
    let setup = SolverSetup::new(args.solver, nev, seq.n(), &args.overrides())?.with_seed(source.seed());
    let blk = setup.blk();
    let standard = to_standard(&seq.pencils[ell - 1])?;
    let oracle = OracleData::compute(&standard, blk)?;
    let prev = if warm {
        let sp = to_standard(&seq.pencils[ell - 2])?;
        let od = OracleData::compute(&sp, blk)?;
        Some((sp, od))
    } else {
        None
    };
    let problem = Problem { pencil: &seq.pencils[ell - 1], standard: &standard };
    let outcome = solve_problem(&problem, &setup, prev.as_ref().map(|p| &p.1), prev.as_ref().map(|p| &p.0))?;

    let values = outcome.solution.as_ref().map(|s| s.values.clone()).unwrap_or_default();
    let deviation = values.iter().zip(&oracle.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let output = SolveOutput {
        ell,
        solver: args.solver,
        warm,
        converged: outcome.converged,
        oracle_values: oracle.values[..nev].to_vec(),
        values,
        max_oracle_deviation: deviation,
        report: outcome.report,
    };
    write_output(&(serde_json::to_string_pretty(&output)? + "\n"), out)?;
    if !outcome.converged {
        log::warn!("{} hit its iteration cap", args.solver);
        return Ok(EXIT_PARTIAL);
    }
    if !(deviation <= spectral_chain::harness::experiment::ORACLE_TOL) {
        return Err(Error::OracleMismatch(format!(
            "{} at ell={ell}: largest eigenvalue deviation {deviation:e}",
            args.solver
        )));
    }
    Ok(0)
}

fn cmd_experiment(
    source: &SourceArgs,
    args: &SolverArgs,
    reps: usize,
    fraction: f64,
    format: ReportFormat,
    out: Option<&Path>,
) -> Result<i32> {
    let src = source.source();
    // The dimension is only known once a loaded sequence is read.
    let seq = src.materialize()?;
    let spec = ExperimentSpec {
        source: src,
        solver: args.solver,
        nev: default_nev(args.nev, seq.n()),
        overrides: args.overrides(),
        tracked_fraction: fraction,
        repetitions: reps,
        seed: source.seed(),
    };
    drop(seq);
    let report = run_experiment(&spec)?;
    emit_report(&report, format, out)?;
    Ok(if report.partial() { EXIT_PARTIAL } else { 0 })
}

#[derive(Serialize)]
struct AngleRow {
    ell: usize,
    median_angle: f64,
}

fn cmd_angles(seq: &PencilSequence, nev: Option<usize>, fraction: f64, format: ReportFormat, out: Option<&Path>) -> Result<i32> {
    let nev = default_nev(nev, seq.n());
    let solutions = seq
        .pencils
        .iter()
        .map(|p| Ok(OracleData::compute(&to_standard(p)?, nev)?.solution(nev)))
        .collect::<Result<Vec<_>>>()?;
    let report = angle_report(seq, &solutions, fraction)?;
    let rows: Vec<AngleRow> = report
        .per_index
        .iter()
        .map(|a| AngleRow { ell: a.ell, median_angle: a.median })
        .collect();
    let text = match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["ell", "median_angle"])?;
            for r in &rows {
                w.write_record([r.ell.to_string(), r.median_angle.to_string()])?;
            }
            String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("csv output is UTF-8")
        }
        ReportFormat::Json => serde_json::to_string_pretty(&serde_json::json!({
            "tracked": report.tracked,
            "rows": rows,
        }))? + "\n",
    };
    write_output(&text, out)?;
    Ok(0)
}

fn run(cli: Cli) -> Result<i32> {
    apply_thread_cap()?;
    match cli.command {
        Command::Generate { gen, out } => {
            let seq = gen.source().materialize()?;
            write_sequence(&out, &seq)?;
            log::info!("wrote {} pencils of dimension {} to {}", seq.len(), seq.n(), out.display());
            Ok(0)
        }
        Command::Solve { source, solver, ell, warm, out } => cmd_solve(&source, &solver, ell, warm, out.as_deref()),
        Command::Experiment { source, solver, reps, fraction, format, out } => {
            cmd_experiment(&source, &solver, reps, fraction, format, out.as_deref())
        }
        Command::Angles { source, nev, fraction, format, out } => {
            let seq = source.source().materialize()?;
            cmd_angles(&seq, nev, fraction, format, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap uses 2 for usage errors, which is reserved for partial convergence.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> Result<i32> {
        let mut full = vec!["spectral-chain"];
        full.extend_from_slice(args);
        run(Cli::try_parse_from(full).unwrap())
    }

    #[test]
    fn generate_then_experiment_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let seq = dir.path().join("seq");
        let seq_s = seq.to_str().unwrap();
        assert_eq!(run_args(&["generate", "--n", "40", "--seq-len", "3", "--seed", "2", "--out", seq_s]).unwrap(), 0);
        assert!(seq.join("A_3.mtx").exists() && seq.join("manifest.json").exists());

        let csv_path = dir.path().join("r.csv");
        let code = run_args(&[
            "experiment", "--input", seq_s, "--seed", "2", "--nev", "4", "--blk", "10", "--reps", "1", "--out",
            csv_path.to_str().unwrap(),
        ])
        .unwrap();
        assert_eq!(code, 0);
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("ell,t_random_s,"));

        // The same sequence generated in memory gives the same counts.
        let mem_path = dir.path().join("m.csv");
        run_args(&[
            "experiment", "--n", "40", "--seq-len", "3", "--seed", "2", "--nev", "4", "--blk", "10", "--reps", "1",
            "--out", mem_path.to_str().unwrap(),
        ])
        .unwrap();
        let counts = |t: &str| -> Vec<String> { t.lines().map(|l| l.split(',').skip(4).take(7).collect::<Vec<_>>().join(",")).collect() };
        let in_memory = std::fs::read_to_string(&mem_path).unwrap();
        assert_eq!(counts(&text), counts(&in_memory));
    }

    #[test]
    fn solve_and_angles_write_json() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("s.json");
        let code = run_args(&[
            "solve", "--n", "40", "--seq-len", "2", "--ell", "2", "--warm", "--solver", "lobpcg", "--nev", "4", "--out",
            out.to_str().unwrap(),
        ])
        .unwrap();
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(v["values"].as_array().unwrap().len(), 4);
        assert!(v["max_oracle_deviation"].as_f64().unwrap() < 1e-8);

        let out = dir.path().join("a.json");
        run_args(&["angles", "--n", "40", "--seq-len", "4", "--nev", "4", "--format", "json", "--out", out.to_str().unwrap()]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn single_problem_sequence_is_not_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("r.csv");
        let code = run_args(&["experiment", "--n", "30", "--seq-len", "1", "--nev", "3", "--reps", "1", "--out", out.to_str().unwrap()]).unwrap();
        assert_eq!(code, 0);
        assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 1);
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let seq = dir.path().join("seq");
        let seq_s = seq.to_str().unwrap();
        run_args(&["generate", "--n", "30", "--seq-len", "2", "--out", seq_s]).unwrap();

        // An unreachable tolerance leaves the cells unconverged.
        let out = dir.path().join("r.csv");
        let code = run_args(&[
            "experiment", "--input", seq_s, "--nev", "3", "--blk", "8", "--tol", "1e-30", "--reps", "1", "--out",
            out.to_str().unwrap(),
        ])
        .unwrap();
        assert_eq!(code, EXIT_PARTIAL);

        std::fs::write(seq.join("A_2.mtx"), "%%MatrixMarket matrix array complex general\n2 2\n").unwrap();
        let err = run_args(&["experiment", "--input", seq_s, "--nev", "3"]).unwrap_err();
        assert_eq!(err.exit_code(), 3, "{err}");

        assert_eq!(Error::OracleMismatch("x".into()).exit_code(), 4);
        assert!(Cli::try_parse_from(["spectral-chain", "experiment", "--solver", "qr"]).is_err());
    }
}

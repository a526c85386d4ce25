//! Command-line front end.
//!
//! Exit codes: 0 success, 2 input error, 3 solver hit its iteration cap (the
//! report is still written).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::ops::ControlFlow;
use std::path::PathBuf;
use std::time::Instant;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::io::{self, SolutionReport};
use crate::matrix::SymMatrix;
use crate::model::{
    certify, ray_scale, rho_information_criterion, Bounds, Certificate, InformationCriterion,
    IterationRecord, ProblemInstance, SolverConfig, SolverKind,
};
use crate::synth::{self, SynthInstance};
use crate::{solve, solve_observed, spectral};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "covsel", version, about = "Sparse inverse covariance estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic sparse precision matrix and a noisy covariance.
    Gen(GenArgs),
    /// Solve the penalized problem for a covariance matrix file.
    Solve(SolveArgs),
    /// Export the sparsity pattern of a solution report as a graph.
    Pattern(PatternArgs),
    /// Time solvers on synthetic instances.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = synth::DEFAULT_DENSITY)]
    pub density: f64,
    /// Noise level.
    #[arg(long, default_value_t = 0.15)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path for the noisy covariance.
    #[arg(long)]
    pub out: PathBuf,
    /// Output path for the ground-truth precision matrix.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// alpha = 1/lambda_max, beta = 1/(2 lambda_min)
    Half,
    /// alpha = 1/lambda_max, beta = 2/lambda_min
    Two,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("penalty").required(true).args(["rho", "rho_aic", "rho_bic"])))]
#[command(group(ArgGroup::new("bounds").args(["alpha", "auto_bounds", "preset_bounds"])))]
pub struct SolveArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Use the AIC penalty 2/N for sample size N.
    #[arg(long, value_name = "N")]
    pub rho_aic: Option<usize>,
    /// Use the BIC penalty 2 log(N/2)/N for sample size N.
    #[arg(long, value_name = "N")]
    pub rho_bic: Option<usize>,
    #[arg(long, default_value = "block-descent")]
    pub solver: SolverKind,
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    #[arg(long, requires = "beta")]
    pub alpha: Option<f64>,
    #[arg(long, requires = "alpha")]
    pub beta: Option<f64>,
    #[arg(long)]
    pub auto_bounds: bool,
    #[arg(long, value_enum)]
    pub preset_bounds: Option<Preset>,
    /// Iterations (smooth) or sweeps (block solvers).
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphFormat {
    Dot,
    Edgelist,
}

#[derive(Debug, Args)]
pub struct PatternArgs {
    /// Solution report.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value = "edgelist")]
    pub format: GraphFormat,
    /// One node label per line.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Defaults to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "smooth,block-descent,block-ascent")]
    pub solvers: Vec<SolverKind>,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.15)]
    pub sigma: f64,
    #[arg(long, default_value_t = synth::DEFAULT_DENSITY)]
    pub density: f64,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    /// Stop once the gap falls below this fraction of the starting gap.
    #[arg(long, default_value_t = 1e-2)]
    pub gap_factor: f64,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Wall-clock budget per run in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-iteration gap trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Solve(a) => cmd_solve(&a, out),
        Command::Pattern(a) => cmd_pattern(&a, out),
        Command::Bench(a) => cmd_bench(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
    }
}

pub fn cmd_gen(args: &GenArgs) -> Result<i32> {
    let inst = SynthInstance::generate(args.n, args.density, args.sigma, args.seed)?;
    io::write_matrix(&args.out, &inst.b_noisy)?;
    if let Some(path) = &args.truth {
        io::write_matrix(path, &inst.a_true)?;
    }
    Ok(EXIT_OK)
}

fn resolve_rho(args: &SolveArgs) -> Result<f64> {
    match (args.rho, args.rho_aic, args.rho_bic) {
        (Some(r), None, None) => Ok(r),
        (None, Some(n), None) => rho_information_criterion(InformationCriterion::Aic, n),
        (None, None, Some(n)) => rho_information_criterion(InformationCriterion::Bic, n),
        _ => Err(Error::InvalidInput(
            "give exactly one of --rho, --rho-aic, --rho-bic".into(),
        )),
    }
}

fn resolve_bounds(args: &SolveArgs, sigma: &SymMatrix, rho: f64) -> Result<Bounds> {
    if let (Some(alpha), Some(beta)) = (args.alpha, args.beta) {
        return Ok(Bounds::Explicit { alpha, beta });
    }
    if let Some(preset) = args.preset_bounds {
        let (lo, hi) = spectral::extreme_eigenvalues(sigma)?;
        if lo <= 0.0 {
            return Err(Error::InvalidBounds(
                "preset bounds need a positive definite covariance".into(),
            ));
        }
        let beta = match preset {
            Preset::Half => 1.0 / (2.0 * lo),
            Preset::Two => 2.0 / lo,
        };
        return Ok(Bounds::Explicit { alpha: 1.0 / hi, beta });
    }
    if args.auto_bounds || rho > 0.0 {
        return Ok(Bounds::Auto);
    }
    match args.solver {
        SolverKind::Smooth => Err(Error::InvalidBounds(
            "the smooth solver with rho = 0 needs --alpha/--beta or --preset-bounds".into(),
        )),
        _ => Ok(Bounds::Unbounded),
    }
}

pub fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> Result<i32> {
    let sigma = io::read_matrix(&args.input)?;
    let rho = resolve_rho(args)?;
    let bounds = resolve_bounds(args, &sigma, rho)?;
    let problem = ProblemInstance::new(sigma, rho, bounds)?;
    let mut config = SolverConfig::new(args.solver, args.eps);
    if let Some(m) = args.max_iterations {
        config.max_iterations = m;
    }
    let sol = solve(&problem, &config)?;
    SolutionReport::from_solution(&sol, args.eps).write(&args.out)?;
    let _ = writeln!(
        out,
        "solver={} n={} rho={} gap={:e} iters={} seconds={:.3}",
        sol.solver,
        problem.n(),
        rho,
        sol.gap,
        sol.iterations,
        sol.wall_time_seconds
    );
    Ok(if sol.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// Undirected edges `(i, j, x_ij)`, `i < j`, with `|x_ij| > threshold`.
pub fn pattern_edges(x: &SymMatrix, threshold: f64) -> Vec<(usize, usize, f64)> {
    let n = x.n();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let v = x.get(i, j);
            if v.abs() > threshold {
                edges.push((i, j, v));
            }
        }
    }
    edges
}

fn quote(label: &str) -> String {
    format!("\"{}\"", label.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn render_graph(x: &SymMatrix, threshold: f64, format: GraphFormat, labels: &[String]) -> String {
    let edges = pattern_edges(x, threshold);
    let mut s = String::new();
    match format {
        GraphFormat::Edgelist => {
            for (i, j, w) in edges {
                writeln!(s, "{} {} {w:e}", labels[i], labels[j]).unwrap();
            }
        }
        GraphFormat::Dot => {
            s.push_str("graph G {\n");
            for l in labels {
                writeln!(s, "  {};", quote(l)).unwrap();
            }
            for (i, j, w) in edges {
                writeln!(s, "  {} -- {} [weight={w:e}];", quote(&labels[i]), quote(&labels[j])).unwrap();
            }
            s.push_str("}\n");
        }
    }
    s
}

pub fn cmd_pattern(args: &PatternArgs, out: &mut dyn Write) -> Result<i32> {
    if !(args.threshold >= 0.0) {
        return Err(Error::InvalidInput("threshold must be nonnegative".into()));
    }
    let report = SolutionReport::read(&args.input)?;
    let x = report.x_matrix()?;
    let labels: Vec<String> = match &args.labels {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let labels: Vec<String> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect();
            if labels.len() != x.n() {
                return Err(Error::InvalidInput(format!(
                    "{} labels for {} variables",
                    labels.len(),
                    x.n()
                )));
            }
            labels
        }
        None => (1..=x.n()).map(|i| i.to_string()).collect(),
    };
    let text = render_graph(&x, args.threshold, args.format, &labels);
    match &args.out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?,
        None => {
            let _ = out.write_all(text.as_bytes());
        }
    }
    Ok(EXIT_OK)
}

/// Duality gap at a solver's starting point, with the primal point moved
/// along its ray as the solvers do when reporting.
///
/// Smooth starts from `beta I` and the zero dual matrix, the block methods
/// from their sweep-0 iterate.
pub fn starting_gap(problem: &ProblemInstance, kind: SolverKind) -> Result<f64> {
    match kind {
        SolverKind::Smooth => {
            let (alpha, beta) = problem.effective_bounds()?;
            let n = problem.n();
            let x0 = SymMatrix::identity(n).scale(beta);
            let t = ray_scale(&x0, problem.sigma(), problem.rho(), alpha / beta, 1.0);
            let cert = certify(
                problem.sigma(),
                problem.rho(),
                &x0.scale(t),
                &SymMatrix::zeros(n),
                Certificate::Bounded { alpha, beta },
            )?;
            Ok(cert.gap)
        }
        _ => {
            let mut gap = f64::NAN;
            let config = SolverConfig::new(kind, 1.0);
            solve_observed(problem, &config, &mut |r| {
                gap = r.gap;
                ControlFlow::Break(())
            })?;
            Ok(gap)
        }
    }
}

/// One benchmark cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub solver: SolverKind,
    pub seed: u64,
    pub iterations: usize,
    pub seconds: f64,
    pub gap_initial: f64,
    pub gap_final: f64,
    /// `converged`, `capped` or `failed`.
    pub status: &'static str,
    pub trace: Vec<IterationRecord>,
}

pub const BENCH_HEADER: &str = "n,solver,seed,iterations_or_sweeps,seconds,gap_initial,gap_final,status";
pub const TRACE_HEADER: &str = "n,solver,seed,k,seconds,gap";

/// Runs `kind` until the gap drops to `gap_factor` times its [`starting_gap`].
pub fn bench_cell(
    problem: &ProblemInstance,
    kind: SolverKind,
    gap_factor: f64,
    max_iterations: Option<usize>,
    time_limit: Option<f64>,
) -> Result<(usize, f64, f64, f64, bool, Vec<IterationRecord>)> {
    let gap_initial = starting_gap(problem, kind)?;
    if !(gap_initial > 0.0) {
        return Ok((0, 0.0, gap_initial, gap_initial, true, Vec::new()));
    }
    let mut config = SolverConfig::new(kind, gap_factor * gap_initial);
    if let Some(m) = max_iterations {
        config.max_iterations = m;
    }
    let start = Instant::now();
    let mut trace = Vec::new();
    let sol = solve_observed(problem, &config, &mut |r| {
        trace.push(*r);
        match time_limit {
            Some(limit) if r.elapsed_seconds > limit => ControlFlow::Break(()),
            _ => ControlFlow::Continue(()),
        }
    })?;
    let seconds = start.elapsed().as_secs_f64();
    Ok((sol.iterations, seconds, gap_initial, sol.gap, sol.converged, trace))
}

pub fn run_bench(args: &BenchArgs) -> Result<Vec<BenchRow>> {
    if args.sizes.iter().any(|&n| n < 2) {
        return Err(Error::InvalidInput("all sizes must be at least 2".into()));
    }
    if !(args.gap_factor > 0.0 && args.gap_factor < 1.0) {
        return Err(Error::InvalidInput("gap factor must lie in (0, 1)".into()));
    }
    let mut rows = Vec::new();
    for &n in &args.sizes {
        for &seed in &args.seeds {
            let inst = SynthInstance::generate(n, args.density, args.sigma, seed)?;
            for &kind in &args.solvers {
                let bounds = if args.rho > 0.0 { Bounds::Auto } else { Bounds::Unbounded };
                let cell = ProblemInstance::new(inst.b_noisy.clone(), args.rho, bounds).and_then(|p| {
                    bench_cell(&p, kind, args.gap_factor, args.max_iterations, args.time_limit)
                });
                rows.push(match cell {
                    Ok((iterations, seconds, gap_initial, gap_final, converged, trace)) => BenchRow {
                        n,
                        solver: kind,
                        seed,
                        iterations,
                        seconds,
                        gap_initial,
                        gap_final,
                        status: if converged { "converged" } else { "capped" },
                        trace,
                    },
                    Err(_) => BenchRow {
                        n,
                        solver: kind,
                        seed,
                        iterations: 0,
                        seconds: 0.0,
                        gap_initial: f64::NAN,
                        gap_final: f64::NAN,
                        status: "failed",
                        trace: Vec::new(),
                    },
                });
            }
        }
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = format!("{BENCH_HEADER}\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{:.6},{:e},{:e},{}",
            r.n, r.solver, r.seed, r.iterations, r.seconds, r.gap_initial, r.gap_final, r.status
        )
        .unwrap();
    }
    s
}

pub fn trace_csv(rows: &[BenchRow]) -> String {
    let mut s = format!("{TRACE_HEADER}\n");
    for r in rows {
        for t in &r.trace {
            writeln!(s, "{},{},{},{},{:.6},{:e}", r.n, r.solver, r.seed, t.k, t.elapsed_seconds, t.gap)
                .unwrap();
        }
    }
    s
}

pub fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let rows = run_bench(args)?;
    let write = |path: &PathBuf, text: String| {
        fs::write(path, text).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    };
    write(&args.out, bench_csv(&rows))?;
    if let Some(path) = &args.trace {
        write(path, trace_csv(&rows))?;
    }
    if !rows.is_empty() && rows.iter().all(|r| r.status == "failed") {
        return Ok(EXIT_INPUT);
    }
    Ok(EXIT_OK)
}

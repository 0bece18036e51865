use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use psdcone::experiments::{self, Fig4Config, SosBenchConfig};
use psdcone::io;
use psdcone::sdls::{solve, GdParams, SolveReport, TrajectoryPoint};
use psdcone::{project, Error, Method, ProjectorConfig, RangeParams, RngStream};

#[derive(Parser)]
#[command(name = "psdcone", version, about = "Randomized PSD projections and first-order SDLS/SOS solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Project a Matrix Market matrix onto the PSD cone.
    Project(ProjectArgs),
    /// Solve an SDLS problem by dual gradient ascent.
    Solve(SolveArgs),
    /// Projection-error sweep on the four-cluster test matrix (CSV out).
    BenchFig4(Fig4Args),
    /// Global lower bound of a polynomial through its SOS relaxation.
    Sos(SosArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Exact,
    Polar,
    Randomized,
    Scaled,
}

#[derive(Args, Clone, Debug)]
struct SketchArgs {
    /// Target rank.
    #[arg(long)]
    k: Option<usize>,
    /// Oversampling.
    #[arg(long, default_value_t = 10)]
    l: usize,
    /// Power-scheme exponent.
    #[arg(long, default_value_t = 2)]
    q: usize,
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    method: MethodArg,
    #[command(flatten)]
    sketch: SketchArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Shift for the scaled method; estimated by power iteration if absent.
    #[arg(long)]
    alpha: Option<f64>,
    /// Power iterations for the α estimate.
    #[arg(long = "N", default_value_t = 10)]
    power_n: usize,
    /// Include range-finder diagnostics in the report.
    #[arg(long)]
    diagnostics: bool,
    #[arg(long)]
    output: PathBuf,
    /// JSON report path (stdout if absent).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Include wall time in the report.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, required_unless_present = "generate_example1", conflicts_with = "generate_example1")]
    problem: Option<PathBuf>,
    /// Generate the random two-constraint feasible instance.
    #[arg(long)]
    generate_example1: bool,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long, value_enum, default_value = "exact")]
    proj: MethodArg,
    #[command(flatten)]
    sketch: SketchArgs,
    #[arg(long = "N", default_value_t = 10)]
    power_n: usize,
    #[arg(long)]
    rho_override: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 1e-12)]
    epsilon: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the primal solution as Matrix Market.
    #[arg(long)]
    solution: Option<PathBuf>,
    #[arg(long)]
    trajectory: bool,
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct Fig4Args {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// β₁,β₂,β₃,β₄.
    #[arg(long, value_delimiter = ',', default_value = "3,1,6,2")]
    betas: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    l: usize,
    #[arg(long, default_value_t = 2)]
    q: usize,
    /// Comma-separated target ranks.
    #[arg(long, value_delimiter = ',', default_value = "100,200,300,400,500,600,700,800,900")]
    k_grid: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SosArgs {
    #[arg(long, default_value_t = 9)]
    nvars: usize,
    /// Half degree d of the relaxation.
    #[arg(long, default_value_t = 2)]
    degree: u32,
    #[arg(long, default_value_t = std::f64::consts::PI)]
    offset: f64,
    /// Polynomial JSON file; replaces the generated instance.
    #[arg(long)]
    poly: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "exact")]
    proj: MethodArg,
    /// Target rank (default: a fifth of the Gram dimension).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long, default_value_t = 8)]
    q: usize,
    #[arg(long = "N", default_value_t = 10)]
    power_n: usize,
    #[arg(long, default_value_t = psdcone::sos::DEFAULT_SOS_RHO)]
    rho: f64,
    #[arg(long, default_value_t = 0.15)]
    beta: f64,
    #[arg(long, default_value_t = 1e-10)]
    epsilon: f64,
    #[arg(long, default_value_t = 4000)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report path (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    timing: bool,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
}

#[derive(Serialize)]
struct ProjectSummary {
    method: Method,
    n: usize,
    effective_rank: usize,
    alpha_used: Option<f64>,
    residual_frob: Option<f64>,
    orthonormality_defect: Option<f64>,
    truncated_columns: usize,
    fallback: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time: Option<f64>,
}

#[derive(Serialize)]
struct SolveSummary {
    projection: Method,
    n: usize,
    m: usize,
    iterations: usize,
    converged: bool,
    y_final: Vec<f64>,
    grad_norm_final: f64,
    feasibility_residual: f64,
    objective: f64,
    exact_residual: Option<f64>,
    fallbacks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    trajectory: Option<Vec<TrajectoryPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time: Option<f64>,
}

fn projector(method: MethodArg, params: Option<RangeParams>, power_n: usize) -> Result<ProjectorConfig, Error> {
    let need = || params.ok_or_else(|| Error::InvalidParams("randomized projection requires --k".into()));
    Ok(match method {
        MethodArg::Exact => ProjectorConfig::exact(),
        MethodArg::Polar => ProjectorConfig::polar(),
        MethodArg::Randomized => ProjectorConfig::randomized(need()?),
        MethodArg::Scaled => ProjectorConfig::scaled(need()?, power_n),
    })
}

fn range_params(s: &SketchArgs, seed: u64) -> Option<RangeParams> {
    s.k.map(|k| RangeParams::new(k, s.l, s.q).with_seed(seed))
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run_project(a: ProjectArgs) -> Result<(), Error> {
    let x = io::read_sym_matrix(&a.input)?;
    let mut cfg = projector(a.method, range_params(&a.sketch, a.seed), a.power_n)?.with_diagnostics(a.diagnostics);
    cfg.alpha_override = a.alpha;
    let mut rng = RngStream::new(a.seed);
    let rep = project(&x, &cfg, &mut rng)?;
    let result = rep.matrix();
    io::write_matrix_market(&a.output, result.as_matrix())?;
    let summary = ProjectSummary {
        method: rep.method,
        n: x.dim(),
        effective_rank: rep.effective_rank,
        alpha_used: rep.alpha_used,
        residual_frob: rep.residual_frob,
        orthonormality_defect: rep.basis.as_ref().map(|b| b.orthonormality_defect()),
        truncated_columns: rep.truncated_columns,
        fallback: rep.fallback,
        wall_time: a.timing.then_some(rep.wall_time),
    };
    emit_json(&summary, a.report.as_deref())
}

fn solve_summary(rep: SolveReport, n: usize, m: usize, wall_time: Option<f64>) -> SolveSummary {
    SolveSummary {
        projection: rep.projection,
        n,
        m,
        iterations: rep.iterations,
        converged: rep.converged,
        y_final: rep.y_final,
        grad_norm_final: rep.grad_norm_final,
        feasibility_residual: rep.feasibility_residual,
        objective: rep.objective,
        exact_residual: rep.exact_residual,
        fallbacks: rep.fallbacks,
        trajectory: rep.trajectory,
        wall_time,
    }
}

fn run_solve(a: SolveArgs) -> Result<(), Error> {
    let start = std::time::Instant::now();
    let mut prob = match &a.problem {
        Some(p) => io::read_problem(p)?,
        None => experiments::example1_problem(a.n, a.m, a.seed)?,
    };
    if let Some(rho) = a.rho_override {
        if !(rho > 0.0) {
            return Err(Error::InvalidParams(format!("rho override {rho} must be positive")));
        }
        prob.rho = rho;
    }
    let proj = projector(a.proj, range_params(&a.sketch, a.seed), a.power_n)?;
    let mut gd = GdParams {
        epsilon: a.epsilon,
        beta: a.beta,
        max_iter: a.max_iter,
        seed: a.seed,
        record_trajectory: a.trajectory,
        ..GdParams::default()
    };
    if a.generate_example1 && a.m == 2 {
        gd.y0 = Some(experiments::EXAMPLE1_Y0.to_vec());
    }
    let rep = solve(&prob, &proj, &gd)?;
    if let Some(path) = &a.solution {
        io::write_matrix_market(path, rep.x_solution.as_matrix())?;
    }
    let summary = solve_summary(rep, prob.dim(), prob.num_constraints(), a.timing.then(|| start.elapsed().as_secs_f64()));
    emit_json(&summary, a.report.as_deref())
}

fn run_fig4(a: Fig4Args) -> Result<(), Error> {
    let beta: [f64; 4] = a
        .betas
        .as_slice()
        .try_into()
        .map_err(|_| Error::InvalidParams("--betas takes exactly four values".into()))?;
    let cfg = Fig4Config {
        n: a.n,
        beta,
        l: a.l,
        q: a.q,
        k_grid: a.k_grid,
        trials: a.trials,
        seed: a.seed,
    };
    let rows = experiments::fig4_sweep(&cfg, experiments::thread_cap())?;
    let mut buf = Vec::new();
    experiments::write_fig4_csv(&rows, &mut buf)?;
    fs::write(&a.out, buf)?;
    Ok(())
}

fn run_sos(a: SosArgs) -> Result<(), Error> {
    let poly = a.poly.as_deref().map(io::read_polynomial).transpose()?;
    let (nvars, degree) = match &poly {
        Some(p) => (p.nvars(), psdcone::sos::half_degree(p).max(1)),
        None => (a.nvars, a.degree),
    };
    if degree == 0 {
        return Err(Error::InvalidParams("degree must be at least 1".into()));
    }
    let gram_dim = psdcone::sos::monomial_basis(nvars, degree)?.len();
    let params = match a.proj {
        MethodArg::Randomized | MethodArg::Scaled => {
            let k = a.k.unwrap_or_else(|| (gram_dim as f64 * 0.2).ceil() as usize).max(1);
            let l = a.l.unwrap_or_else(|| 10.min(gram_dim.saturating_sub(k)));
            Some(RangeParams::new(k, l, a.q).with_seed(a.seed))
        }
        _ => None,
    };
    let proj = projector(a.proj, params, a.power_n)?;
    let gd = GdParams {
        epsilon: a.epsilon,
        beta: a.beta,
        max_iter: a.max_iter,
        seed: a.seed,
        ..GdParams::default()
    };
    let cfg = SosBenchConfig {
        nvars: a.nvars,
        degree: a.degree,
        offset: a.offset,
        rho: a.rho,
        seed: a.seed,
        poly,
    };
    let mut rep = experiments::run_sos_bench(&cfg, &proj, &gd)?;
    if !a.timing {
        rep.wall_time = None;
    }
    emit_json(&rep, a.out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Project(a) => run_project(a),
        Command::Solve(a) => run_solve(a),
        Command::BenchFig4(a) => run_fig4(a),
        Command::Sos(a) => run_sos(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = ErrorReport {
                error: e.kind(),
                message: e.to_string(),
            };
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| e.to_string()));
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

//! Command-line front end: solve, step, minimize, sweep, asymptotics, verify.
//!
//! Output schemas carry a "schema":"gapkit/1" marker; identical flags and
//! seeds produce byte-identical output. Exit codes: 0 success, 2 flag errors
//! (from the parser), 3 unreadable or invalid input, 4 solver failure,
//! 5 verification failure.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::asymptotics::{minimize_gap_proxy, solve_theta};
use crate::error::{Error, Result};
use crate::optimize::{
    minimize_convex_pl, minimize_single_well_grid, minimize_step_family, step_family_sweep,
    MinimizerReport,
};
use crate::potential::{BoundaryConditions, CoefficientP, Potential, Sign};
use crate::solver::{crossing_points, shoot_eigenvalues, SolverOptions};
use crate::step::step_eigenvalues;
use crate::verify::run_all;

pub const SCHEMA: &str = "gapkit/1";

#[derive(Parser, Debug)]
#[command(
    name = "gapkit",
    about = "Spectral-gap toolkit for Sturm-Liouville operators on [0, pi]",
    after_help = "Exit codes: 0 success, 2 flag errors, 3 invalid input files, \
                  4 solver failures, 5 verification failures.\n\
                  GAPKIT_THREADS bounds the worker pool used by sweep."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve for the lowest eigenpairs of a potential from a JSON descriptor
    Solve(SolveArgs),
    /// Closed-form step-potential spectrum with branch labels
    Step(StepArgs),
    /// Minimize the gap over a potential class
    Minimize(MinimizeArgs),
    /// Step-family minimization over a grid of heights (CSV output)
    Sweep(SweepArgs),
    /// Limiting constants and the reduced small-mu system
    Asymptotics(AsymptoticsArgs),
    /// Run the acceptance checklist and print a pass/fail table
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// JSON potential descriptor file
    #[arg(long)]
    pub potential: PathBuf,
    /// dirichlet | neumann | angles:a,b (radians in [0, pi))
    #[arg(long, default_value = "dirichlet")]
    pub bc: String,
    #[arg(short = 'k', long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub out: OutputFormat,
    /// write to this file instead of stdout
    #[arg(long)]
    pub out_path: Option<PathBuf>,
    /// output grid panels
    #[arg(long, default_value_t = 4096)]
    pub grid: usize,
    /// eigenvalue tolerance
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct StepArgs {
    #[arg(long = "M")]
    pub m: f64,
    #[arg(long)]
    pub xminus: f64,
    #[arg(short = 'k', long, default_value_t = 2)]
    pub k: usize,
    #[arg(long)]
    pub out_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MinimizeClassArg {
    Step,
    #[value(name = "single-well")]
    SingleWell,
    Convex,
}

#[derive(Args, Debug)]
pub struct MinimizeArgs {
    #[arg(long, value_enum)]
    pub class: MinimizeClassArg,
    #[arg(long = "M")]
    pub m: f64,
    /// background potential descriptor (V0)
    #[arg(long = "V0")]
    pub v0: Option<PathBuf>,
    /// sign applied to the variable part: + or -
    #[arg(long, default_value = "+")]
    pub sign: String,
    /// grid pieces for the single-well / convex classes
    #[arg(long, default_value_t = 32)]
    pub segments: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub out: OutputFormat,
    #[arg(long)]
    pub out_path: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// log:start,stop,count | lin:start,stop,count | comma-separated values
    #[arg(long = "M-grid", default_value = "log:0.5,1e6,25")]
    pub m_grid: String,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub out: OutputFormat,
    #[arg(long)]
    pub out_path: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct AsymptoticsArgs {
    /// heights for the large-M comparison table
    #[arg(long = "M-grid", default_value = "log:1e2,1e6,5")]
    pub m_grid: String,
    #[arg(long)]
    pub out_path: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out_path: Option<PathBuf>,
}

/// Parse "dirichlet", "neumann", or "angles:a,b".
pub fn parse_bc(spec: &str) -> Result<BoundaryConditions> {
    match spec {
        "dirichlet" => Ok(BoundaryConditions::dirichlet()),
        "neumann" => Ok(BoundaryConditions::neumann()),
        other => {
            let rest = other
                .strip_prefix("angles:")
                .ok_or_else(|| Error::InvalidInput(format!("unrecognized bc `{other}`")))?;
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::InvalidInput("angles want exactly two values".into()));
            }
            let alpha: f64 = parts[0]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad angle `{}`", parts[0])))?;
            let beta: f64 = parts[1]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad angle `{}`", parts[1])))?;
            BoundaryConditions::new(alpha, beta)
        }
    }
}

/// Parse "log:a,b,n", "lin:a,b,n", or "v1,v2,...".
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parse_triple = |rest: &str| -> Result<(f64, f64, usize)> {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidInput(format!("grid spec `{rest}` wants start,stop,count")));
        }
        let a: f64 =
            parts[0].trim().parse().map_err(|_| Error::InvalidInput("bad grid start".into()))?;
        let b: f64 =
            parts[1].trim().parse().map_err(|_| Error::InvalidInput("bad grid stop".into()))?;
        let n: usize =
            parts[2].trim().parse().map_err(|_| Error::InvalidInput("bad grid count".into()))?;
        if n < 2 || !(b > a) {
            return Err(Error::InvalidInput("grid wants stop > start and count >= 2".into()));
        }
        Ok((a, b, n))
    };
    if let Some(rest) = spec.strip_prefix("log:") {
        let (a, b, n) = parse_triple(rest)?;
        if !(a > 0.0) {
            return Err(Error::InvalidInput("log grid wants positive start".into()));
        }
        Ok((0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect())
    } else if let Some(rest) = spec.strip_prefix("lin:") {
        let (a, b, n) = parse_triple(rest)?;
        Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
    } else {
        spec.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad grid value `{s}`")))
            })
            .collect()
    }
}

fn load_potential(path: &PathBuf) -> Result<Potential> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    let v: Potential = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("cannot parse {}: {e}", path.display())))?;
    // re-validate through the constructor
    Potential::new(
        v.breakpoints.clone(),
        v.segments.clone(),
        v.class,
        v.background.as_deref().cloned(),
        v.sign,
    )
}

fn emit(out_path: &Option<PathBuf>, content: &str) -> Result<()> {
    match out_path {
        Some(path) => fs::write(path, content)
            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| Error::InvalidInput(format!("stdout: {e}")))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

fn run_solve(args: &SolveArgs) -> Result<()> {
    let v = load_potential(&args.potential)?;
    let bc = parse_bc(&args.bc)?;
    if args.k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let opts = SolverOptions { grid: args.grid, tol: args.tol, ..SolverOptions::default() };
    let p = CoefficientP::one();
    let sols = shoot_eigenvalues(&p, &v, bc, args.k, &opts)?;
    match args.out {
        OutputFormat::Json => {
            let crossings =
                if args.k >= 2 { crossing_points(&sols[0], &sols[1]).ok() } else { None };
            let body = json!({
                "schema": SCHEMA,
                "command": "solve",
                "bc": {"alpha": bc.alpha, "beta": bc.beta},
                "k": args.k,
                "eigenvalues": sols.iter().map(|s| json!({
                    "index": s.index,
                    "lambda": s.lambda,
                    "sign_changes": s.sign_changes,
                    "sup_norm": s.sup_norm,
                })).collect::<Vec<_>>(),
                "gamma": if args.k >= 2 { Some(sols[1].lambda - sols[0].lambda) } else { None },
                "crossings": crossings,
            });
            emit(&args.out_path, &to_json(&body))
        }
        OutputFormat::Csv => {
            let mut csv = String::from("x");
            for i in 1..=args.k {
                csv.push_str(&format!(",u{i}"));
            }
            csv.push_str(",V\n");
            for (row, &x) in sols[0].xs.iter().enumerate() {
                csv.push_str(&format!("{x:.12e}"));
                for sol in &sols {
                    csv.push_str(&format!(",{:.12e}", sol.us[row]));
                }
                csv.push_str(&format!(",{:.12e}\n", v.evaluate(x)?));
            }
            emit(&args.out_path, &csv)
        }
    }
}

fn run_step(args: &StepArgs) -> Result<()> {
    let evs = step_eigenvalues(args.m, args.xminus, args.k)?;
    let body = json!({
        "schema": SCHEMA,
        "command": "step",
        "M": args.m,
        "x_minus": args.xminus,
        "eigenvalues": evs,
        "gamma": if args.k >= 2 { Some(evs[1].lambda - evs[0].lambda) } else { None },
    });
    emit(&args.out_path, &to_json(&body))
}

#[derive(Serialize)]
struct MinimizeOutput<'a> {
    schema: &'static str,
    command: &'static str,
    /// sign minus means the variable part enters as V0 - V1; results in that
    /// mode are exploratory
    exploratory_sign: bool,
    #[serde(flatten)]
    report: &'a MinimizerReport,
}

fn run_minimize(args: &MinimizeArgs) -> Result<()> {
    let sign = match args.sign.as_str() {
        "+" | "plus" => Sign::Plus,
        "-" | "minus" => Sign::Minus,
        other => return Err(Error::InvalidInput(format!("sign must be + or -, got `{other}`"))),
    };
    let v0 = match &args.v0 {
        Some(path) => Some(load_potential(path)?),
        None => None,
    };
    let report = match args.class {
        MinimizeClassArg::Step => {
            if v0.is_some() || sign == Sign::Minus {
                return Err(Error::InvalidInput(
                    "the step family is solved in closed form without background or sign".into(),
                ));
            }
            minimize_step_family(args.m, args.tol)?
        }
        MinimizeClassArg::SingleWell => {
            minimize_single_well_grid(args.m, args.segments, v0, sign, args.tol, args.seed)?
        }
        MinimizeClassArg::Convex => {
            if sign == Sign::Minus {
                return Err(Error::InvalidInput(
                    "sign - is only wired for the single-well grid class".into(),
                ));
            }
            minimize_convex_pl(args.m, args.segments.clamp(3, 64), v0, args.tol, args.seed)?
        }
    };
    let body = MinimizeOutput {
        schema: SCHEMA,
        command: "minimize",
        exploratory_sign: sign == Sign::Minus,
        report: &report,
    };
    match args.out {
        OutputFormat::Json => emit(&args.out_path, &to_json(&body)),
        OutputFormat::Csv => Err(Error::InvalidInput("minimize emits JSON only".into())),
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = std::env::var("GAPKIT_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::NonConvergence(format!("thread pool: {e}")))
}

fn run_sweep(args: &SweepArgs) -> Result<()> {
    let grid = parse_grid(&args.m_grid)?;
    if grid.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::InvalidInput("sweep heights must be positive".into()));
    }
    let pool = thread_pool()?;
    let rows = pool.install(|| step_family_sweep(&grid, args.tol))?;
    match args.out {
        OutputFormat::Csv => {
            let mut csv = String::from("M,x_minus_star,lambda1,lambda2,gamma_star\n");
            for r in &rows {
                csv.push_str(&format!(
                    "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                    r.m, r.x_minus_star, r.lambda1, r.lambda2, r.gamma_star
                ));
            }
            emit(&args.out_path, &csv)
        }
        OutputFormat::Json => {
            let body = json!({ "schema": SCHEMA, "command": "sweep", "rows": rows });
            emit(&args.out_path, &to_json(&body))
        }
    }
}

fn run_asymptotics(args: &AsymptoticsArgs) -> Result<()> {
    let theta = solve_theta();
    let (y1_star, _gap_star) = minimize_gap_proxy()?;
    let grid = parse_grid(&args.m_grid)?;
    let rows = step_family_sweep(&grid, 1e-9)?;
    let table: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            json!({
                "M": r.m,
                "gamma_star": r.gamma_star,
                "gamma_star_minus_limit": r.gamma_star - theta.limit_gap,
            })
        })
        .collect();
    let body = json!({
        "schema": SCHEMA,
        "command": "asymptotics",
        "theta": theta.theta,
        "limit_gap": theta.limit_gap,
        "y1_star": y1_star,
        "table": table,
    });
    emit(&args.out_path, &to_json(&body))
}

fn run_verify(args: &VerifyArgs) -> Result<bool> {
    let outcomes = run_all(args.seed);
    let mut text = String::new();
    text.push_str(&format!("acceptance checklist (seed {})\n", args.seed));
    text.push_str(&format!("{:<4} {:<36} {:<6} detail\n", "id", "claim", "state"));
    for o in &outcomes {
        text.push_str(&format!(
            "{:<4} {:<36} {:<6} {}\n",
            o.id,
            o.name,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        ));
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    text.push_str(&format!("{} of {} checks passed\n", outcomes.len() - failed, outcomes.len()));
    emit(&args.out_path, &text)?;
    Ok(failed == 0)
}

/// Dispatch a parsed command; Ok(true) means success, Ok(false) a
/// verification failure (exit 5).
pub fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Solve(a) => run_solve(a).map(|_| true),
        Command::Step(a) => run_step(a).map(|_| true),
        Command::Minimize(a) => run_minimize(a).map(|_| true),
        Command::Sweep(a) => run_sweep(a).map(|_| true),
        Command::Asymptotics(a) => run_asymptotics(a).map(|_| true),
        Command::Verify(a) => run_verify(a),
    }
}

/// Exit code for a toolkit error: 3 for bad input, 4 for numerical failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidInput(_) | Error::InvalidPotential(_) | Error::OutOfDomain { .. } => 3,
        _ => 4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn bc_parsing() {
        assert!(parse_bc("dirichlet").unwrap().is_dirichlet());
        let n = parse_bc("neumann").unwrap();
        assert!((n.alpha - PI / 2.0).abs() < 1e-15);
        let r = parse_bc("angles:0.3,1.1").unwrap();
        assert!((r.alpha - 0.3).abs() < 1e-15 && (r.beta - 1.1).abs() < 1e-15);
        assert!(parse_bc("angles:9,0").is_err());
        assert!(parse_bc("bogus").is_err());
    }

    #[test]
    fn grid_parsing() {
        let g = parse_grid("log:1,100,3").unwrap();
        assert_eq!(g.len(), 3);
        assert!((g[1] - 10.0).abs() < 1e-12);
        let g = parse_grid("lin:0,1,5").unwrap();
        assert!((g[2] - 0.5).abs() < 1e-15);
        let g = parse_grid("1,2.5,7").unwrap();
        assert_eq!(g, vec![1.0, 2.5, 7.0]);
        assert!(parse_grid("log:-1,10,4").is_err());
        assert!(parse_grid("lin:1,0,4").is_err());
    }
}

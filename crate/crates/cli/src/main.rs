//! `mata`: model-averaged tail-area intervals and their coverage bound.

mod config;
mod data;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mata_core::bound::{bound_curve, upper_bound, CurveRow, DRule};
use mata_core::coverage::QuadratureConfig;
use mata_core::error::MataError;
use mata_core::linreg::{RegressionProblem, MAX_NUISANCE};
use mata_core::mata::{solve_interval, MataRequest};
use mata_core::suites;
use mata_core::weights::WeightSpec;
use nalgebra::DVector;

use crate::data::{design, parse_list, read_table, Layout};
use crate::output::{sig6, write_curve};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] MataError),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Input(_) => 2,
            CliError::Core(e) => match e {
                MataError::BracketFailure(_)
                | MataError::QuadratureError { .. }
                | MataError::EventMismatch { .. }
                | MataError::Inconsistent(_)
                | MataError::DegenerateFit => 3,
                _ => 2,
            },
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "mata", version, about, args_override_self = true)]
struct Cli {
    /// key = value file whose entries act as flags for the subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Model-averaged interval for a' beta from a CSV data set.
    Interval(IntervalArgs),
    /// Correlations between theta_hat and each nuisance estimate.
    RhoMax(RhoMaxArgs),
    /// Upper bound on minimum coverage for one design.
    Bound(BoundArgs),
    /// Bound as a function of |rho|_max for several sample sizes.
    Curve(CurveArgs),
    /// Run a named simulation check.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// CSV with predictors and the response.
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Treat the first row as a header.
    #[arg(long, conflicts_with = "no_header")]
    header: bool,
    /// Treat the first row as data.
    #[arg(long)]
    no_header: bool,
    /// 1-based response column (default: last).
    #[arg(long, conflicts_with = "no_response")]
    y_col: Option<usize>,
    /// The file holds predictors only.
    #[arg(long)]
    no_response: bool,
    /// Prepend a column of ones.
    #[arg(long)]
    intercept: bool,
    /// Comma-separated values subtracted from each predictor column.
    #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
    center: Option<String>,
    /// Number of leading columns always kept in the model.
    #[arg(long, default_value_t = 1)]
    q: usize,
    /// Comma-separated interest vector; default selects the first coefficient.
    #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
    a: Option<String>,
}

impl DataArgs {
    fn header_flag(&self) -> Option<bool> {
        match (self.header, self.no_header) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        }
    }

    fn problem(&self, with_response: bool) -> Result<RegressionProblem, CliError> {
        let path = self.data.as_ref().ok_or_else(|| CliError::Input("--data is required".into()))?;
        let table = read_table(path, self.header_flag())?;
        let center = self.center.as_deref().map(|c| parse_list(c, "--center")).transpose()?;
        let layout = Layout { y_col: self.y_col, has_response: !self.no_response, intercept: self.intercept, center };
        let (x, y) = design(&table, &layout)?;
        let p = x.ncols();
        if self.q == 0 || self.q >= p {
            return Err(CliError::Input(format!("--q must lie in 1..{p}")));
        }
        if p - self.q > MAX_NUISANCE {
            return Err(CliError::Input(format!(
                "{} nuisance columns exceed the enumeration cap of {MAX_NUISANCE}; refusing to subsample",
                p - self.q
            )));
        }
        let a = match &self.a {
            Some(s) => {
                let v: Vec<f64> = parse_list(s, "--a")?;
                if v.len() != p {
                    return Err(CliError::Input(format!("--a has {} entries but the design has {p} columns", v.len())));
                }
                DVector::from_vec(v)
            }
            None => DVector::from_fn(p, |i, _| if i == 0 { 1.0 } else { 0.0 }),
        };
        if with_response && y.is_none() {
            return Err(CliError::Input("this subcommand needs a response column".into()));
        }
        Ok(RegressionProblem::new(x, y.filter(|_| with_response), a, self.q)?)
    }
}

#[derive(Args, Debug)]
struct IntervalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// aic, bic or fixed:<d>.
    #[arg(long, default_value = "aic")]
    d_rule: String,
}

#[derive(Args, Debug)]
struct RhoMaxArgs {
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args, Debug, Clone)]
struct QuadArgs {
    /// Half-width of the x range in standard deviations.
    #[arg(long)]
    x_halfwidth: Option<f64>,
    #[arg(long)]
    nodes_x: Option<usize>,
    #[arg(long)]
    nodes_y: Option<usize>,
    /// Largest gamma on the coarse search grid.
    #[arg(long)]
    gamma_max: Option<f64>,
    #[arg(long)]
    delta_tol: Option<f64>,
}

impl QuadArgs {
    fn config(&self) -> Result<QuadratureConfig, CliError> {
        let mut q = QuadratureConfig::default();
        q.x_halfwidth = self.x_halfwidth.unwrap_or(q.x_halfwidth);
        q.nodes_x = self.nodes_x.unwrap_or(q.nodes_x);
        q.nodes_y = self.nodes_y.unwrap_or(q.nodes_y);
        q.gamma_grid_max = self.gamma_max.unwrap_or(q.gamma_grid_max);
        q.delta_tol = self.delta_tol.unwrap_or(q.delta_tol);
        q.validate()?;
        Ok(q)
    }
}

#[derive(Args, Debug)]
struct BoundArgs {
    /// Largest |correlation| between theta_hat and a nuisance estimate.
    #[arg(long, conflicts_with = "data")]
    rho_max: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value = "aic")]
    d_rule: String,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    quad: QuadArgs,
    /// Also write the CSV here.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CurveArgs {
    #[arg(long)]
    p: usize,
    /// Comma-separated sample sizes.
    #[arg(long, value_name = "LIST")]
    n: String,
    #[arg(long, default_value = "aic")]
    d_rule: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    rho_step: f64,
    /// Last |rho|_max on the grid.
    #[arg(long, default_value_t = 0.95)]
    rho_end: f64,
    #[command(flatten)]
    quad: QuadArgs,
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Suite {
    IntegralVsMc,
    Theorem2,
    Theorem4,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    suite: Suite,
    /// Replicates per configuration.
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if alpha > 0.0 && alpha <= 0.5 {
        Ok(())
    } else {
        Err(CliError::Input(format!("--alpha must lie in (0, 0.5], got {alpha}")))
    }
}

fn run_interval(args: &IntervalArgs, out: &mut impl Write) -> Result<(), CliError> {
    check_alpha(args.alpha)?;
    let d_rule: DRule = args.d_rule.parse()?;
    let prob = args.data.problem(true)?;
    let spec = WeightSpec::gic(d_rule.d(prob.n()), prob.n())?;
    let iv = solve_interval(&MataRequest::new(prob, None, spec, args.alpha)?)?;
    writeln!(out, "lower,upper").ok();
    writeln!(out, "{},{}", sig6(iv.lower), sig6(iv.upper)).ok();
    writeln!(out).ok();
    writeln!(out, "rank,restricted_columns,weight").ok();
    for (i, (k, w)) in iv.top_weights(10).iter().enumerate() {
        writeln!(out, "{},\"{k}\",{}", i + 1, sig6(*w)).ok();
    }
    Ok(())
}

fn run_rho_max(args: &RhoMaxArgs, out: &mut impl Write) -> Result<(), CliError> {
    let prob = args.data.problem(false)?;
    let prof = prob.correlation_profile();
    writeln!(out, "column,rho").ok();
    for (k, r) in prof.rho.iter().enumerate() {
        writeln!(out, "{},{}", prob.q() + k + 1, sig6(*r)).ok();
    }
    writeln!(out).ok();
    writeln!(out, "rho_max_abs,{}", sig6(prof.rho_max_abs)).ok();
    writeln!(out, "argmax_column,{}", prof.argmax + 1).ok();
    Ok(())
}

fn run_bound(args: &BoundArgs, out: &mut impl Write) -> Result<(), CliError> {
    check_alpha(args.alpha)?;
    let d_rule: DRule = args.d_rule.parse()?;
    let quad = args.quad.config()?;
    let (rho, n, p) = match args.rho_max {
        Some(rho) => {
            let n = args.n.ok_or_else(|| CliError::Input("--n is required with --rho-max".into()))?;
            let p = args.p.ok_or_else(|| CliError::Input("--p is required with --rho-max".into()))?;
            (rho, n, p)
        }
        None => {
            if args.data.data.is_none() {
                return Err(CliError::Input("give either --rho-max with --n and --p, or --data".into()));
            }
            let prob = args.data.problem(false)?;
            (prob.correlation_profile().rho_max_abs, prob.n(), prob.p())
        }
    };
    if p < 2 || n <= p {
        return Err(CliError::Input(format!("need 2 <= p < n, got n = {n}, p = {p}")));
    }
    let r = upper_bound(rho, n - p, n, d_rule.d(n), args.alpha, &quad)?;
    let row = CurveRow::from_result(&r);
    let text = format!(
        "{}\n{},{},{},{},{},{},{}\n",
        CurveRow::HEADER.join(","),
        row.n,
        row.m,
        sig6(row.d),
        sig6(row.alpha),
        sig6(row.rho_max_abs),
        sig6(row.gamma_star),
        sig6(row.upper_bound)
    );
    write!(out, "{text}").ok();
    if let Some(path) = &args.output {
        std::fs::write(path, &text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn rho_grid(step: f64, end: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0) || !(0.0..1.0).contains(&end) {
        return Err(CliError::Input("--rho-step must be positive and --rho-end in [0, 1)".into()));
    }
    let count = (end / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| i as f64 * step).collect())
}

fn run_curve(args: &CurveArgs, out: &mut impl Write) -> Result<(), CliError> {
    check_alpha(args.alpha)?;
    let d_rule: DRule = args.d_rule.parse()?;
    let quad = args.quad.config()?;
    let ns: Vec<usize> = parse_list(&args.n, "--n")?;
    if let Some(&bad) = ns.iter().find(|&&n| n <= args.p) {
        return Err(CliError::Input(format!("every n must exceed p = {}, got {bad}", args.p)));
    }
    let pairs: Vec<(usize, usize)> = ns.iter().map(|&n| (n - args.p, n)).collect();
    let curves = bound_curve(&rho_grid(args.rho_step, args.rho_end)?, &pairs, d_rule, args.alpha, &quad)?;
    let rows: Vec<CurveRow> = curves.iter().flat_map(|c| c.rows.iter().copied()).collect();
    match &args.output {
        Some(path) => {
            let f = std::fs::File::create(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            write_curve(f, &rows)?;
            for c in &curves {
                writeln!(out, "n = {}: largest rise {}", c.n, sig6(c.max_increase)).ok();
            }
        }
        None => write_curve(out, &rows)?,
    }
    Ok(())
}

fn run_verify(args: &VerifyArgs, out: &mut impl Write) -> Result<(), CliError> {
    let quad = QuadratureConfig::default();
    let mut failed = 0usize;
    match args.suite {
        Suite::IntegralVsMc => {
            let checks = suites::integral_vs_mc(args.reps.unwrap_or(100_000), args.seed, &quad)?;
            writeln!(out, "m,n,rho,d_rule,gamma,analytic,mc,se,z,status").ok();
            for c in &checks {
                failed += usize::from(!c.passed());
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    c.m,
                    c.n,
                    sig6(c.rho),
                    c.d_rule,
                    sig6(c.gamma),
                    sig6(c.analytic),
                    sig6(c.mc.p_hat),
                    sig6(c.mc.se),
                    sig6(c.z()),
                    if c.passed() { "pass" } else { "FAIL" }
                )
                .ok();
            }
        }
        Suite::Theorem2 => {
            let checks = suites::theorem2(args.reps.unwrap_or(10_000), args.seed, &quad)?;
            writeln!(out, "d_rule,rho_max_abs,bound,scan_min,se,status").ok();
            for c in &checks {
                failed += usize::from(!c.passed());
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    c.d_rule,
                    sig6(c.bound.rho_max_abs),
                    sig6(c.bound.upper_bound),
                    sig6(c.scan.min_estimate.p_hat),
                    sig6(c.scan.min_estimate.se),
                    if c.passed() { "pass" } else { "FAIL" }
                )
                .ok();
            }
        }
        Suite::Theorem4 => {
            let c = suites::theorem4(args.reps.unwrap_or(100_000), args.seed)?;
            writeln!(out, "n,gamma,p_hat,se").ok();
            for row in &c.rows {
                for (g, e) in &row.estimates {
                    writeln!(out, "{},{},{},{}", row.n, sig6(*g), sig6(e.p_hat), sig6(e.se)).ok();
                }
            }
            writeln!(out, "trend,{}", if c.trend_passed() { "pass" } else { "FAIL" }).ok();
            writeln!(out, "gamma0_supremum,{}", if c.sup_column_passed() { "pass" } else { "FAIL" }).ok();
            failed += usize::from(!c.passed());
        }
    }
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} check(s) failed")));
    }
    Ok(())
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("MATA_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| CliError::Input(format!("MATA_THREADS must be an integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run() -> Result<(), CliError> {
    let args = config::expand(std::env::args().collect())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 2 } else { 0 });
        }
    };
    init_threads()?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Interval(a) => run_interval(a, &mut out),
        Command::RhoMax(a) => run_rho_max(a, &mut out),
        Command::Bound(a) => run_bound(a, &mut out),
        Command::Curve(a) => run_curve(a, &mut out),
        Command::Verify(a) => run_verify(a, &mut out),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! Command-line driver for the jet-space engine. `run` is the whole program
//! minus process I/O so that tests can call it directly.

use clap::{Args, Parser, Subcommand};
use jetlab_core::expr::{instantiate_fn, Atom, Expr, ZeroPolicy};
use jetlab_core::numeric::{
    check_solution_derivatives, scan_residual, GridSpec, NumericError, DEFAULT_REL_TOL, DEFAULT_STEP,
};
use jetlab_core::parser::{parse_problem, placeholder, AnsatzSpec, Problem, SolutionSpec};
use jetlab_core::reduction::{
    bind_constants, collect_reduced_system, compare_system, explicit_form, solve_constants, substitute_ansatz,
    verify_conditional_invariance, verify_ode_solution, verify_solution_residual, Chart, ReducedSystem, ReductionError,
};
use jetlab_core::selfcheck::{run_selfcheck, DEFAULT_CASES};
use jetlab_core::series::EpsSeries;
use jetlab_core::symmetry::{build_constraints, check_symmetry, sample_on_manifold, split_eps, SymmetryMode};
use jetlab_core::{is_zero, CheckReport, Verdict};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::time::Instant;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "jetlab", version, about = "Approximate nonclassical symmetries of evolution equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Emit the report as JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Number of random samples for zero tests.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Relative tolerance for zero tests.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Sampling seed (overrides JETLAB_SEED and the problem file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Include wall-clock timing in the report.
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Args, Clone)]
pub struct ProblemArg {
    #[arg(long)]
    pub problem: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Determining residual of a characteristic.
    CheckSymmetry {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long)]
        characteristic: String,
        /// classical | nonclassical | approximate | approximate-full
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        order: Option<usize>,
    },
    /// Determining equations split by powers of eps.
    SplitEps {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long)]
        characteristic: String,
        #[arg(long)]
        order: Option<usize>,
    },
    /// Residual of a solution series, plus finite-difference checks of its derivatives.
    VerifySolution {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long)]
        solution: String,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        grid: Option<String>,
    },
    /// Conditional invariance of a solution series under its characteristic.
    VerifyInvariance {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long)]
        solution: String,
        #[arg(long)]
        characteristic: Option<String>,
        #[arg(long)]
        order: Option<usize>,
    },
    /// Substitutes an ansatz, collects its ODE system and verifies ODE solutions.
    Reduce {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long)]
        ansatz: String,
    },
    /// Randomized property battery.
    Selfcheck {
        #[arg(long, default_value_t = DEFAULT_CASES)]
        cases: usize,
    },
    /// Residual of u0 + eps u1 against eps on a grid.
    ScanResidual {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long)]
        solution: String,
        /// Comma-separated eps values.
        #[arg(long, value_delimiter = ',', default_values_t = [1e-1, 1e-2, 1e-3])]
        eps: Vec<f64>,
        /// t=lo..hi; x=lo..hi; n=N
        #[arg(long)]
        grid: Option<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CheckSymmetry { .. } => "check-symmetry",
            Command::SplitEps { .. } => "split-eps",
            Command::VerifySolution { .. } => "verify-solution",
            Command::VerifyInvariance { .. } => "verify-invariance",
            Command::Reduce { .. } => "reduce",
            Command::Selfcheck { .. } => "selfcheck",
            Command::ScanResidual { .. } => "scan-residual",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,
    pub seed: u64,
    pub verdict: Verdict,
    pub checks: Vec<CheckReport>,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub details: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
}

impl RunReport {
    pub fn render(&self) -> String {
        let mut out = format!("jetlab {} | {}", self.version, self.args.join(" "));
        if let Some(p) = &self.problem {
            out.push_str(&format!(" | problem {p}"));
        }
        out.push_str(&format!(" | seed {}\n", self.seed));
        if let Some(lines) = self.details.get("text").and_then(Value::as_array) {
            for l in lines.iter().filter_map(Value::as_str) {
                out.push_str(l);
                out.push('\n');
            }
        }
        for c in &self.checks {
            out.push_str(&c.render());
        }
        out.push_str(&format!("verdict: {}\n", self.verdict));
        if let Some(t) = self.timing_ms {
            out.push_str(&format!("time: {t:.1} ms\n"));
        }
        out
    }
}

pub fn exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Pass => 0,
        Verdict::Fail => 1,
        Verdict::Inconclusive => 3,
    }
}

/// Result of one invocation: exit code and the text for stdout and stderr.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
    pub report: Option<RunReport>,
}

/// Parse/config failures map to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl<E: std::fmt::Display> From<E> for ConfigError {
    fn from(e: E) -> Self {
        ConfigError(e.to_string())
    }
}

struct Ctx {
    problem: Option<Problem>,
    policy: ZeroPolicy,
}

fn load(path: &PathBuf, common: &Common) -> Result<Ctx, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let problem = parse_problem(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let mut policy = problem.zero_policy();
    apply_common(&mut policy, common);
    Ok(Ctx { problem: Some(problem), policy })
}

fn apply_common(policy: &mut ZeroPolicy, common: &Common) {
    if let Some(s) = common.samples {
        policy.samples = s;
    }
    if let Some(t) = common.tol {
        policy.tol = t;
    }
    if let Some(s) = common.seed {
        policy.seed = s;
    }
}

/// Runs one command line (without the program name).
pub fn run<I, S>(args: I) -> Outcome
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(std::iter::once("jetlab".to_string()).chain(args.iter().cloned())) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let (stdout, stderr) = if code == 0 { (text, String::new()) } else { (String::new(), text) };
            return Outcome { code, stdout, stderr, report: None };
        }
    };
    let start = Instant::now();
    match execute(&cli) {
        Ok((problem, seed, checks, details)) => {
            let verdict = checks.iter().fold(Verdict::Pass, |v, c| v.merge(c.verdict));
            let report = RunReport {
                schema: SCHEMA,
                tool: "jetlab".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: cli.command.name().into(),
                args: args.clone(),
                problem,
                seed,
                verdict,
                checks,
                details,
                timing_ms: cli.common.timing.then(|| start.elapsed().as_secs_f64() * 1e3),
            };
            let stdout = if cli.common.json {
                serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
            } else {
                report.render()
            };
            Outcome { code: exit_code(verdict), stdout, stderr: String::new(), report: Some(report) }
        }
        Err(ConfigError(msg)) => {
            Outcome { code: 2, stdout: String::new(), stderr: format!("error: {msg}\n"), report: None }
        }
    }
}

type Executed = (Option<String>, u64, Vec<CheckReport>, Value);

fn execute(cli: &Cli) -> Result<Executed, ConfigError> {
    let common = &cli.common;
    if let Command::Selfcheck { cases } = &cli.command {
        let mut policy = ZeroPolicy::from_env();
        apply_common(&mut policy, common);
        let r = run_selfcheck(*cases, policy.seed, &policy);
        return Ok((None, policy.seed, vec![r], Value::Null));
    }
    let path = match &cli.command {
        Command::CheckSymmetry { problem, .. }
        | Command::SplitEps { problem, .. }
        | Command::VerifySolution { problem, .. }
        | Command::VerifyInvariance { problem, .. }
        | Command::Reduce { problem, .. }
        | Command::ScanResidual { problem, .. } => &problem.problem,
        Command::Selfcheck { .. } => unreachable!(),
    };
    let ctx = load(path, common)?;
    let problem = ctx.problem.as_ref().expect("loaded");
    let policy = &ctx.policy;
    let (checks, details) = match &cli.command {
        Command::CheckSymmetry { characteristic, mode, order, .. } => {
            cmd_check_symmetry(problem, characteristic, mode.as_deref(), *order, policy)?
        }
        Command::SplitEps { characteristic, order, .. } => cmd_split_eps(problem, characteristic, *order, policy)?,
        Command::VerifySolution { solution, order, grid, .. } => {
            cmd_verify_solution(problem, solution, *order, grid.as_deref(), policy)?
        }
        Command::VerifyInvariance { solution, characteristic, order, .. } => {
            cmd_verify_invariance(problem, solution, characteristic.as_deref(), *order, policy)?
        }
        Command::Reduce { ansatz, .. } => cmd_reduce(problem, ansatz, policy)?,
        Command::ScanResidual { solution, eps, grid, .. } => cmd_scan(problem, solution, eps, grid.as_deref(), policy)?,
        Command::Selfcheck { .. } => unreachable!(),
    };
    Ok((Some(problem.name.clone()), policy.seed, checks, details))
}

fn characteristic<'a>(
    problem: &'a Problem,
    name: &str,
) -> Result<&'a jetlab_core::parser::Characteristic, ConfigError> {
    problem
        .characteristic(name)
        .ok_or_else(|| ConfigError(format!("no characteristic '{name}' in problem {}", problem.name)))
}

fn solution<'a>(problem: &'a Problem, name: &str) -> Result<&'a SolutionSpec, ConfigError> {
    problem.solution(name).ok_or_else(|| ConfigError(format!("no solution '{name}' in problem {}", problem.name)))
}

fn cmd_check_symmetry(
    problem: &Problem,
    name: &str,
    mode: Option<&str>,
    order: Option<usize>,
    policy: &ZeroPolicy,
) -> Result<(Vec<CheckReport>, Value), ConfigError> {
    let c = characteristic(problem, name)?;
    let mode = match mode {
        Some(m) => SymmetryMode::parse(m).ok_or_else(|| ConfigError(format!("unknown mode '{m}'")))?,
        None => {
            c.mode.unwrap_or(if c.eta.order() == 0 { SymmetryMode::Nonclassical } else { SymmetryMode::Approximate })
        }
    };
    let order = order.unwrap_or(c.eta.order());
    let mut r = check_symmetry(&problem.pde, &c.eta, mode, order, policy)?;
    r.label = format!("{name} in {} ({} mode, order {order})", problem.pde.name, mode.as_str());
    if let Some(n) = &c.note {
        r.notes.push(n.clone());
    }
    Ok((vec![r], Value::Null))
}

/// A generic function of t, x and u..u_order standing for an unknown coefficient.
fn symbolic_coefficient(name: &str, order: u32) -> Expr {
    let args: Vec<Expr> = [Expr::t(), Expr::x()].into_iter().chain((0..=order).map(Expr::u)).collect();
    Expr::func(name, args)
}

fn is_symbolic(e: &Expr, name: &str) -> bool {
    e.as_single_term().is_some_and(|(m, _)| matches!(m.factors(), [(Atom::Func(app), _)] if &*app.name == name))
}

/// Prints each eps^i equation as an equation for a generic eta^i, with the
/// lower coefficients substituted, and checks concrete eta^i on the
/// manifold of eta^0.
fn cmd_split_eps(
    problem: &Problem,
    name: &str,
    order: Option<usize>,
    policy: &ZeroPolicy,
) -> Result<(Vec<CheckReport>, Value), ConfigError> {
    let c = characteristic(problem, name)?;
    let order = order.unwrap_or(c.eta.order());
    if order > c.eta.order() {
        return Err(ConfigError(format!("characteristic {name} has order {}", c.eta.order())));
    }
    let mut text = Vec::new();
    let mut json_eqs = Vec::new();
    let mut checks = Vec::new();
    for i in 0..=order {
        let coeff = &c.eta.coeffs()[i];
        let label = format!("eta{i}");
        let generic = i > 0 && !is_symbolic(coeff, &label);
        let eq = if generic {
            let k = coeff.max_jet_order().unwrap_or(0).max(6);
            let mut coeffs = c.eta.coeffs()[..i].to_vec();
            coeffs.push(symbolic_coefficient(&label, k));
            split_eps(&problem.pde, &EpsSeries::new(coeffs)).pop().expect("one equation per order")
        } else {
            split_eps(&problem.pde, &c.eta.truncate(i)).pop().expect("one equation per order")
        };
        text.push(format!("eps^{}: {} = 0", eq.order, eq.full));
        let mut contribs = Vec::new();
        for ct in &eq.contributions {
            text.push(format!("  {}: {}", ct.label, ct.expr));
            contribs.push(json!({"label": ct.label, "expr": ct.expr.to_string()}));
        }
        json_eqs.push(json!({"order": eq.order, "equation": eq.full.to_string(), "contributions": contribs}));
        if generic {
            let concrete = split_eps(&problem.pde, &c.eta.truncate(i)).pop().expect("one equation per order");
            let top = concrete.full.max_jet_order().unwrap_or(0);
            let cs = build_constraints(&c.eta.coeffs()[0], top)?;
            let mut r = sample_on_manifold(&concrete.full, &cs, policy)?;
            r.label = format!("eps^{i} equation at eta{i} = {coeff}, on eta0 = 0");
            checks.push(r);
        }
    }
    if checks.is_empty() {
        checks.push(CheckReport::new(format!("split {name} in {} up to eps^{order}", problem.pde.name), Verdict::Pass));
    }
    Ok((checks, json!({"equations": json_eqs, "text": text})))
}

/// Replaces opaque functions of a characteristic by the solution's bodies.
fn bind_functions(eta: &EpsSeries, spec: &SolutionSpec) -> Result<EpsSeries, ConfigError> {
    let params: Vec<_> = (1..=16).map(placeholder).collect();
    let mut out = eta.clone();
    for (name, body) in &spec.functions {
        out = out.try_map(|e| instantiate_fn(e, name, &params, body))?;
    }
    Ok(out)
}

fn cmd_verify_solution(
    problem: &Problem,
    name: &str,
    order: Option<usize>,
    grid: Option<&str>,
    policy: &ZeroPolicy,
) -> Result<(Vec<CheckReport>, Value), ConfigError> {
    let s = solution(problem, name)?;
    let order = order.unwrap_or(s.series.order());
    let grid = grid_points(grid, s.series.coeffs().iter().collect(), policy)?;
    let top = problem.pde.max_jet_order().max(1);
    let (residual, fd) = rayon::join(
        || verify_solution_residual(&problem.pde, &s.series, order, policy),
        || {
            s.series.coeffs()[..=order.min(s.series.order())]
                .par_iter()
                .enumerate()
                .map(|(i, c)| {
                    let mut r = check_solution_derivatives(c, top, &grid, DEFAULT_STEP, DEFAULT_REL_TOL)?;
                    r.label = format!("finite differences of u{i}");
                    Ok(r)
                })
                .collect::<Result<Vec<_>, NumericError>>()
        },
    );
    let mut residual = residual?;
    if let Some(n) = &s.note {
        residual.notes.push(n.clone());
    }
    Ok((vec![residual, CheckReport::aggregate("numeric derivatives", fd?)], Value::Null))
}

fn grid_points(
    spec: Option<&str>,
    exprs: Vec<&Expr>,
    policy: &ZeroPolicy,
) -> Result<Vec<jetlab_core::expr::Point>, ConfigError> {
    let base = GridSpec::from_policy(policy);
    let g = match spec {
        Some(s) => GridSpec::parse(s, base)?,
        None => base,
    };
    Ok(g.points(&exprs, policy))
}

fn cmd_verify_invariance(
    problem: &Problem,
    name: &str,
    char_override: Option<&str>,
    order: Option<usize>,
    policy: &ZeroPolicy,
) -> Result<(Vec<CheckReport>, Value), ConfigError> {
    let s = solution(problem, name)?;
    let cname = char_override
        .or(s.characteristic.as_deref())
        .ok_or_else(|| ConfigError(format!("solution {name} names no characteristic; pass --characteristic")))?;
    let c = characteristic(problem, cname)?;
    let eta = bind_functions(&c.eta, s)?;
    let order = order.unwrap_or(s.series.order().min(eta.order()));
    let mut r = verify_conditional_invariance(&eta, &s.series, order, policy)?;
    r.label = format!("{name} under {cname} at order {order}");
    if let Some(n) = &s.note {
        r.notes.push(n.clone());
    }
    Ok((vec![r], Value::Null))
}

/// The steps of `reduce` as library calls; the report children are the
/// per-order collections and the ODE solution checks.
pub fn reduce_ansatz(
    problem: &Problem,
    spec: &AnsatzSpec,
    policy: &ZeroPolicy,
) -> Result<(Vec<CheckReport>, Vec<String>), ConfigError> {
    let a = &spec.ansatz;
    let order = a.expr.order();
    let residual = substitute_ansatz(&problem.pde, a, order)?;
    let chart = spec.radical.as_ref().map(Chart::new).transpose()?;
    let mut systems: Vec<ReducedSystem> = Vec::new();
    let mut checks = Vec::new();
    let mut text = Vec::new();
    for i in 0..=order {
        let res = &residual.coeffs()[i];
        match &spec.bases[i] {
            None => {
                let mut r = is_zero(res, policy);
                r.label = format!("eps^{i} residual vanishes");
                checks.push(r);
            }
            Some(basis) => {
                let sys = collect_reduced_system(res, basis, chart.as_ref(), policy)?;
                systems.push(sys);
            }
        }
    }
    if !a.constants.is_empty() {
        let all = ReducedSystem {
            basis: systems.iter().flat_map(|s| s.basis.clone()).collect(),
            equations: systems.iter().flat_map(|s| s.equations.clone()).collect(),
        };
        let constants = solve_constants(&all, &a.unknowns, &a.constants)?;
        for (k, v) in &constants {
            text.push(format!("constant {k} = {v}"));
        }
        for s in systems.iter_mut() {
            for e in s.equations.iter_mut() {
                *e = bind_constants(e, &constants)?;
            }
        }
    }
    let mut sys_iter = systems.iter();
    for i in 0..=order {
        if spec.bases[i].is_none() {
            continue;
        }
        let sys = sys_iter.next().expect("one system per basis");
        for (b, e) in sys.basis.iter().zip(&sys.equations) {
            let shown = match explicit_form(e, &a.unknowns)? {
                Some((n, rhs)) => format!("d{n} = {rhs}"),
                None => format!("{e} = 0"),
            };
            text.push(format!("eps^{i} [{b}]: {shown}"));
        }
        if let Some(expected) = &spec.systems[i] {
            let mut r = compare_system(sys, &a.unknowns, expected, policy)?;
            r.label = format!("eps^{i} system of {}", a.name);
            checks.push(r);
        }
        let odes: Vec<_> = problem.ode_solutions.iter().filter(|o| o.ansatz == a.name).collect();
        let verified = odes
            .par_iter()
            .map(|ode| {
                let mut r = verify_ode_solution(sys, &a.unknowns, &ode.bindings, policy)?;
                r.label = format!("{} solves the eps^{i} system", ode.name);
                if let Some(n) = &ode.note {
                    r.notes.push(n.clone());
                }
                Ok(r)
            })
            .collect::<Result<Vec<_>, ReductionError>>()?;
        checks.extend(verified);
    }
    if checks.is_empty() {
        checks.push(CheckReport::new(format!("{} collected", a.name), Verdict::Pass));
    }
    Ok((checks, text))
}

fn cmd_reduce(problem: &Problem, name: &str, policy: &ZeroPolicy) -> Result<(Vec<CheckReport>, Value), ConfigError> {
    let spec =
        problem.ansatz(name).ok_or_else(|| ConfigError(format!("no ansatz '{name}' in problem {}", problem.name)))?;
    let (checks, text) = reduce_ansatz(problem, spec, policy)?;
    Ok((checks, json!({ "text": text })))
}

fn cmd_scan(
    problem: &Problem,
    name: &str,
    eps: &[f64],
    grid: Option<&str>,
    policy: &ZeroPolicy,
) -> Result<(Vec<CheckReport>, Value), ConfigError> {
    let s = solution(problem, name)?;
    let points = grid_points(grid, s.series.coeffs().iter().collect(), policy)?;
    let scan = scan_residual(&problem.pde, &s.series, eps, &points)?;
    let text: Vec<String> = scan
        .rows
        .iter()
        .map(|r| format!("eps {:e}: max residual {:.3e} over {} points", r.eps, r.max_residual, r.points))
        .collect();
    let details = json!({ "rows": scan.rows, "slope": scan.slope, "text": text });
    Ok((vec![scan.check], details))
}

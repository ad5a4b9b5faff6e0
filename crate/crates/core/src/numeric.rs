//! Floating-point cross-checks of the symbolic results: central differences
//! against symbolic x-derivatives and the ε-scaling of solution residuals.

use crate::calculus::EvolutionPDE;
use crate::expr::{eval_numeric, free_atoms, render_point, Atom, Expr, ExprError, Point, ZeroPolicy};
use crate::reduction::jet_evaluate;
use crate::report::{CheckReport, Sample, Verdict};
use crate::series::EpsSeries;
use serde::Serialize;
use std::collections::BTreeSet;
use thiserror::Error;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_REL_TOL: f64 = 1e-6;
pub const MIN_SLOPE: f64 = 1.9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("invalid grid spec: {0}")]
    GridSpec(String),
    #[error("eps values must be positive and span at least two decades")]
    EpsRange,
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// A tensor grid over t and x.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub t: (f64, f64),
    pub x: (f64, f64),
    pub nt: usize,
    pub nx: usize,
}

impl GridSpec {
    /// 64 points over the policy's t and x boxes.
    pub fn from_policy(policy: &ZeroPolicy) -> Self {
        GridSpec { t: policy.box_for(&Atom::T), x: policy.box_for(&Atom::X), nt: 8, nx: 8 }
    }

    /// `t=lo..hi; x=lo..hi; n=N` with every key optional; N points are split
    /// into a near-square tensor grid.
    pub fn parse(spec: &str, base: GridSpec) -> Result<Self, NumericError> {
        let bad = || NumericError::GridSpec(spec.to_string());
        let mut g = base;
        for item in spec.split([';', ',']).map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(bad)?;
            match k.trim() {
                "t" | "x" => {
                    let (lo, hi) = v.split_once("..").ok_or_else(bad)?;
                    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
                    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
                    if !(lo <= hi) {
                        return Err(bad());
                    }
                    if k.trim() == "t" {
                        g.t = (lo, hi);
                    } else {
                        g.x = (lo, hi);
                    }
                }
                "n" => {
                    let n: usize = v.trim().parse().map_err(|_| bad())?;
                    if n == 0 {
                        return Err(bad());
                    }
                    g.nt = ((n as f64).sqrt().floor() as usize).max(1);
                    g.nx = n.div_ceil(g.nt);
                }
                _ => return Err(bad()),
            }
        }
        Ok(g)
    }

    /// Grid points with every other free atom of `exprs` drawn once from the
    /// policy, so all points share the same parameter values.
    pub fn points(&self, exprs: &[&Expr], policy: &ZeroPolicy) -> Vec<Point> {
        let mut others: BTreeSet<Atom> = BTreeSet::new();
        for e in exprs {
            others.extend(free_atoms(e));
        }
        others.remove(&Atom::T);
        others.remove(&Atom::X);
        let shared = policy.sample_point(&others, 0);
        let lin = |(lo, hi): (f64, f64), n: usize, i: usize| {
            if n == 1 {
                (lo + hi) / 2.0
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(self.nt * self.nx);
        for i in 0..self.nt {
            for j in 0..self.nx {
                let mut p = shared.clone();
                p.insert(Atom::T, lin(self.t, self.nt, i));
                p.insert(Atom::X, lin(self.x, self.nx, j));
                out.push(p);
            }
        }
        out
    }
}

fn shifted(p: &Point, dx: f64) -> Point {
    let mut q = p.clone();
    *q.get_mut(&Atom::X).expect("grid points bind x") += dx;
    q
}

/// Compares `claimed` with the central difference of `base` in x at every
/// grid point. Rounding noise of the difference quotient is allowed for, so
/// points where it dominates cannot fail on their own.
pub fn finite_diff_check(claimed: &Expr, base: &Expr, grid: &[Point], h: f64, rel_tol: f64) -> CheckReport {
    let mut report = CheckReport::new(format!("d/dx ({base}) = {claimed}"), Verdict::Pass);
    let mut evaluated = 0;
    let mut worst = 0.0f64;
    for p in grid {
        let vals = (eval_numeric(claimed, p), eval_numeric(base, &shifted(p, h)), eval_numeric(base, &shifted(p, -h)));
        let (sym, fp, fm) = match vals {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            _ => {
                report.domain_failures += 1;
                continue;
            }
        };
        evaluated += 1;
        let fd = (fp - fm) / (2.0 * h);
        let scale = sym.abs().max(fd.abs());
        let noise = 10.0 * f64::EPSILON * fp.abs().max(fm.abs()) / h;
        let err = (sym - fd).abs();
        let rel = if scale > 0.0 { err / scale } else { 0.0 };
        let sample = Sample { point: render_point(p), value: rel, scale };
        if err > rel_tol * scale + noise {
            if report.verdict == Verdict::Pass || rel > worst {
                report.witness = Some(sample.clone());
            }
            report.verdict = Verdict::Fail;
        }
        if err > noise {
            worst = worst.max(rel);
        }
        report.samples.push(sample);
    }
    report.max_residual = worst;
    if evaluated == 0 {
        report.verdict = Verdict::Inconclusive;
        report.notes.push("no grid point is inside the domain".into());
    } else if report.domain_failures > 0 {
        report.notes.push(format!("{} grid points skipped (outside the domain)", report.domain_failures));
    }
    report
}

/// finite_diff_check for ∂ᵏsolution/∂xᵏ, k = 1..=max_order, each against the
/// central difference of the (k-1)-th symbolic derivative.
pub fn check_solution_derivatives(
    solution: &Expr,
    max_order: u32,
    grid: &[Point],
    h: f64,
    rel_tol: f64,
) -> Result<CheckReport, ExprError> {
    let mut children = Vec::new();
    for k in 1..=max_order {
        let claimed = jet_evaluate(solution, &Expr::u(k))?;
        let base = jet_evaluate(solution, &Expr::u(k - 1))?;
        let mut r = finite_diff_check(&claimed, &base, grid, h, rel_tol);
        r.label = format!("x-derivative {k}");
        children.push(r);
    }
    Ok(CheckReport::aggregate(format!("finite differences of {solution}"), children))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub eps: f64,
    pub max_residual: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    pub slope: Option<f64>,
    pub check: CheckReport,
}

/// Residuals below this are treated as exact.
const EXACT_FLOOR: f64 = 1e-11;

/// u_t − Σ εˡ rhsₗ for u = Σ εⁱ solᵢ, with ε kept as a symbol.
pub fn residual_in_eps(pde: &EvolutionPDE, sol: &EpsSeries) -> Result<(Expr, Atom), ExprError> {
    let eps = Atom::param("@eps");
    let e = Expr::atom(eps.clone());
    let mut u = Expr::zero();
    let mut power = Expr::one();
    for c in sol.coeffs() {
        u.add_assign(&c.mul(&power));
        power = power.mul(&e);
    }
    let mut res = u.partial_deriv(&Atom::T);
    let mut power = Expr::one();
    for l in 0..=pde.order() {
        res = res.sub(&jet_evaluate(&u, &pde.rhs_coeff(l))?.mul(&power));
        power = power.mul(&e);
    }
    Ok((res, eps))
}

/// Max |residual| over the grid for each ε and the least-squares slope of
/// log residual against log ε.
pub fn scan_residual(
    pde: &EvolutionPDE,
    sol: &EpsSeries,
    eps_values: &[f64],
    grid: &[Point],
) -> Result<ScanReport, NumericError> {
    let lo = eps_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eps_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if eps_values.len() < 2 || !(lo > 0.0) || hi / lo < 100.0 * (1.0 - 1e-9) {
        return Err(NumericError::EpsRange);
    }
    let (res, eps) = residual_in_eps(pde, sol)?;
    let mut rows = Vec::new();
    let mut check = CheckReport::new(format!("residual scaling in {}", pde.name), Verdict::Pass);
    for &e in eps_values {
        let mut worst = 0.0f64;
        let mut points = 0;
        for p in grid {
            let mut q = p.clone();
            q.insert(eps.clone(), e);
            match eval_numeric(&res, &q) {
                Ok(v) => {
                    points += 1;
                    worst = worst.max(v.abs());
                }
                Err(_) => check.domain_failures += 1,
            }
        }
        rows.push(ScanRow { eps: e, max_residual: worst, points });
    }
    if rows.iter().any(|r| r.points == 0) {
        check.verdict = Verdict::Inconclusive;
        check.notes.push("every grid point is singular for some eps".into());
        return Ok(ScanReport { rows, slope: None, check });
    }
    check.max_residual = rows.iter().map(|r| r.max_residual).fold(0.0, f64::max);
    if rows.iter().all(|r| r.max_residual < EXACT_FLOOR) {
        check.notes.push("residual is at machine precision for every eps".into());
        return Ok(ScanReport { rows, slope: None, check });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.eps.log10()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.max_residual.max(f64::MIN_POSITIVE).log10()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    if slope < MIN_SLOPE {
        check.verdict = Verdict::Fail;
    }
    check.notes.push(format!("fitted slope {slope:.4} (threshold {MIN_SLOPE})"));
    Ok(ScanReport { rows, slope: Some(slope), check })
}

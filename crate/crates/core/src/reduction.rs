//! Solutions in closed form: evaluation of jet expressions, substitution of
//! ansätze with unknown time functions, collection into ODE systems, and
//! verification of solutions and of conditional invariance.

use crate::calculus::EvolutionPDE;
use crate::expr::{instantiate_fn, is_zero, Atom, Coeff, Exp, Expr, ExprError, Monomial, SubstMode, ZeroPolicy};
use crate::report::CheckReport;
use crate::series::{is_o, EpsSeries, SeriesError};
use num_traits::{One, Zero};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReductionError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("ansatz {0}")]
    BadAnsatz(String),
    #[error("basis element {0} is not a single profile")]
    BadBasis(String),
    #[error("radicand {0} is not linear in x")]
    BadChart(String),
    #[error("residual is not spanned by the basis; uncovered: {0}")]
    NotSpanned(String),
    #[error("unknown {0} has no binding")]
    Unbound(String),
    #[error("constant {name}: {reason}")]
    Constant { name: String, reason: String },
}

/// u_k ↦ ∂ᵏsolution/∂xᵏ for every jet variable in `e`.
pub fn jet_evaluate(solution: &Expr, e: &Expr) -> Result<Expr, ExprError> {
    let orders = e.jet_orders();
    let Some(&top) = orders.iter().next_back() else {
        return Ok(e.clone());
    };
    let derivs = x_derivatives(solution, top);
    let rules: BTreeMap<Atom, Expr> = orders.into_iter().map(|k| (Atom::Jet(k), derivs[k as usize].clone())).collect();
    e.substitute(&rules, SubstMode::Simultaneous)
}

/// ∂ᵏsolution/∂xᵏ for k = 0..=n.
pub fn x_derivatives(solution: &Expr, n: u32) -> Vec<Expr> {
    let mut out = vec![solution.clone()];
    for _ in 0..n {
        let next = out.last().unwrap().partial_deriv(&Atom::X);
        out.push(next);
    }
    out
}

/// `f` evaluated at u = Σ εⁱ solᵢ and expanded in ε up to `order`.
///
/// Taylor expansion about sol₀: the m-th term is (1/m) Σₖ δₖ ∂/∂uₖ applied to
/// the previous one, with δₖ = Σ_{i≥1} εⁱ ∂ᵏsolᵢ/∂xᵏ.
pub fn expand_at(f: &Expr, sol: &EpsSeries, order: usize) -> Result<EpsSeries, ExprError> {
    let n = order;
    let top = f.max_jet_order();
    let base = &sol.coeffs()[0];
    let mut total = EpsSeries::lift(f, n);
    if let Some(top) = top {
        let higher: Vec<Vec<Expr>> = sol.coeffs().iter().map(|s| x_derivatives(s, top)).collect();
        let delta: Vec<EpsSeries> = (0..=top as usize)
            .map(|k| {
                let mut c = vec![Expr::zero(); n + 1];
                for (i, slot) in c.iter_mut().enumerate().skip(1) {
                    if let Some(h) = higher.get(i) {
                        *slot = h[k].clone();
                    }
                }
                EpsSeries::new(c)
            })
            .collect();
        let mut term = EpsSeries::lift(f, n);
        for m in 1..=n {
            let mut next = EpsSeries::zero(n);
            for (k, d) in delta.iter().enumerate() {
                if d.is_zero() {
                    continue;
                }
                let pd = term.map(|c| c.partial_deriv(&Atom::Jet(k as u32)));
                if !pd.is_zero() {
                    next = next.add(&pd.mul(d));
                }
            }
            term = next.map(|c| c.scale(&Coeff::new(1.into(), (m as i64).into())));
            if term.is_zero() {
                break;
            }
            total = total.add(&term);
        }
    }
    total.try_map(|c| jet_evaluate(base, c))
}

/// A candidate solution with unknown time functions φⱼ(t).
#[derive(Debug, Clone, PartialEq)]
pub struct Ansatz {
    pub name: String,
    /// u = Σ εⁱ expr[i].
    pub expr: EpsSeries,
    pub unknowns: Vec<String>,
    /// Rational constants fixed by matching, not by the ODE system.
    pub constants: Vec<String>,
}

impl Ansatz {
    pub fn new(
        name: impl Into<String>,
        expr: EpsSeries,
        unknowns: Vec<String>,
        constants: Vec<String>,
    ) -> Result<Self, ReductionError> {
        for c in expr.coeffs() {
            if c.max_jet_order().is_some() {
                return Err(ReductionError::BadAnsatz(format!("{c} contains jet variables")));
            }
            let mut bad = None;
            c.for_each_atom(&mut |a| {
                if let Atom::Func(app) = a {
                    let time_fn = app.args.len() == 1 && app.args[0] == Expr::t();
                    if time_fn && !unknowns.iter().any(|u| **u == *app.name) {
                        bad = Some(app.name.to_string());
                    }
                }
            });
            if let Some(b) = bad {
                return Err(ReductionError::BadAnsatz(format!("uses undeclared time function {b}")));
            }
        }
        Ok(Ansatz { name: name.into(), expr, unknowns, constants })
    }
}

/// u_t − rhs with u replaced by the series `sol`, expanded to `order`.
pub fn solution_residual(pde: &EvolutionPDE, sol: &EpsSeries, order: usize) -> Result<EpsSeries, ExprError> {
    let mut coeffs = vec![Expr::zero(); order + 1];
    for (i, c) in coeffs.iter_mut().enumerate() {
        if let Some(s) = sol.coeffs().get(i) {
            *c = s.partial_deriv(&Atom::T);
        }
    }
    let mut out = EpsSeries::new(coeffs);
    for l in 0..=order.min(pde.order()) {
        let r = pde.rhs_coeff(l);
        if r.is_zero() {
            continue;
        }
        let e = expand_at(&r, sol, order - l)?;
        let mut shifted = vec![Expr::zero(); order + 1];
        for (i, c) in e.coeffs().iter().enumerate() {
            shifted[i + l] = c.clone();
        }
        out = out.sub(&EpsSeries::new(shifted));
    }
    Ok(out)
}

pub fn substitute_ansatz(pde: &EvolutionPDE, ansatz: &Ansatz, order: usize) -> Result<EpsSeries, ExprError> {
    solution_residual(pde, &ansatz.expr, order)
}

/// Coordinates in which a radicand α(t) + β(t)x becomes a single atom s.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub radicand: Expr,
    pub coordinate: Atom,
    radical: Atom,
    x_of_s: Expr,
}

impl Chart {
    pub fn new(radicand: &Expr) -> Result<Self, ReductionError> {
        let bad = || ReductionError::BadChart(radicand.to_string());
        let probe = radicand.pow(Exp::new(1, 2))?;
        let (m, c) = probe.as_single_term().ok_or_else(bad)?;
        let radical = match m.factors() {
            [(a @ Atom::Pow(_), e)] if c.is_one() && *e == Exp::new(1, 2) => a.clone(),
            _ => return Err(bad()),
        };
        let alpha = radicand.coeff_of(&Atom::X, Exp::zero());
        let beta = radicand.coeff_of(&Atom::X, Exp::one());
        if beta.is_zero()
            || beta.contains_atom(&Atom::X)
            || alpha.contains_atom(&Atom::X)
            || alpha.add(&beta.mul(&Expr::x())) != *radicand
        {
            return Err(bad());
        }
        let coordinate = Atom::param("@s");
        let x_of_s = Expr::atom(coordinate.clone()).sub(&alpha).div(&beta)?;
        Ok(Chart { radicand: radicand.clone(), coordinate, radical, x_of_s })
    }

    pub fn apply(&self, e: &Expr) -> Result<Expr, ExprError> {
        let rules = BTreeMap::from([
            (self.radical.clone(), Expr::atom(self.coordinate.clone())),
            (Atom::X, self.x_of_s.clone()),
        ]);
        e.substitute(&rules, SubstMode::Simultaneous)
    }

    /// Back to x: s ↦ the radicand.
    pub fn unapply(&self, e: &Expr) -> Result<Expr, ExprError> {
        let rules = BTreeMap::from([(self.coordinate.clone(), self.radicand.clone())]);
        e.substitute(&rules, SubstMode::Simultaneous)
    }
}

/// One ODE residual per basis profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub basis: Vec<Expr>,
    pub equations: Vec<Expr>,
}

fn depends_on_space(a: &Atom, chart: Option<&Chart>) -> bool {
    let hit = |b: &Atom| *b == Atom::X || chart.is_some_and(|c| *b == c.coordinate);
    let mut found = hit(a);
    a.for_each_inner(&mut |b| found |= hit(b));
    found
}

/// Splits a residual into t-dependent coefficients of the basis profiles.
pub fn collect_reduced_system(
    residual: &Expr,
    basis: &[Expr],
    chart: Option<&Chart>,
    policy: &ZeroPolicy,
) -> Result<ReducedSystem, ReductionError> {
    let to_chart = |e: &Expr| -> Result<Expr, ReductionError> {
        Ok(match chart {
            Some(c) => c.apply(e)?,
            None => e.clone(),
        })
    };
    let res = to_chart(residual)?;
    let mut profiles: Vec<(Monomial, Coeff)> = Vec::new();
    for b in basis {
        let bc = to_chart(b)?;
        let (m, c) = bc.as_single_term().ok_or_else(|| ReductionError::BadBasis(b.to_string()))?;
        let (space, rest) = m.partition(|a| depends_on_space(a, chart));
        if !rest.is_one() {
            return Err(ReductionError::BadBasis(b.to_string()));
        }
        profiles.push((space, c.clone()));
    }
    let mut equations = vec![Expr::zero(); basis.len()];
    let mut uncovered = Expr::zero();
    for (m, c) in res.terms() {
        let (space, rest) = m.partition(|a| depends_on_space(a, chart));
        match profiles.iter().position(|(p, _)| *p == space) {
            Some(i) => equations[i].add_assign(&Expr::term(c / &profiles[i].1, rest)),
            None => uncovered.add_assign(&Expr::term(c.clone(), m.clone())),
        }
    }
    if !uncovered.is_zero() {
        let shown = match chart {
            Some(ch) => ch.unapply(&uncovered)?,
            None => uncovered,
        };
        return Err(ReductionError::NotSpanned(shown.to_string()));
    }
    let mut back = Expr::zero();
    for ((p, c), eq) in profiles.iter().zip(&equations) {
        back.add_assign(&eq.mul_monomial(c, p));
    }
    let completeness = is_zero(&res.sub(&back), policy);
    if !completeness.passed() {
        return Err(ReductionError::NotSpanned(format!("completeness check {}", completeness.verdict)));
    }
    Ok(ReducedSystem { basis: basis.to_vec(), equations })
}

/// φ′ = rhs when the equation is linear in the derivative of exactly one unknown.
pub fn explicit_form(eq: &Expr, unknowns: &[String]) -> Result<Option<(String, Expr)>, ExprError> {
    let present: Vec<&String> = unknowns.iter().filter(|u| eq.contains_atom(&Atom::time_fn(u, 1))).collect();
    let [name] = present.as_slice() else {
        return Ok(None);
    };
    let d = Atom::time_fn(name, 1);
    let alpha = eq.coeff_of(&d, Exp::one());
    let beta = eq.coeff_of(&d, Exp::zero());
    if alpha.contains_atom(&d) || beta.contains_atom(&d) || alpha.mul(&Expr::atom(d.clone())).add(&beta) != *eq {
        return Ok(None);
    }
    Ok(Some((name.to_string(), beta.neg().div(&alpha)?)))
}

/// Checks that the collected system is exactly {φⱼ′ = rhsⱼ}: every expected
/// equation appears in explicit form and every other equation vanishes.
pub fn compare_system(
    system: &ReducedSystem,
    unknowns: &[String],
    expected: &[(String, Expr)],
    policy: &ZeroPolicy,
) -> Result<CheckReport, ExprError> {
    let mut children = Vec::new();
    let mut used = vec![false; system.equations.len()];
    for (name, rhs) in expected {
        let mut found = None;
        for (i, eq) in system.equations.iter().enumerate() {
            if used[i] {
                continue;
            }
            if let Some((n, explicit)) = explicit_form(eq, unknowns)? {
                if n == *name {
                    found = Some((i, explicit));
                    break;
                }
            }
        }
        match found {
            Some((i, explicit)) => {
                used[i] = true;
                let mut r = is_zero(&explicit.sub(rhs), policy);
                r.label = format!("d{name} = {rhs} (collected: {explicit})");
                children.push(r);
            }
            None => {
                children.push(CheckReport::new(format!("d{name} = {rhs}: no collected equation"), crate::Verdict::Fail))
            }
        }
    }
    for (i, eq) in system.equations.iter().enumerate() {
        if !used[i] {
            let mut r = is_zero(eq, policy);
            r.label = format!("remaining profile {} : {eq} = 0", system.basis[i]);
            children.push(r);
        }
    }
    Ok(CheckReport::aggregate("reduced system", children))
}

/// Rational values of the constants from equations linear in them and free of
/// unknown derivatives; all such equations must agree.
pub fn solve_constants(
    system: &ReducedSystem,
    unknowns: &[String],
    constants: &[String],
) -> Result<BTreeMap<String, Coeff>, ReductionError> {
    let mut out = BTreeMap::new();
    for name in constants {
        let c = Atom::param(name);
        let err = |reason: String| ReductionError::Constant { name: name.clone(), reason };
        let mut value: Option<Coeff> = None;
        for eq in &system.equations {
            if !eq.contains_atom(&c) || unknowns.iter().any(|u| eq.contains_atom(&Atom::time_fn(u, 1))) {
                continue;
            }
            let a = eq.coeff_of(&c, Exp::one());
            let b = eq.coeff_of(&c, Exp::zero());
            if a.mul(&Expr::atom(c.clone())).add(&b) != *eq || a.contains_atom(&c) || b.contains_atom(&c) {
                return Err(err(format!("{eq} is not linear in it")));
            }
            let v = b.neg().div(&a)?.as_constant().ok_or_else(|| err(format!("{eq} does not fix a rational value")))?;
            match &value {
                Some(prev) if *prev != v => return Err(err(format!("conflicting values {prev} and {v}"))),
                _ => value = Some(v),
            }
        }
        out.insert(name.clone(), value.ok_or_else(|| err("no equation determines it".into()))?);
    }
    Ok(out)
}

/// Substitutes rational values for constants.
pub fn bind_constants(e: &Expr, values: &BTreeMap<String, Coeff>) -> Result<Expr, ExprError> {
    let rules: BTreeMap<Atom, Expr> = values.iter().map(|(k, v)| (Atom::param(k), Expr::constant(v.clone()))).collect();
    e.substitute(&rules, SubstMode::Simultaneous)
}

/// Replaces each time function φ by an expression in t, derivatives included.
pub fn bind_time_functions(e: &Expr, solution: &BTreeMap<String, Expr>) -> Result<Expr, ExprError> {
    let mut out = e.clone();
    for (name, body) in solution {
        out = instantiate_fn(&out, name, &[Atom::T], body)?;
    }
    Ok(out)
}

pub fn verify_ode_solution(
    system: &ReducedSystem,
    unknowns: &[String],
    solution: &BTreeMap<String, Expr>,
    policy: &ZeroPolicy,
) -> Result<CheckReport, ReductionError> {
    if let Some(u) = unknowns.iter().find(|u| !solution.contains_key(*u)) {
        return Err(ReductionError::Unbound(u.clone()));
    }
    let mut children = Vec::new();
    for (b, eq) in system.basis.iter().zip(&system.equations) {
        let mut r = is_zero(&bind_time_functions(eq, solution)?, policy);
        r.label = format!("profile {b}");
        children.push(r);
    }
    Ok(CheckReport::aggregate("ODE solution", children))
}

/// Σ εʲ ηʲ evaluated at Σ εⁱ uⁱ is o(εⁿ).
pub fn verify_conditional_invariance(
    eta: &EpsSeries,
    sol: &EpsSeries,
    order: usize,
    policy: &ZeroPolicy,
) -> Result<CheckReport, ReductionError> {
    let series = invariance_series(eta, sol, order)?;
    let mut r = is_o(&series, order, policy)?;
    r.label = "conditional invariance".into();
    Ok(r)
}

/// Missing higher coefficients of a series are zero.
fn padded(sol: &EpsSeries, order: usize) -> EpsSeries {
    let mut coeffs = sol.coeffs().to_vec();
    coeffs.resize(coeffs.len().max(order + 1), Expr::zero());
    EpsSeries::new(coeffs)
}

pub fn invariance_series(eta: &EpsSeries, sol: &EpsSeries, order: usize) -> Result<EpsSeries, ReductionError> {
    let sol = &padded(sol, order);
    let mut out = EpsSeries::zero(order);
    for j in 0..=order.min(eta.order()) {
        let e = expand_at(&eta.coeffs()[j], sol, order - j)?;
        let mut shifted = vec![Expr::zero(); order + 1];
        for (i, c) in e.coeffs().iter().enumerate() {
            shifted[i + j] = c.clone();
        }
        out = out.add(&EpsSeries::new(shifted));
    }
    Ok(out)
}

pub fn verify_solution_residual(
    pde: &EvolutionPDE,
    sol: &EpsSeries,
    order: usize,
    policy: &ZeroPolicy,
) -> Result<CheckReport, ReductionError> {
    let res = solution_residual(pde, &padded(sol, order), order)?;
    let mut r = is_o(&res, order, policy)?;
    r.label = format!("solution residual in {}", pde.name);
    Ok(r)
}

#[cfg(test)]
mod tests;

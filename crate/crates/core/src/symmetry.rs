//! Determining residuals of evolutionary symmetries, reduction modulo the
//! invariant-surface constraints, and splitting by powers of ε.

use crate::calculus::{determining_expression, flow_along, prolonged_action, total_dx, EvolutionPDE, Prolongation};
use crate::expr::{
    free_atoms, is_zero, render_point, Atom, Coeff, Evaluator, Exp, Expr, ExprError, Monomial, SubstMode, ZeroPolicy,
};
use crate::linalg;
use crate::report::{CheckReport, Sample, Verdict};
use crate::series::{is_o, EpsSeries, SeriesError};
use num_traits::Zero;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymmetryError {
    #[error("characteristic {0} contains no jet variable to solve for")]
    NoLeadingJet(String),
    #[error("cannot solve {0} = 0 rationally for its leading jet variable")]
    UnsupportedConstraint(String),
    #[error("expression reaches jet order {needed} but constraints cover only {covered}")]
    NotCovered { needed: u32, covered: u32 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("the full side-condition reading is implemented up to order 1, not {0}")]
    OrderUnsupported(usize),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryMode {
    Classical,
    Nonclassical,
    /// Constraints generated by the ε⁰ characteristic only.
    Approximate,
    /// The whole series η⁰ + εη¹ = 0 imposed on the manifold to first order.
    ApproximateFull,
}

impl SymmetryMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SymmetryMode::Classical => "classical",
            SymmetryMode::Nonclassical => "nonclassical",
            SymmetryMode::Approximate => "approximate",
            SymmetryMode::ApproximateFull => "approximate-full",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "classical" => SymmetryMode::Classical,
            "nonclassical" => SymmetryMode::Nonclassical,
            "approximate" => SymmetryMode::Approximate,
            "approximate-full" => SymmetryMode::ApproximateFull,
            _ => return None,
        })
    }
}

impl std::fmt::Display for SymmetryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Rewrite rules u_m → rhs solving a characteristic and its x-derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub generator: Expr,
    /// Order of the jet variable the generator is solved for.
    pub leading: u32,
    /// ∂(generator)/∂u_leading.
    pub separant: Expr,
    rules: Vec<Expr>,
}

impl ConstraintSet {
    /// Highest jet order with a rule.
    pub fn covered(&self) -> u32 {
        self.leading + self.rules.len() as u32 - 1
    }

    pub fn rules(&self) -> impl Iterator<Item = (u32, &Expr)> {
        self.rules.iter().enumerate().map(move |(j, r)| (self.leading + j as u32, r))
    }

    pub fn rule_map(&self) -> BTreeMap<Atom, Expr> {
        self.rules().map(|(k, r)| (Atom::Jet(k), r.clone())).collect()
    }

    pub fn extend_to(&mut self, order: u32) -> Result<(), ExprError> {
        let first = BTreeMap::from([(Atom::Jet(self.leading), self.rules[0].clone())]);
        while self.covered() < order {
            let next = total_dx(self.rules.last().unwrap()).substitute(&first, SubstMode::Simultaneous)?;
            self.rules.push(next);
        }
        Ok(())
    }

    pub fn reduce(&self, e: &Expr) -> Result<Expr, SymmetryError> {
        reduce_mod_constraints(e, self)
    }

    /// Reduces, first adding consequences when `e` reaches beyond the covered order.
    pub fn reduce_extending(&mut self, e: &Expr) -> Result<Expr, SymmetryError> {
        if let Some(k) = e.max_jet_order() {
            self.extend_to(k)?;
        }
        reduce_mod_constraints(e, self)
    }
}

/// Solves `eta0 = 0` for its leading jet variable and adds x-consequences up to `up_to`.
pub fn build_constraints(eta0: &Expr, up_to: u32) -> Result<ConstraintSet, SymmetryError> {
    let leading = eta0.max_jet_order().ok_or_else(|| SymmetryError::NoLeadingJet(eta0.to_string()))?;
    let v = Atom::Jet(leading);
    let unsupported = || SymmetryError::UnsupportedConstraint(eta0.to_string());
    for a in eta0.top_atoms() {
        if a != v {
            let mut nested = false;
            a.for_each_inner(&mut |b| nested |= *b == v);
            if nested {
                return Err(unsupported());
            }
        }
    }
    let separant = eta0.coeff_of(&v, Exp::from_integer(1));
    let rest = eta0.coeff_of(&v, Exp::from_integer(0));
    if separant.is_zero() || separant.mul(&Expr::atom(v.clone())).add(&rest) != *eta0 {
        return Err(unsupported());
    }
    let rule = rest.neg().div(&separant)?;
    let mut cs = ConstraintSet { generator: eta0.clone(), leading, separant, rules: vec![rule] };
    cs.extend_to(up_to)?;
    Ok(cs)
}

/// Rewrites every jet variable of order ≥ the leading order by its rule.
pub fn reduce_mod_constraints(e: &Expr, cs: &ConstraintSet) -> Result<Expr, SymmetryError> {
    if let Some(k) = e.max_jet_order() {
        if k > cs.covered() {
            return Err(SymmetryError::NotCovered { needed: k, covered: cs.covered() });
        }
        if k < cs.leading {
            return Ok(e.clone());
        }
    }
    Ok(e.substitute(&cs.rule_map(), SubstMode::Simultaneous)?)
}

fn series_max_jet(s: &EpsSeries) -> u32 {
    s.coeffs().iter().filter_map(Expr::max_jet_order).max().unwrap_or(0)
}

/// The determining expression of `eta`, reduced according to `mode`.
pub fn determining_residual(
    pde: &EvolutionPDE,
    eta: &EpsSeries,
    mode: SymmetryMode,
    order: usize,
) -> Result<EpsSeries, SymmetryError> {
    if order > eta.order() {
        return Err(SeriesError::OutOfRange { index: order, order: eta.order() }.into());
    }
    let raw = determining_expression(eta, pde, order);
    let eta0 = &eta.coeffs()[0];
    match mode {
        SymmetryMode::Classical => Ok(raw),
        SymmetryMode::Nonclassical | SymmetryMode::Approximate => {
            let cs = build_constraints(eta0, series_max_jet(&raw))?;
            raw.try_map(|c| cs.reduce(c))
        }
        SymmetryMode::ApproximateFull => {
            if order > 1 {
                return Err(SymmetryError::OrderUnsupported(order));
            }
            let mut cs = build_constraints(eta0, series_max_jet(&raw))?;
            let r0 = cs.reduce(&raw.coeffs()[0])?;
            if order == 0 {
                return Ok(EpsSeries::new(vec![r0]));
            }
            let shifts =
                first_order_shifts(&mut cs, eta0, &eta.coeffs()[1], raw.coeffs()[0].max_jet_order().unwrap_or(0))?;
            let mut r1 = cs.reduce_extending(&raw.coeffs()[1])?;
            for (k, s) in &shifts {
                let d = raw.coeffs()[0].partial_deriv(&Atom::Jet(*k));
                if !d.is_zero() {
                    r1.add_assign(&cs.reduce(&d)?.mul(s));
                }
            }
            Ok(EpsSeries::new(vec![r0, r1]))
        }
    }
}

/// First-order corrections s_j of u_{m+j} = r_j + ε s_j on η⁰ + εη¹ = 0.
fn first_order_shifts(
    cs: &mut ConstraintSet,
    eta0: &Expr,
    eta1: &Expr,
    up_to: u32,
) -> Result<Vec<(u32, Expr)>, SymmetryError> {
    let m = cs.leading;
    let mut shifts: Vec<(u32, Expr)> = Vec::new();
    let mut g = eta0.clone();
    let mut h = eta1.clone();
    for k in m..=up_to.max(m) {
        if k > m {
            g = total_dx(&g);
            h = total_dx(&h);
        }
        let mut num = cs.reduce_extending(&h)?;
        for (i, s) in &shifts {
            let d = g.partial_deriv(&Atom::Jet(*i));
            if !d.is_zero() {
                num.add_assign(&cs.reduce_extending(&d)?.mul(s));
            }
        }
        shifts.push((k, num.neg().div(&cs.separant)?));
    }
    Ok(shifts)
}

/// PASS iff the residual in the given mode is o(εⁿ).
pub fn check_symmetry(
    pde: &EvolutionPDE,
    eta: &EpsSeries,
    mode: SymmetryMode,
    order: usize,
    policy: &ZeroPolicy,
) -> Result<CheckReport, SymmetryError> {
    let res = determining_residual(pde, eta, mode, order)?;
    let mut r = is_o(&res, order, policy)?;
    r.label = format!("{} symmetry of {}", mode, pde.name);
    Ok(r.with_mode(format!("{mode}({order})")))
}

/// One labelled summand of a determining equation.
#[derive(Debug, Clone, PartialEq)]
pub struct Contribution {
    pub label: String,
    pub expr: Expr,
}

/// The determining equation at one power of ε, unreduced.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsEquation {
    pub order: usize,
    pub full: Expr,
    pub contributions: Vec<Contribution>,
}

impl EpsEquation {
    pub fn contribution(&self, label: &str) -> Option<&Expr> {
        self.contributions.iter().find(|c| c.label == label).map(|c| &c.expr)
    }
}

pub fn flow_label(j: usize, l: usize) -> String {
    format!("flow of eta{j} along rhs{l}")
}

pub fn prolongation_label(j: usize, l: usize) -> String {
    format!("prolongation of eta{j} on rhs{l}")
}

/// The determining equation at every order of `eta`, split into the flow of
/// each ηʲ along each rhsₗ and minus the prolonged action of ηʲ on rhsₗ.
pub fn split_eps(pde: &EvolutionPDE, eta: &EpsSeries) -> Vec<EpsEquation> {
    let prol = Prolongation::new(pde, series_max_jet(eta));
    (0..=eta.order())
        .map(|i| {
            let mut contributions = Vec::new();
            let mut full = Expr::zero();
            for j in (0..=i).rev() {
                let l = i - j;
                let e = &eta.coeffs()[j];
                let flow = flow_along(e, l, &prol);
                let action = prolonged_action(e, &pde.rhs_coeff(l)).neg();
                full.add_assign(&flow);
                full.add_assign(&action);
                contributions.push(Contribution { label: flow_label(j, l), expr: flow });
                contributions.push(Contribution { label: prolongation_label(j, l), expr: action });
            }
            EpsEquation { order: i, full, contributions }
        })
        .collect()
}

/// Zero test of `e` at points of the constraint manifold: lower jets are
/// sampled and every constrained jet is computed from its rule.
pub fn sample_on_manifold(e: &Expr, cs: &ConstraintSet, policy: &ZeroPolicy) -> Result<CheckReport, SymmetryError> {
    if let Some(k) = e.max_jet_order() {
        if k > cs.covered() {
            return Err(SymmetryError::NotCovered { needed: k, covered: cs.covered() });
        }
    }
    let constrained = |a: &Atom| matches!(a, Atom::Jet(k) if *k >= cs.leading);
    let mut atoms: BTreeSet<Atom> = free_atoms(e);
    for (_, r) in cs.rules() {
        atoms.extend(free_atoms(r));
    }
    atoms.retain(|a| !constrained(a));
    let budget = (policy.samples.max(1) * policy.resample_factor.max(1)) as u64;
    let mut report = CheckReport::new("zero on constraint manifold", Verdict::Pass);
    let mut valid = 0;
    'points: for index in 0..budget {
        if valid >= policy.samples {
            break;
        }
        let mut point = policy.sample_point(&atoms, index);
        for (k, r) in cs.rules() {
            match Evaluator::new(&point).eval(r) {
                Ok((v, _)) => {
                    point.insert(Atom::Jet(k), v);
                }
                Err(_) => {
                    report.domain_failures += 1;
                    continue 'points;
                }
            }
        }
        match Evaluator::new(&point).eval(e) {
            Err(_) => report.domain_failures += 1,
            Ok((value, scale)) => {
                valid += 1;
                let s = Sample { point: render_point(&point), value, scale };
                report.max_residual = report.max_residual.max(value.abs());
                report.samples.push(s.clone());
                if value.abs() > policy.tol * (1.0 + scale) {
                    report.verdict = Verdict::Fail;
                    report.witness = Some(s);
                    break;
                }
            }
        }
    }
    if report.verdict == Verdict::Pass && valid < policy.samples {
        report.verdict = Verdict::Inconclusive;
        report.notes.push(format!("only {valid} of {} samples avoided domain errors", policy.samples));
    }
    Ok(report)
}

/// For a first-order equation and a classical symmetry η, checks that f·η is
/// a nonclassical symmetry.
///
/// The constraint manifold is generated by η, i.e. the branch f ≠ 0 of
/// f·η = 0. The verdict on the branch f = 0 is attached as a note.
pub fn check_proposition_1(
    pde: &EvolutionPDE,
    eta: &Expr,
    f: &Expr,
    policy: &ZeroPolicy,
) -> Result<CheckReport, SymmetryError> {
    if pde.max_jet_order() > 1 {
        return Err(SymmetryError::Precondition(format!("{} is not a first-order equation", pde.name)));
    }
    let classical = determining_expression(&EpsSeries::lift(eta, 0), pde, 0);
    let mut pre = is_zero(&classical.coeffs()[0], policy);
    if !pre.passed() {
        return Err(SymmetryError::Precondition(format!("{eta} is not a classical symmetry of {}", pde.name)));
    }
    pre.label = format!("{eta} is a classical symmetry");
    let product = f.mul(eta);
    let raw = determining_expression(&EpsSeries::lift(&product, 0), pde, 0).coeffs()[0].clone();
    let top = raw.max_jet_order().unwrap_or(0);
    let cs = build_constraints(eta, top)?;
    let mut main = is_zero(&cs.reduce(&raw)?, policy);
    main.label = format!("({f})*({eta}) nonclassical");
    let mut out = CheckReport::aggregate("proposition 1", vec![pre, main]);
    let branch = match build_constraints(&product, top).and_then(|c| c.reduce(&raw)) {
        Ok(r) => format!("branch f = 0 (leading-variable elimination of f*eta): {}", is_zero(&r, policy).verdict),
        Err(e) => format!("branch f = 0 not evaluated: {e}"),
    };
    out.notes.push(branch);
    Ok(out)
}

/// Which ε¹ equation a particular η¹ is solved against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closure {
    /// The ε¹ coefficient of the determining residual in the given mode.
    Determining(SymmetryMode),
    /// D_t η¹ − X_{η¹}(F) − X_{η⁰}(G) = 0 unreduced, i.e. only the prolonged
    /// action of η⁰ on the perturbation as source.
    GProlongationOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particular {
    pub eta1: Expr,
    pub basis: Vec<Expr>,
    pub coefficients: Vec<Coeff>,
    /// Indices of basis elements left undetermined (set to zero).
    pub free: Vec<usize>,
}

/// The ε¹ equation of the closure evaluated at a candidate η¹.
pub fn first_order_equation(
    pde: &EvolutionPDE,
    eta0: &Expr,
    eta1: &Expr,
    closure: Closure,
) -> Result<Expr, SymmetryError> {
    match closure {
        Closure::Determining(mode) => {
            let eta = EpsSeries::new(vec![eta0.clone(), eta1.clone()]);
            Ok(determining_residual(pde, &eta, mode, 1)?.coeffs()[1].clone())
        }
        Closure::GProlongationOnly => {
            let prol = Prolongation::new(pde, eta1.max_jet_order().unwrap_or(0));
            Ok(flow_along(eta1, 0, &prol)
                .sub(&prolonged_action(eta1, &pde.rhs_coeff(0)))
                .sub(&prolonged_action(eta0, &pde.rhs_coeff(1))))
        }
    }
}

/// Solves the ε¹ equation for η¹ = Σ cᵢ bᵢ with rational cᵢ.
///
/// Equations come from matching coefficients term by term, so `None` means
/// no combination of the basis makes the equation vanish identically.
pub fn derive_particular(
    pde: &EvolutionPDE,
    eta0: &Expr,
    basis: &[Expr],
    closure: Closure,
) -> Result<Option<Particular>, SymmetryError> {
    let source = first_order_equation(pde, eta0, &Expr::zero(), closure)?;
    let columns: Vec<Expr> = basis
        .iter()
        .map(|b| Ok(first_order_equation(pde, eta0, b, closure)?.sub(&source)))
        .collect::<Result<_, SymmetryError>>()?;
    let mut keys: BTreeSet<Monomial> = source.terms().map(|(m, _)| m.clone()).collect();
    for c in &columns {
        keys.extend(c.terms().map(|(m, _)| m.clone()));
    }
    let coeff_in =
        |e: &Expr, m: &Monomial| e.terms().find(|(k, _)| *k == m).map(|(_, c)| c.clone()).unwrap_or_else(Coeff::zero);
    let rows: Vec<Vec<Coeff>> = keys.iter().map(|m| columns.iter().map(|c| coeff_in(c, m)).collect()).collect();
    let rhs: Vec<Coeff> = keys.iter().map(|m| -coeff_in(&source, m)).collect();
    let Some(sol) = linalg::solve(&rows, &rhs, basis.len()) else {
        return Ok(None);
    };
    let mut eta1 = Expr::zero();
    for (b, c) in basis.iter().zip(&sol.values) {
        if !c.is_zero() {
            eta1.add_assign(&b.scale(c));
        }
    }
    if !first_order_equation(pde, eta0, &eta1, closure)?.is_zero() {
        return Ok(None);
    }
    Ok(Some(Particular { eta1, basis: basis.to_vec(), coefficients: sol.values, free: sol.free }))
}

/// Monomials u_x^(degree − Σeₖ) Πₖ uₖ^eₖ over 2 ≤ k ≤ max_jet with Σ (k − 1) eₖ = weight.
pub fn weighted_monomials(weight: u32, degree: i64, max_jet: u32) -> Vec<Expr> {
    fn go(k: u32, left: u32, acc: &mut Vec<(u32, u32)>, out: &mut Vec<Vec<(u32, u32)>>) {
        if left == 0 {
            out.push(acc.clone());
            return;
        }
        if k < 2 {
            return;
        }
        let w = k - 1;
        for e in (0..=left / w).rev() {
            if e > 0 {
                acc.push((k, e));
            }
            go(k - 1, left - e * w, acc, out);
            if e > 0 {
                acc.pop();
            }
        }
    }
    let mut parts = Vec::new();
    go(max_jet, weight, &mut Vec::new(), &mut parts);
    parts
        .into_iter()
        .map(|p| {
            let count: i64 = p.iter().map(|(_, e)| *e as i64).sum();
            let mut factors: Vec<(Atom, Exp)> =
                p.iter().map(|(k, e)| (Atom::Jet(*k), Exp::from_integer(*e as i64))).collect();
            if degree != count {
                factors.push((Atom::Jet(1), Exp::from_integer(degree - count)));
            }
            Expr::term(Coeff::from_integer(1.into()), Monomial::from_factors(factors))
        })
        .collect()
}

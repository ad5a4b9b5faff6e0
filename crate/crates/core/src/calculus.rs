//! Total derivatives on the jet space and canonical operators along an
//! evolution equation.

use crate::expr::{Atom, Expr};
use crate::series::EpsSeries;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CalculusError {
    #[error("target is not linear in u_t (degree {0})")]
    NonlinearInTimeDerivative(usize),
}

/// u_t = rhs₀ + ε rhs₁ + ...
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionPDE {
    pub name: String,
    pub rhs: EpsSeries,
}

impl EvolutionPDE {
    pub fn new(name: impl Into<String>, rhs: EpsSeries) -> Self {
        EvolutionPDE { name: name.into(), rhs }
    }

    /// Builds from the coefficients F, G, ... of the right-hand side.
    pub fn from_parts(name: impl Into<String>, parts: Vec<Expr>) -> Self {
        EvolutionPDE::new(name, EpsSeries::new(parts))
    }

    /// u_t = u u_x
    pub fn transport() -> Self {
        EvolutionPDE::from_parts("transport", vec![Expr::u(0).mul(&Expr::u(1))])
    }

    /// u_t = u u_x + ε u_xxx
    pub fn kdv_eps() -> Self {
        EvolutionPDE::from_parts("kdv", vec![Expr::u(0).mul(&Expr::u(1)), Expr::u(3)])
    }

    pub fn order(&self) -> usize {
        self.rhs.order()
    }

    /// Highest jet order in each ε coefficient of the right-hand side.
    pub fn max_jet_orders(&self) -> Vec<Option<u32>> {
        self.rhs.coeffs().iter().map(Expr::max_jet_order).collect()
    }

    pub fn max_jet_order(&self) -> u32 {
        self.max_jet_orders().into_iter().flatten().max().unwrap_or(0)
    }

    /// The right-hand side coefficient at ε order `l`, zero beyond the stored order.
    pub fn rhs_coeff(&self, l: usize) -> Expr {
        self.rhs.coeff(l).cloned().unwrap_or_else(|_| Expr::zero())
    }
}

/// D_x e = ∂e/∂x + Σ u_{k+1} ∂e/∂u_k.
pub fn total_dx(e: &Expr) -> Expr {
    let mut out = e.partial_deriv(&Atom::X);
    for k in e.jet_orders() {
        let d = e.partial_deriv(&Atom::Jet(k));
        if !d.is_zero() {
            out.add_assign(&d.mul(&Expr::u(k + 1)));
        }
    }
    out
}

pub fn total_dx_n(e: &Expr, k: usize) -> Expr {
    let mut cur = e.clone();
    for _ in 0..k {
        cur = total_dx(&cur);
    }
    cur
}

/// D_x^k of each right-hand side coefficient, k = 0..=max_k.
pub(crate) struct Prolongation {
    table: Vec<Vec<Expr>>,
}

impl Prolongation {
    pub(crate) fn new(pde: &EvolutionPDE, max_k: u32) -> Self {
        let table = pde
            .rhs
            .coeffs()
            .iter()
            .map(|r| {
                let mut row = vec![r.clone()];
                for _ in 0..max_k {
                    let next = total_dx(row.last().unwrap());
                    row.push(next);
                }
                row
            })
            .collect();
        Prolongation { table }
    }

    pub(crate) fn get(&self, l: usize, k: u32) -> Expr {
        self.table.get(l).and_then(|row| row.get(k as usize)).cloned().unwrap_or_else(Expr::zero)
    }
}

/// Flow of `e` along the ε^l part of the equation: Σ_k D_x^k(rhs_l) ∂e/∂u_k,
/// plus ∂e/∂t when l = 0.
pub(crate) fn flow_along(e: &Expr, l: usize, prol: &Prolongation) -> Expr {
    let mut out = if l == 0 { e.partial_deriv(&Atom::T) } else { Expr::zero() };
    for k in e.jet_orders() {
        let d = e.partial_deriv(&Atom::Jet(k));
        let r = prol.get(l, k);
        if !d.is_zero() && !r.is_zero() {
            out.add_assign(&d.mul(&r));
        }
    }
    out
}

/// D_t e on solutions of the equation, as a series truncated at `order`.
pub fn total_dt_onshell(e: &Expr, pde: &EvolutionPDE, order: usize) -> EpsSeries {
    let prol = Prolongation::new(pde, e.max_jet_order().unwrap_or(0));
    EpsSeries::new((0..=order).map(|l| flow_along(e, l, &prol)).collect())
}

/// D_t of a series on solutions of the equation.
pub fn total_dt_series(eta: &EpsSeries, pde: &EvolutionPDE, order: usize) -> EpsSeries {
    let n = order.min(eta.order());
    let max_k = eta.coeffs().iter().filter_map(Expr::max_jet_order).max().unwrap_or(0);
    let prol = Prolongation::new(pde, max_k);
    let coeffs = (0..=n)
        .map(|i| {
            let mut acc = Expr::zero();
            for j in 0..=i {
                acc.add_assign(&flow_along(&eta.coeffs()[j], i - j, &prol));
            }
            acc
        })
        .collect();
    EpsSeries::new(coeffs)
}

/// Prolonged evolutionary field applied to `f`: Σ_k (D_x^k η) ∂f/∂u_k.
pub fn prolonged_action(eta: &Expr, f: &Expr) -> Expr {
    let mut out = Expr::zero();
    let mut dk = eta.clone();
    let orders = f.jet_orders();
    let top = orders.iter().next_back().copied().unwrap_or(0);
    for k in 0..=top {
        if orders.contains(&k) {
            let d = f.partial_deriv(&Atom::Jet(k));
            if !d.is_zero() {
                out.add_assign(&dk.mul(&d));
            }
        }
        if k < top {
            dk = total_dx(&dk);
        }
    }
    out
}

/// Target expression as a polynomial in u_t: Σ coeffs[d] u_tᵈ.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub coeffs: Vec<Expr>,
}

impl Target {
    /// u_t − rhs for the given equation.
    pub fn equation(pde: &EvolutionPDE) -> Vec<Target> {
        pde.rhs
            .coeffs()
            .iter()
            .enumerate()
            .map(|(l, r)| Target { coeffs: if l == 0 { vec![r.neg(), Expr::one()] } else { vec![r.neg()] } })
            .collect()
    }

    pub fn free(e: Expr) -> Self {
        Target { coeffs: vec![e] }
    }

    pub fn linear(rest: Expr, ut_coeff: Expr) -> Self {
        Target { coeffs: vec![rest, ut_coeff] }
    }

    fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|c| !c.is_zero()).unwrap_or(0)
    }
}

/// Σ_k (D_x^k η) ∂target/∂u_k + (D_t η) ∂target/∂u_t on solutions of `pde`.
///
/// Every u_t left in the result is replaced by the right-hand side series.
pub fn apply_canonical_operator(
    eta: &EpsSeries,
    target: &Target,
    pde: &EvolutionPDE,
    order: usize,
) -> Result<EpsSeries, CalculusError> {
    let deg = target.degree();
    if deg > 1 {
        return Err(CalculusError::NonlinearInTimeDerivative(deg));
    }
    let n = order.min(eta.order());
    let rest = &target.coeffs[0];
    let ut_coeff = target.coeffs.get(1).cloned().unwrap_or_else(Expr::zero);
    let lift = |e: Expr| EpsSeries::lift(&e, n);
    let spatial = |f: &Expr| EpsSeries::new(eta.coeffs()[..=n].iter().map(|c| prolonged_action(c, f)).collect());
    let mut out = spatial(rest);
    if !ut_coeff.is_zero() {
        let ut = pde.rhs.truncate(n);
        let ut = if ut.order() < n { pad(&ut, n) } else { ut };
        out = out.add(&spatial(&ut_coeff).mul(&ut));
        out = out.add(&total_dt_series(eta, pde, n).mul(&lift(ut_coeff)));
    }
    Ok(out)
}

fn pad(s: &EpsSeries, n: usize) -> EpsSeries {
    let mut c = s.coeffs().to_vec();
    c.resize(n + 1, Expr::zero());
    EpsSeries::new(c)
}

/// D_t η − X_η(rhs) on solutions, the determining expression of u_t = rhs.
pub fn determining_expression(eta: &EpsSeries, pde: &EvolutionPDE, order: usize) -> EpsSeries {
    let n = order.min(eta.order());
    let dt = total_dt_series(eta, pde, n);
    let coeffs = (0..=n)
        .map(|i| {
            let mut acc = dt.coeffs()[i].clone();
            for j in 0..=i {
                let r = pde.rhs_coeff(i - j);
                if !r.is_zero() {
                    acc = acc.sub(&prolonged_action(&eta.coeffs()[j], &r));
                }
            }
            acc
        })
        .collect();
    EpsSeries::new(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{random_expr, GenConfig};
    use crate::parser::parse_expression;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(s: &str) -> Expr {
        parse_expression(s).unwrap()
    }

    #[test]
    fn total_dx_examples() {
        assert_eq!(total_dx(&Expr::u(0)), Expr::u(1));
        assert_eq!(total_dx(&p("u1^2")), p("2*u1*u2"));
        assert_eq!(total_dx(&p("u1*u3 - 3*u2^2")), p("u1*u4 - 5*u2*u3"));
        assert_eq!(total_dx(&p("x*u + t")), p("u + x*u1"));
    }

    #[test]
    fn total_dx_n_examples() {
        assert_eq!(total_dx_n(&Expr::u(0), 2), Expr::u(2));
        assert_eq!(total_dx_n(&Expr::u(0), 0), Expr::u(0));
        let d3 = total_dx_n(&p("u*u1"), 3);
        assert_eq!(d3, p("3*u2^2 + 4*u1*u3 + u*u4"));
    }

    #[test]
    fn total_dx_through_opaque_functions() {
        let f = Expr::func("F", vec![Expr::x(), Expr::u(1)]);
        let d = total_dx(&f);
        let fx = Expr::atom(Atom::func("F", vec![0], vec![Expr::x(), Expr::u(1)]));
        let fu = Expr::atom(Atom::func("F", vec![1], vec![Expr::x(), Expr::u(1)]));
        assert_eq!(d, fx.add(&fu.mul(&Expr::u(2))));
    }

    #[test]
    fn onshell_time_derivative_examples() {
        let tr = EvolutionPDE::transport();
        assert_eq!(total_dt_onshell(&Expr::u(0), &tr, 0), EpsSeries::new(vec![p("u*u1")]));
        assert_eq!(total_dt_onshell(&Expr::u(1), &tr, 0), EpsSeries::new(vec![p("u1^2 + u*u2")]));
        let kdv = EvolutionPDE::kdv_eps();
        assert_eq!(total_dt_onshell(&Expr::u(0), &kdv, 1), EpsSeries::new(vec![p("u*u1"), p("u3")]));
        assert_eq!(total_dt_onshell(&p("t*u"), &tr, 0), EpsSeries::new(vec![p("u + t*u*u1")]));
    }

    #[test]
    fn canonical_operator_examples() {
        let tr = EvolutionPDE::transport();
        let target = Target::linear(p("-u*u1"), Expr::one());
        let r = apply_canonical_operator(&EpsSeries::lift(&Expr::u(1), 0), &target, &tr, 0).unwrap();
        assert!(r.is_zero());
        let r = apply_canonical_operator(&EpsSeries::lift(&Expr::u(2), 0), &target, &tr, 0).unwrap();
        assert_eq!(r.coeffs()[0], p("2*u1*u2"));
        let mut zero_rules = std::collections::BTreeMap::new();
        zero_rules.insert(Atom::Jet(2), Expr::zero());
        let reduced = r.coeffs()[0].substitute(&zero_rules, crate::expr::SubstMode::Simultaneous).unwrap();
        assert!(reduced.is_zero());
    }

    #[test]
    fn canonical_operator_on_the_perturbed_equation() {
        let kdv = EvolutionPDE::kdv_eps();
        let eta1 =
            Expr::func("eta1", vec![Expr::t(), Expr::x(), Expr::u(0), Expr::u(1), Expr::u(2), Expr::u(3), Expr::u(4)]);
        let eta = EpsSeries::new(vec![Expr::u(2), eta1.clone()]);
        let target = Target::linear(p("-u*u1"), Expr::one());
        let mut r = apply_canonical_operator(&eta, &target, &kdv, 1).unwrap();
        r = r.sub(&EpsSeries::eps_times(&prolonged_action(&Expr::u(2), &Expr::u(3)), 1));
        let direct = determining_expression(&eta, &kdv, 1);
        assert_eq!(r, direct);
        // the coefficient of ∂η¹/∂u_xxx in the ε¹ equation
        let args = vec![Expr::t(), Expr::x(), Expr::u(0), Expr::u(1), Expr::u(2), Expr::u(3), Expr::u(4)];
        let d3 = Atom::func("eta1", vec![5], args);
        let c = r.coeffs()[1].partial_deriv(&d3);
        assert_eq!(c, p("3*u2^2 + 4*u1*u3"));
    }

    #[test]
    fn nonlinear_targets_are_rejected() {
        let t = Target { coeffs: vec![Expr::zero(), Expr::zero(), Expr::one()] };
        let r = apply_canonical_operator(&EpsSeries::lift(&Expr::u(1), 0), &t, &EvolutionPDE::transport(), 0);
        assert_eq!(r, Err(CalculusError::NonlinearInTimeDerivative(2)));
    }

    fn rnd(seed: u64) -> (Expr, Expr) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let cfg = GenConfig::rich();
        (random_expr(&mut r, &cfg), random_expr(&mut r, &cfg))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn vertical_derivative_commutator(seed in any::<u64>(), k in 1u32..5) {
            let (e, _) = rnd(seed);
            let lhs = total_dx(&e).partial_deriv(&Atom::Jet(k));
            let rhs = total_dx(&e.partial_deriv(&Atom::Jet(k))).add(&e.partial_deriv(&Atom::Jet(k - 1)));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn onshell_derivatives_commute(seed in any::<u64>(), kdv in any::<bool>()) {
            let (e, _) = rnd(seed);
            let pde = if kdv { EvolutionPDE::kdv_eps() } else { EvolutionPDE::transport() };
            let n = pde.order();
            let a = total_dt_onshell(&e, &pde, n).map(total_dx);
            let b = total_dt_onshell(&total_dx(&e), &pde, n);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn canonical_operator_is_a_derivation(seed in any::<u64>()) {
            let (a, b) = rnd(seed);
            let pde = EvolutionPDE::kdv_eps();
            let eta = EpsSeries::new(vec![p("u2"), p("u1*u3 - u2^2")]);
            let x = |f: &Expr| apply_canonical_operator(&eta, &Target::free(f.clone()), &pde, 1).unwrap();
            let lhs = x(&a.mul(&b));
            let rhs = x(&a).mul(&EpsSeries::lift(&b, 1)).add(&EpsSeries::lift(&a, 1).mul(&x(&b)));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn total_dx_raises_jet_order_by_at_most_one(seed in any::<u64>()) {
            let (e, _) = rnd(seed);
            let before = e.max_jet_order();
            let after = total_dx(&e).max_jet_order();
            match (before, after) {
                (Some(b), Some(a)) => prop_assert!(a <= b + 1),
                (None, Some(a)) => prop_assert!(a == 0 || a == 1),
                _ => {}
            }
        }
    }
}

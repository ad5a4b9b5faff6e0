use super::{Atom, Coeff, Exp, Expr, ExprError, FuncApp, Monomial};
use num_traits::{One, Zero};
use std::collections::BTreeMap;
use std::sync::Arc;

/// How a rule map is applied by [`Expr::substitute`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubstMode {
    /// Every rule once, in parallel.
    Simultaneous,
    /// Repeat until nothing changes, failing after the given number of passes.
    Exhaustive(usize),
}

impl Atom {
    /// Partial derivative of the value this atom stands for.
    pub fn partial(&self, v: &Atom) -> Expr {
        if self == v {
            return Expr::one();
        }
        match self {
            Atom::T | Atom::X | Atom::Jet(_) | Atom::Param(_) => Expr::zero(),
            Atom::Func(app) => {
                let mut out = Expr::zero();
                for (i, arg) in app.args.iter().enumerate() {
                    let d = arg.partial_deriv(v);
                    if d.is_zero() {
                        continue;
                    }
                    let mut derivs = app.derivs.clone();
                    derivs.push(i);
                    derivs.sort_unstable();
                    let outer = Expr::atom(Atom::Func(Arc::new(FuncApp {
                        name: app.name.clone(),
                        derivs,
                        args: app.args.clone(),
                    })));
                    out.add_assign(&outer.mul(&d));
                }
                out
            }
            Atom::ExpOf(arg) => {
                let d = arg.partial_deriv(v);
                if d.is_zero() {
                    Expr::zero()
                } else {
                    Expr::atom(self.clone()).mul(&d)
                }
            }
            Atom::Pow(base) => base.partial_deriv(v),
        }
    }

    fn depends_on(&self, v: &Atom) -> bool {
        if self == v {
            return true;
        }
        let mut found = false;
        self.for_each_inner(&mut |a| found |= a == v);
        found
    }
}

impl Expr {
    /// Partial derivative with respect to an atom (chain and product rules).
    pub fn partial_deriv(&self, v: &Atom) -> Expr {
        let mut out = Expr::zero();
        for (m, c) in self.terms() {
            let factors = m.factors();
            for (i, (a, e)) in factors.iter().enumerate() {
                if !a.depends_on(v) {
                    continue;
                }
                let inner = a.partial(v);
                if inner.is_zero() {
                    continue;
                }
                let mut rest: Vec<(Atom, Exp)> = factors.to_vec();
                let e1 = *e - Exp::one();
                if e1.is_zero() {
                    rest.remove(i);
                } else {
                    rest[i].1 = e1;
                }
                let coeff = c * Coeff::new((*e.numer()).into(), (*e.denom()).into());
                out.add_assign(&inner.mul_monomial(&coeff, &Monomial::from_factors(rest)));
            }
        }
        out
    }

    /// Replaces atoms according to `rules`; replacement reaches nested atoms.
    pub fn substitute(&self, rules: &BTreeMap<Atom, Expr>, mode: SubstMode) -> Result<Expr, ExprError> {
        match mode {
            SubstMode::Simultaneous => self.subst_once(rules),
            SubstMode::Exhaustive(bound) => {
                let mut cur = self.clone();
                for _ in 0..bound {
                    let next = cur.subst_once(rules)?;
                    if next == cur {
                        return Ok(cur);
                    }
                    cur = next;
                }
                Err(ExprError::StepOverflow(bound))
            }
        }
    }

    fn subst_once(&self, rules: &BTreeMap<Atom, Expr>) -> Result<Expr, ExprError> {
        if rules.is_empty() {
            return Ok(self.clone());
        }
        let mut cache: BTreeMap<Atom, Option<Expr>> = BTreeMap::new();
        let mut out = Expr::zero();
        for (m, c) in self.terms() {
            let mut keep = Vec::new();
            let mut prod = Expr::constant(c.clone());
            for (a, e) in m.factors() {
                let rep = match cache.get(a) {
                    Some(r) => r.clone(),
                    None => {
                        let r = subst_atom(a, rules)?;
                        cache.insert(a.clone(), r.clone());
                        r
                    }
                };
                match rep {
                    None => keep.push((a.clone(), *e)),
                    Some(r) => prod = prod.mul(&r.pow(*e)?),
                }
            }
            out.add_assign(&prod.mul_monomial(&Coeff::one(), &Monomial::from_factors(keep)));
        }
        Ok(out)
    }

    /// Maps every coefficient-free structure through `f` on atoms; `None` keeps the atom.
    pub fn map_atoms(&self, f: &mut dyn FnMut(&Atom) -> Result<Option<Expr>, ExprError>) -> Result<Expr, ExprError> {
        let mut out = Expr::zero();
        for (m, c) in self.terms() {
            let mut keep = Vec::new();
            let mut prod = Expr::constant(c.clone());
            for (a, e) in m.factors() {
                match f(a)? {
                    None => keep.push((a.clone(), *e)),
                    Some(r) => prod = prod.mul(&r.pow(*e)?),
                }
            }
            out.add_assign(&prod.mul_monomial(&Coeff::one(), &Monomial::from_factors(keep)));
        }
        Ok(out)
    }
}

/// Replacement for one atom, or `None` when it is unchanged.
fn subst_atom(a: &Atom, rules: &BTreeMap<Atom, Expr>) -> Result<Option<Expr>, ExprError> {
    if let Some(r) = rules.get(a) {
        return Ok(Some(r.clone()));
    }
    match a {
        Atom::Func(app) => {
            let mut changed = false;
            let mut args = Vec::with_capacity(app.args.len());
            for arg in &app.args {
                let n = arg.subst_once(rules)?;
                changed |= n != *arg;
                args.push(n);
            }
            Ok(changed.then(|| {
                Expr::atom(Atom::Func(Arc::new(FuncApp { name: app.name.clone(), derivs: app.derivs.clone(), args })))
            }))
        }
        Atom::ExpOf(arg) => {
            let n = arg.subst_once(rules)?;
            Ok((n != **arg).then(|| Expr::exp(&n)))
        }
        Atom::Pow(base) => {
            let n = base.subst_once(rules)?;
            // The caller raises the replacement to the monomial exponent.
            Ok((n != **base).then_some(n))
        }
        _ => Ok(None),
    }
}

/// Replaces every application of the opaque function `name` by `body`.
///
/// `params` are the placeholder atoms of `body`, one per argument slot. A
/// differentiated application becomes the matching partial derivative of
/// `body`, after which the placeholders are replaced by the actual arguments.
pub fn instantiate_fn(e: &Expr, name: &str, params: &[Atom], body: &Expr) -> Result<Expr, ExprError> {
    let mut cache: BTreeMap<Vec<usize>, Expr> = BTreeMap::new();
    let mut f = |a: &Atom| -> Result<Option<Expr>, ExprError> { instantiate_atom(a, name, params, body, &mut cache) };
    e.map_atoms(&mut f)
}

fn instantiate_atom(
    a: &Atom,
    name: &str,
    params: &[Atom],
    body: &Expr,
    cache: &mut BTreeMap<Vec<usize>, Expr>,
) -> Result<Option<Expr>, ExprError> {
    match a {
        Atom::Func(app) => {
            let mut args = Vec::with_capacity(app.args.len());
            let mut changed = false;
            for arg in &app.args {
                let n = instantiate_fn(arg, name, params, body)?;
                changed |= n != *arg;
                args.push(n);
            }
            if &*app.name == name {
                let d = match cache.get(&app.derivs) {
                    Some(d) => d.clone(),
                    None => {
                        let mut d = body.clone();
                        for &slot in &app.derivs {
                            let p = params.get(slot).ok_or_else(|| {
                                ExprError::NonRationalExponent(format!("{name} has no argument slot {slot}"))
                            })?;
                            d = d.partial_deriv(p);
                        }
                        cache.insert(app.derivs.clone(), d.clone());
                        d
                    }
                };
                let rules: BTreeMap<Atom, Expr> = params.iter().cloned().zip(args).collect();
                return Ok(Some(d.substitute(&rules, SubstMode::Simultaneous)?));
            }
            Ok(changed.then(|| {
                Expr::atom(Atom::Func(Arc::new(FuncApp { name: app.name.clone(), derivs: app.derivs.clone(), args })))
            }))
        }
        Atom::ExpOf(arg) => {
            let n = instantiate_fn(arg, name, params, body)?;
            Ok((n != **arg).then(|| Expr::exp(&n)))
        }
        Atom::Pow(base) => {
            let n = instantiate_fn(base, name, params, body)?;
            Ok((n != **base).then_some(n))
        }
        _ => Ok(None),
    }
}

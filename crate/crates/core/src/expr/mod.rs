//! Normalized symbolic expressions over jet coordinates.
//!
//! An [`Expr`] is a finite sum of monomials with exact rational coefficients.
//! Every atom in a monomial carries an exact rational exponent, so Laurent
//! monomials such as `u1^(-4)` and radicals of single atoms need no wrapper.

mod deriv;
mod display;
mod eval;
mod zero;

pub use deriv::{instantiate_fn, SubstMode};
pub(crate) use eval::Evaluator;
pub use eval::{eval_numeric, DomainError, Point};
pub(crate) use zero::render_point;
pub use zero::{free_atoms, is_zero, ZeroPolicy, DEFAULT_SEED, SEED_ENV};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// Exponent type. Exponents are exact and never zero inside a monomial.
pub type Exp = Ratio<i64>;
/// Coefficient type.
pub type Coeff = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExprError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("fractional power of negative constant {0}")]
    NegativeRadicand(String),
    #[error("exponent is not a rational constant: {0}")]
    NonRationalExponent(String),
    #[error("substitution did not reach a fixpoint within {0} steps")]
    StepOverflow(usize),
    #[error("jet index must be a non-negative integer: {0}")]
    BadJetIndex(String),
}

/// Application of an opaque function, possibly differentiated.
///
/// `derivs` is the sorted multiset of argument slots differentiated against,
/// so `F_{u_x u_x}` and `F_{u_x}` are distinct atoms of the same function.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FuncApp {
    pub name: Arc<str>,
    pub derivs: Vec<usize>,
    pub args: Vec<Expr>,
}

/// Atoms of the expression algebra, totally ordered (independent variables,
/// then jet variables by order, then parameters, functions, exponentials and
/// non-monomial power bases).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    T,
    X,
    Jet(u32),
    Param(Arc<str>),
    Func(Arc<FuncApp>),
    ExpOf(Arc<Expr>),
    /// A non-monomial base standing for itself; the exponent lives in the monomial.
    Pow(Arc<Expr>),
}

impl Atom {
    pub fn param(name: &str) -> Atom {
        Atom::Param(Arc::from(name))
    }

    pub fn func(name: &str, derivs: Vec<usize>, args: Vec<Expr>) -> Atom {
        let mut derivs = derivs;
        derivs.sort_unstable();
        Atom::Func(Arc::new(FuncApp { name: Arc::from(name), derivs, args }))
    }

    /// A time function `name(t)` differentiated `order` times.
    pub fn time_fn(name: &str, order: usize) -> Atom {
        Atom::func(name, vec![0; order], vec![Expr::t()])
    }

    pub fn jet_order(&self) -> Option<u32> {
        match self {
            Atom::Jet(k) => Some(*k),
            _ => None,
        }
    }

    /// True for atoms evaluated directly from a point (no inner structure).
    pub fn is_leaf(&self) -> bool {
        matches!(self, Atom::T | Atom::X | Atom::Jet(_) | Atom::Param(_))
    }

    /// Calls `f` on every atom nested inside this one (not on itself).
    pub fn for_each_inner(&self, f: &mut dyn FnMut(&Atom)) {
        match self {
            Atom::Func(app) => app.args.iter().for_each(|a| a.for_each_atom(f)),
            Atom::ExpOf(e) | Atom::Pow(e) => e.for_each_atom(f),
            _ => {}
        }
    }
}

/// A product of atoms raised to nonzero rational exponents, sorted by atom.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(Vec<(Atom, Exp)>);

impl Monomial {
    pub fn one() -> Monomial {
        Monomial(Vec::new())
    }

    pub fn of(atom: Atom, e: Exp) -> Monomial {
        if e.is_zero() {
            Monomial::one()
        } else {
            Monomial(vec![(atom, e)])
        }
    }

    pub fn from_factors(mut factors: Vec<(Atom, Exp)>) -> Monomial {
        factors.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<(Atom, Exp)> = Vec::with_capacity(factors.len());
        for (a, e) in factors {
            match out.last_mut() {
                Some(last) if last.0 == a => last.1 += e,
                _ => out.push((a, e)),
            }
        }
        out.retain(|(_, e)| !e.is_zero());
        Monomial(out)
    }

    pub fn factors(&self) -> &[(Atom, Exp)] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn exponent_of(&self, atom: &Atom) -> Exp {
        self.0.binary_search_by(|(a, _)| a.cmp(atom)).map(|i| self.0[i].1).unwrap_or_else(|_| Exp::zero())
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let e = a[i].1 + b[j].1;
                    if !e.is_zero() {
                        out.push((a[i].0.clone(), e));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    pub fn powi(&self, q: Exp) -> Monomial {
        if q.is_zero() {
            return Monomial::one();
        }
        Monomial(self.0.iter().map(|(a, e)| (a.clone(), e * q)).collect())
    }

    /// Removes the factor of `atom`, returning its exponent and the rest.
    pub fn split_off(&self, atom: &Atom) -> (Exp, Monomial) {
        let mut rest = self.0.clone();
        match rest.binary_search_by(|(a, _)| a.cmp(atom)) {
            Ok(i) => {
                let (_, e) = rest.remove(i);
                (e, Monomial(rest))
            }
            Err(_) => (Exp::zero(), Monomial(rest)),
        }
    }

    /// Partitions the factors by a predicate on atoms.
    pub fn partition(&self, pred: impl Fn(&Atom) -> bool) -> (Monomial, Monomial) {
        let (yes, no): (Vec<_>, Vec<_>) = self.0.iter().cloned().partition(|(a, _)| pred(a));
        (Monomial(yes), Monomial(no))
    }

    fn has_expandable_pow(&self) -> bool {
        self.0.iter().any(|(a, e)| matches!(a, Atom::Pow(_)) && e.is_integer() && *e.numer() > 0)
    }
}

/// A normalized expression: a map from monomials to nonzero coefficients.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Expr {
    terms: BTreeMap<Monomial, Coeff>,
}

fn q(n: i64, d: i64) -> Coeff {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Exact rational from an `i64` pair; a convenience for tests and callers.
pub fn rat(n: i64, d: i64) -> Coeff {
    q(n, d)
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::default()
    }

    pub fn one() -> Expr {
        Expr::constant(Coeff::one())
    }

    pub fn constant(c: Coeff) -> Expr {
        Expr::term(c, Monomial::one())
    }

    pub fn int(n: i64) -> Expr {
        Expr::constant(q(n, 1))
    }

    pub fn ratio(n: i64, d: i64) -> Expr {
        Expr::constant(q(n, d))
    }

    pub fn term(c: Coeff, m: Monomial) -> Expr {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Expr { terms }
    }

    pub fn atom(a: Atom) -> Expr {
        Expr::term(Coeff::one(), Monomial::of(a, Exp::one()))
    }

    pub fn t() -> Expr {
        Expr::atom(Atom::T)
    }

    pub fn x() -> Expr {
        Expr::atom(Atom::X)
    }

    /// The jet variable `u_k` (k-th x-derivative of u).
    pub fn u(k: u32) -> Expr {
        Expr::atom(Atom::Jet(k))
    }

    pub fn param(name: &str) -> Expr {
        Expr::atom(Atom::param(name))
    }

    pub fn exp(arg: &Expr) -> Expr {
        if arg.is_zero() {
            return Expr::one();
        }
        Expr::atom(Atom::ExpOf(Arc::new(arg.clone())))
    }

    pub fn sqrt(arg: &Expr) -> Result<Expr, ExprError> {
        arg.pow(Exp::new(1, 2))
    }

    pub fn func(name: &str, args: Vec<Expr>) -> Expr {
        Expr::atom(Atom::func(name, vec![], args))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Coeff)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The rational value if the expression is constant.
    pub fn as_constant(&self) -> Option<Coeff> {
        match self.terms.len() {
            0 => Some(Coeff::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    /// The single term, if the expression has exactly one.
    pub fn as_single_term(&self) -> Option<(&Monomial, &Coeff)> {
        if self.terms.len() == 1 {
            self.terms.iter().next()
        } else {
            None
        }
    }

    pub fn from_terms(iter: impl IntoIterator<Item = (Monomial, Coeff)>) -> Expr {
        let mut out = Expr::zero();
        for (m, c) in iter {
            out.add_term(m, c);
        }
        out.expand_pow_terms()
    }

    fn add_term(&mut self, m: Monomial, c: Coeff) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get() + c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    /// Expands positive integer powers of non-monomial bases that arise
    /// when radical exponents add up (e.g. `s^(1/2) * s^(1/2)`).
    fn expand_pow_terms(self) -> Expr {
        if !self.terms.keys().any(|m| m.has_expandable_pow()) {
            return self;
        }
        let mut out = Expr::zero();
        for (m, c) in self.terms {
            if !m.has_expandable_pow() {
                out.add_term(m, c);
                continue;
            }
            let mut rest = Vec::new();
            let mut expanded = Expr::constant(c);
            for (a, e) in m.0 {
                match &a {
                    Atom::Pow(base) if e.is_integer() && *e.numer() > 0 => {
                        expanded = expanded.mul(&base.pow_int(*e.numer() as u64));
                    }
                    _ => rest.push((a, e)),
                }
            }
            let rest = Expr::term(Coeff::one(), Monomial(rest));
            for (m2, c2) in expanded.mul(&rest).terms {
                out.add_term(m2, c2);
            }
        }
        out
    }

    pub fn add(&self, other: &Expr) -> Expr {
        let (mut big, small) =
            if self.terms.len() >= other.terms.len() { (self.clone(), other) } else { (other.clone(), self) };
        for (m, c) in &small.terms {
            big.add_term(m.clone(), c.clone());
        }
        big
    }

    /// In-place sum; both operands are normalized so no re-expansion is needed.
    pub fn add_assign(&mut self, other: &Expr) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Expr {
        Expr { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }

    pub fn scale(&self, c: &Coeff) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        Expr { terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect() }
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        if self.is_zero() || other.is_zero() {
            return Expr::zero();
        }
        let mut out = Expr::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out.expand_pow_terms()
    }

    pub fn mul_monomial(&self, c: &Coeff, m: &Monomial) -> Expr {
        let mut out = Expr::zero();
        for (m1, c1) in &self.terms {
            out.add_term(m1.mul(m), c1 * c);
        }
        out.expand_pow_terms()
    }

    fn pow_int(&self, n: u64) -> Expr {
        let mut result = Expr::one();
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = result.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Raises to an exact rational power.
    ///
    /// Positive integer powers expand. A single-term base folds its exponent
    /// into the monomial when the coefficient root is exact and no even
    /// exponent numerator would hide a sign; otherwise the base is wrapped
    /// in a [`Atom::Pow`] atom.
    pub fn pow(&self, e: Exp) -> Result<Expr, ExprError> {
        if e.is_zero() {
            return Ok(Expr::one());
        }
        if self.is_zero() {
            return if *e.numer() > 0 { Ok(Expr::zero()) } else { Err(ExprError::DivisionByZero) };
        }
        if e.is_integer() && *e.numer() > 0 {
            return Ok(self.pow_int(*e.numer() as u64));
        }
        if let Some((m, c)) = self.as_single_term() {
            if let Some(root) = rational_pow(c, e) {
                let foldable = e.is_integer() || m.0.iter().all(|(_, k)| k.numer() % 2 != 0);
                if foldable {
                    return Ok(Expr::term(root, Monomial::one()).mul_monomial(&Coeff::one(), &m.powi(e)));
                }
            }
            if m.is_one() && c.is_negative() {
                return Err(ExprError::NegativeRadicand(c.to_string()));
            }
            if m.is_one() && !e.is_integer() {
                return Ok(Expr::term(Coeff::one(), Monomial::of(Atom::Pow(Arc::new(self.clone())), e)));
            }
        }
        // Pull out the leading coefficient when it is an exact power.
        let lead = self.terms.values().next().unwrap().clone();
        let (content, base) = if lead.is_one() {
            (Coeff::one(), self.clone())
        } else {
            match rational_pow(&lead, e) {
                Some(r) if !lead.is_negative() || e.is_integer() => (r, self.scale(&lead.recip())),
                _ => (Coeff::one(), self.clone()),
            }
        };
        if base.as_single_term().is_some() && base != *self {
            return Ok(base.pow(e)?.scale(&content));
        }
        Ok(Expr::term(content, Monomial::of(Atom::Pow(Arc::new(base)), e)))
    }

    pub fn div(&self, other: &Expr) -> Result<Expr, ExprError> {
        if other.is_zero() {
            return Err(ExprError::DivisionByZero);
        }
        Ok(self.mul(&other.pow(Exp::from_integer(-1))?))
    }

    /// Calls `f` on every atom, including atoms nested inside other atoms.
    pub fn for_each_atom(&self, f: &mut dyn FnMut(&Atom)) {
        for m in self.terms.keys() {
            for (a, _) in &m.0 {
                f(a);
                a.for_each_inner(f);
            }
        }
    }

    /// All atoms at any depth.
    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        self.for_each_atom(&mut |a| {
            out.insert(a.clone());
        });
        out
    }

    /// Atoms appearing directly as monomial factors (not nested).
    pub fn top_atoms(&self) -> BTreeSet<Atom> {
        self.terms.keys().flat_map(|m| m.0.iter().map(|(a, _)| a.clone())).collect()
    }

    pub fn contains_atom(&self, target: &Atom) -> bool {
        let mut found = false;
        self.for_each_atom(&mut |a| found |= a == target);
        found
    }

    /// Highest jet order present at any depth.
    pub fn max_jet_order(&self) -> Option<u32> {
        let mut best = None;
        self.for_each_atom(&mut |a| {
            if let Atom::Jet(k) = a {
                best = Some(best.map_or(*k, |b: u32| b.max(*k)));
            }
        });
        best
    }

    /// Jet orders present at any depth, ascending.
    pub fn jet_orders(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        self.for_each_atom(&mut |a| {
            if let Atom::Jet(k) = a {
                out.insert(*k);
            }
        });
        out
    }

    /// True when every atom is a leaf, so the normal form decides equality
    /// as functions (distinct Laurent-Puiseux monomials are independent).
    pub fn is_exact_fragment(&self) -> bool {
        self.terms.keys().all(|m| m.0.iter().all(|(a, _)| a.is_leaf()))
    }

    /// True on the polynomial fragment: leaf atoms with positive integer exponents.
    pub fn is_polynomial(&self) -> bool {
        self.terms.keys().all(|m| m.0.iter().all(|(a, e)| a.is_leaf() && e.is_integer() && *e.numer() > 0))
    }

    /// Coefficient of `atom^power` when the expression is viewed as a
    /// polynomial in `atom` (only top-level occurrences are considered).
    pub fn coeff_of(&self, atom: &Atom, power: Exp) -> Expr {
        let mut out = Expr::zero();
        for (m, c) in &self.terms {
            let (e, rest) = m.split_off(atom);
            if e == power {
                out.add_term(rest, c.clone());
            }
        }
        out
    }

    /// Total number of terms, counting nested expressions; a cheap size metric.
    pub fn weight(&self) -> usize {
        let mut n = self.terms.len();
        self.for_each_atom(&mut |a| {
            if let Atom::ExpOf(e) | Atom::Pow(e) = a {
                n += e.terms.len();
            }
        });
        n
    }
}

/// Exact `c^e` for rational `c`, when it exists.
pub fn rational_pow(c: &Coeff, e: Exp) -> Option<Coeff> {
    if c.is_zero() {
        return (*e.numer() > 0).then(Coeff::zero);
    }
    let (p, d) = (*e.numer(), *e.denom());
    let base = if p < 0 { c.recip() } else { c.clone() };
    let root = if d == 1 {
        base
    } else {
        if base.is_negative() && d % 2 == 0 {
            return None;
        }
        let neg = base.is_negative();
        let abs = base.abs();
        let n = exact_root(abs.numer(), d as u32)?;
        let m = exact_root(abs.denom(), d as u32)?;
        let r = BigRational::new(n, m);
        if neg {
            -r
        } else {
            r
        }
    };
    let k = p.unsigned_abs();
    Some(num_traits::pow::pow(root, k.to_usize()?))
}

fn exact_root(n: &BigInt, d: u32) -> Option<BigInt> {
    let r = n.nth_root(d);
    (num_traits::pow::pow(r.clone(), d as usize) == *n).then_some(r)
}

impl From<i64> for Expr {
    fn from(n: i64) -> Expr {
        Expr::int(n)
    }
}

impl From<Atom> for Expr {
    fn from(a: Atom) -> Expr {
        Expr::atom(a)
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident, $method:ident) => {
        impl std::ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $f(self, rhs: &Expr) -> Expr {
                Expr::$method(self, rhs)
            }
        }
        impl std::ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $f(self, rhs: Expr) -> Expr {
                Expr::$method(&self, &rhs)
            }
        }
        impl std::ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $f(self, rhs: &Expr) -> Expr {
                Expr::$method(&self, rhs)
            }
        }
        impl std::ops::$tr<Expr> for &Expr {
            type Output = Expr;
            fn $f(self, rhs: Expr) -> Expr {
                Expr::$method(self, &rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        display::fmt_atom(self, f)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        display::fmt_expr(self, f)
    }
}

/// Converts a coefficient to `f64`, saturating on overflow.
pub fn coeff_to_f64(c: &Coeff) -> f64 {
    c.to_f64().unwrap_or_else(|| {
        let n = c.numer().to_f64().unwrap_or(f64::NAN);
        let d = c.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

//! Seeded random expressions for property tests and the selfcheck battery.

use crate::expr::{rat, Atom, Exp, Expr, Monomial};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_terms: usize,
    pub max_jet: u32,
    /// Maximum total degree of a monomial.
    pub max_degree: u32,
    /// Allow negative exponents on jet variables of order ≥ 1.
    pub laurent: bool,
    /// Allow exp(...) and radical factors.
    pub transcendental: bool,
    pub include_tx: bool,
    pub params: Vec<&'static str>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_terms: 4,
            max_jet: 3,
            max_degree: 3,
            laurent: false,
            transcendental: false,
            include_tx: true,
            params: vec![],
        }
    }
}

impl GenConfig {
    /// Jet polynomials only.
    pub fn jet_polynomial(max_jet: u32, max_degree: u32) -> Self {
        GenConfig { max_jet, max_degree, include_tx: false, ..GenConfig::default() }
    }

    pub fn rich() -> Self {
        GenConfig { laurent: true, transcendental: true, params: vec!["a"], ..GenConfig::default() }
    }
}

fn leaf<R: Rng>(rng: &mut R, cfg: &GenConfig) -> Atom {
    let extra = if cfg.include_tx { 2 } else { 0 } + cfg.params.len();
    let n = cfg.max_jet as usize + 1 + extra;
    let i = rng.gen_range(0..n);
    if i <= cfg.max_jet as usize {
        return Atom::Jet(i as u32);
    }
    let j = i - cfg.max_jet as usize - 1;
    if cfg.include_tx && j < 2 {
        return if j == 0 { Atom::T } else { Atom::X };
    }
    let k = j - if cfg.include_tx { 2 } else { 0 };
    Atom::param(cfg.params[k])
}

fn small_coeff<R: Rng>(rng: &mut R) -> crate::Coeff {
    let n = rng.gen_range(-5i64..=5);
    let d = rng.gen_range(1i64..=3);
    rat(if n == 0 { 1 } else { n }, d)
}

/// A random expression in normal form.
pub fn random_expr<R: Rng>(rng: &mut R, cfg: &GenConfig) -> Expr {
    let nterms = rng.gen_range(1..=cfg.max_terms.max(1));
    let mut out = Expr::zero();
    for _ in 0..nterms {
        let deg = rng.gen_range(0..=cfg.max_degree);
        let mut factors = Vec::new();
        for _ in 0..deg {
            factors.push((leaf(rng, cfg), Exp::from_integer(1)));
        }
        if cfg.laurent && rng.gen_bool(0.3) {
            let k = rng.gen_range(1..=cfg.max_jet.max(1));
            factors.push((Atom::Jet(k), Exp::from_integer(-rng.gen_range(1..=2))));
        }
        let mut term = Expr::term(small_coeff(rng), Monomial::from_factors(factors));
        if cfg.transcendental && rng.gen_bool(0.25) {
            let inner = Expr::atom(leaf(rng, cfg)).add(&Expr::int(rng.gen_range(1..=2)));
            term = if rng.gen_bool(0.5) {
                term.mul(&Expr::exp(&inner))
            } else {
                // inner is a sum, so this is a genuine radical atom
                term.mul(&inner.pow(Exp::new(1, 2)).expect("radical of a sum"))
            };
        }
        out = out.add(&term);
    }
    out
}

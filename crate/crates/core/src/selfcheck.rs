//! Randomized battery of algebraic identities across the engine, runnable
//! from the command line as well as from tests.

use crate::calculus::{prolonged_action, total_dt_onshell, total_dx, EvolutionPDE};
use crate::expr::{is_zero, Atom, Expr, ZeroPolicy};
use crate::gen::{random_expr, GenConfig};
use crate::parser::parse_permissive;
use crate::report::{CheckReport, Verdict};
use crate::symmetry::build_constraints;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_CASES: usize = 100;

type Case = fn(&mut ChaCha8Rng, &ZeroPolicy) -> Result<(), String>;

fn same(lhs: &Expr, rhs: &Expr, policy: &ZeroPolicy) -> Result<(), String> {
    if lhs == rhs {
        return Ok(());
    }
    let r = is_zero(&lhs.sub(rhs), policy);
    if r.passed() {
        Ok(())
    } else {
        Err(format!("{lhs}  vs  {rhs} ({})", r.verdict))
    }
}

fn rich(rng: &mut ChaCha8Rng) -> Expr {
    random_expr(rng, &GenConfig::rich())
}

fn poly(rng: &mut ChaCha8Rng) -> Expr {
    random_expr(rng, &GenConfig { max_terms: 3, ..GenConfig::jet_polynomial(3, 2) })
}

fn normalization_idempotent(rng: &mut ChaCha8Rng, _: &ZeroPolicy) -> Result<(), String> {
    let e = rich(rng);
    let again = Expr::from_terms(e.terms().map(|(m, c)| (m.clone(), c.clone())));
    if again != e {
        return Err(format!("rebuilding {e} gave {again}"));
    }
    let reparsed = parse_permissive(&e.to_string()).map_err(|err| err.to_string())?;
    if reparsed != e {
        return Err(format!("reparsing {e} gave {reparsed}"));
    }
    Ok(())
}

fn ring_axioms(rng: &mut ChaCha8Rng, policy: &ZeroPolicy) -> Result<(), String> {
    let (a, b, c) = (rich(rng), rich(rng), rich(rng));
    same(&a.add(&b).add(&c), &a.add(&b.add(&c)), policy)?;
    same(&a.add(&b), &b.add(&a), policy)?;
    same(&a.mul(&b).mul(&c), &a.mul(&b.mul(&c)), policy)?;
    same(&a.mul(&b), &b.mul(&a), policy)?;
    same(&a.mul(&b.add(&c)), &a.mul(&b).add(&a.mul(&c)), policy)?;
    same(&a.add(&a.neg()), &Expr::zero(), policy)?;
    same(&a.mul(&Expr::one()), &a, policy)
}

fn random_variable(rng: &mut ChaCha8Rng) -> Atom {
    match rng.gen_range(0..6) {
        0 => Atom::T,
        1 => Atom::X,
        2 => Atom::param("a"),
        k => Atom::Jet(k - 3),
    }
}

fn product_and_chain_rules(rng: &mut ChaCha8Rng, policy: &ZeroPolicy) -> Result<(), String> {
    let (a, b) = (rich(rng), rich(rng));
    let v = random_variable(rng);
    let d = |e: &Expr| e.partial_deriv(&v);
    same(&d(&a.mul(&b)), &d(&a).mul(&b).add(&a.mul(&d(&b))), policy)?;
    same(&d(&Expr::exp(&a)), &Expr::exp(&a).mul(&d(&a)), policy)?;
    same(&total_dx(&a.mul(&b)), &total_dx(&a).mul(&b).add(&a.mul(&total_dx(&b))), policy)?;
    same(&total_dx(&Expr::exp(&a)), &Expr::exp(&a).mul(&total_dx(&a)), policy)
}

fn jet_commutator(rng: &mut ChaCha8Rng, policy: &ZeroPolicy) -> Result<(), String> {
    let e = rich(rng);
    let k = rng.gen_range(0..5u32);
    let du = |e: &Expr, j: u32| e.partial_deriv(&Atom::Jet(j));
    let lhs = du(&total_dx(&e), k).sub(&total_dx(&du(&e, k)));
    let rhs = if k == 0 { Expr::zero() } else { du(&e, k - 1) };
    same(&lhs, &rhs, policy)
}

fn onshell_commutation(rng: &mut ChaCha8Rng, policy: &ZeroPolicy) -> Result<(), String> {
    let e = rich(rng);
    let pde = if rng.gen_bool(0.5) {
        EvolutionPDE::kdv_eps()
    } else {
        EvolutionPDE::from_parts("quadratic", vec![Expr::u(0).mul(&Expr::u(1)), Expr::u(3).mul(&Expr::u(3))])
    };
    let lhs = total_dt_onshell(&total_dx(&e), &pde, 1);
    let rhs = total_dt_onshell(&e, &pde, 1).map(total_dx);
    for (l, r) in lhs.coeffs().iter().zip(rhs.coeffs()) {
        same(l, r, policy)?;
    }
    Ok(())
}

fn canonical_operator_derivation(rng: &mut ChaCha8Rng, policy: &ZeroPolicy) -> Result<(), String> {
    let (eta, a, b) = (poly(rng), rich(rng), rich(rng));
    let x = |f: &Expr| prolonged_action(&eta, f);
    same(&x(&a.mul(&b)), &x(&a).mul(&b).add(&a.mul(&x(&b))), policy)
}

fn constraint_reduction_idempotent(rng: &mut ChaCha8Rng, policy: &ZeroPolicy) -> Result<(), String> {
    let gens = ["u2", "u1*u3 - 3*u2^2", "u2 - u*u1", "u3 + u1^2"];
    let g = parse_permissive(gens[rng.gen_range(0..gens.len())]).expect("fixed generator");
    let cs = build_constraints(&g, 6).map_err(|err| err.to_string())?;
    // negative powers only of jets below the leading one, where the manifold is regular
    let low = random_expr(rng, &GenConfig { max_jet: cs.leading - 1, ..GenConfig::rich() });
    let high = random_expr(rng, &GenConfig { max_terms: 3, ..GenConfig::jet_polynomial(6, 2) });
    let e = low.mul(&high).add(&poly(rng));
    let once = cs.reduce(&e).map_err(|err| err.to_string())?;
    let twice = cs.reduce(&once).map_err(|err| err.to_string())?;
    if let Some(k) = once.max_jet_order() {
        if k >= cs.leading {
            return Err(format!("{once} still contains u{k}"));
        }
    }
    same(&once, &twice, policy)
}

pub const PROPERTIES: &[(&str, Case)] = &[
    ("normalization idempotence", normalization_idempotent),
    ("ring axioms", ring_axioms),
    ("product and chain rules", product_and_chain_rules),
    ("jet commutator [d/du_k, D_x] = d/du_(k-1)", jet_commutator),
    ("on-shell D_t D_x = D_x D_t", onshell_commutation),
    ("canonical operator is a derivation", canonical_operator_derivation),
    ("constraint reduction idempotence", constraint_reduction_idempotent),
];

/// Runs every property on `cases` random inputs derived from `seed`.
pub fn run_selfcheck(cases: usize, seed: u64, policy: &ZeroPolicy) -> CheckReport {
    let children = PROPERTIES.iter().map(|(name, case)| run_property(name, *case, cases, seed, policy)).collect();
    CheckReport::aggregate("selfcheck", children)
}

fn run_property(name: &str, case: Case, cases: usize, seed: u64, policy: &ZeroPolicy) -> CheckReport {
    let mut failures = Vec::new();
    for i in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(i as u64));
        if let Err(msg) = case(&mut rng, policy) {
            failures.push(format!("case {i}: {msg}"));
        }
    }
    let verdict = if failures.is_empty() { Verdict::Pass } else { Verdict::Fail };
    let mut r = CheckReport::new(name, verdict).with_note(format!("{cases} cases, {} failures", failures.len()));
    r.notes.extend(failures.into_iter().take(3));
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_passes() {
        let r = run_selfcheck(DEFAULT_CASES, 7, &ZeroPolicy::default());
        assert!(r.passed(), "{}", r.render());
        assert_eq!(r.children.len(), PROPERTIES.len());
    }

    #[test]
    fn a_broken_identity_is_caught() {
        fn broken(rng: &mut ChaCha8Rng, policy: &ZeroPolicy) -> Result<(), String> {
            let a = rich(rng);
            same(&total_dx(&a.mul(&a)), &total_dx(&a).mul(&a), policy)
        }
        let r = run_property("broken", broken, 20, 1, &ZeroPolicy::default());
        assert_eq!(r.verdict, Verdict::Fail);
    }
}

use super::*;
use crate::calculus::total_dx;
use crate::gen::{random_expr, GenConfig};
use crate::parser::{parse_expression_in, parse_permissive, Scope};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn p(s: &str) -> Expr {
    parse_permissive(s).unwrap()
}

fn with_fns(s: &str, fns: &[&str]) -> Expr {
    let scope = Scope { time_functions: fns.iter().map(|f| f.to_string()).collect(), ..Scope::permissive() };
    parse_expression_in(s, &scope, 1).unwrap()
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn policy() -> ZeroPolicy {
    ZeroPolicy::default()
}

#[test]
fn jet_evaluate_examples() {
    assert!(jet_evaluate(&p("-x/t"), &p("u2")).unwrap().is_zero());
    let u0 = p("(b - x)/(t + a)");
    let res = u0.partial_deriv(&Atom::T).sub(&jet_evaluate(&u0, &p("u*u1")).unwrap());
    assert!(is_zero(&res, &policy()).passed());
    let u0 = p("2*sqrt(t^2 + t - x) - 2*t - 1");
    let e = jet_evaluate(&u0, &p("u1*u3 - 3*u2^2")).unwrap();
    assert!(is_zero(&e, &policy()).passed());
}

#[test]
fn expansion_matches_direct_substitution() {
    // u*u1 at u0 + eps*u1 has first-order part u0*u1' + u1*u0'.
    let sol = EpsSeries::new(vec![p("x^2"), p("t*x")]);
    let e = expand_at(&p("u*u1"), &sol, 2).unwrap();
    assert_eq!(e.coeffs()[0], p("2*x^3"));
    assert_eq!(e.coeffs()[1], p("x^2*t + t*x*2*x"));
    assert_eq!(e.coeffs()[2], p("t^2*x"));
}

#[test]
fn transport_linear_ansatz_collects() {
    let fns = ["A", "B"];
    let ansatz = Ansatz::new("lin", EpsSeries::lift(&with_fns("A*x + B", &fns), 0), names(&fns), vec![]).unwrap();
    let res = substitute_ansatz(&EvolutionPDE::transport(), &ansatz, 0).unwrap();
    let sys = collect_reduced_system(&res.coeffs()[0], &[p("x"), p("1")], None, &policy()).unwrap();
    assert_eq!(sys.equations[0], with_fns("dA - A^2", &fns));
    assert_eq!(sys.equations[1], with_fns("dB - A*B", &fns));
    let expected = vec![("A".to_string(), with_fns("A^2", &fns)), ("B".to_string(), with_fns("A*B", &fns))];
    assert!(compare_system(&sys, &names(&fns), &expected, &policy()).unwrap().passed());
    let wrong = vec![("A".to_string(), with_fns("-A^2", &fns)), ("B".to_string(), with_fns("A*B", &fns))];
    assert!(!compare_system(&sys, &names(&fns), &wrong, &policy()).unwrap().passed());

    let sol = BTreeMap::from([("A".to_string(), p("-1/(t+a)")), ("B".to_string(), p("b/(t+a)"))]);
    assert!(verify_ode_solution(&sys, &names(&fns), &sol, &policy()).unwrap().passed());
    let bad = BTreeMap::from([("A".to_string(), p("1/(t+a)")), ("B".to_string(), p("b/(t+a)"))]);
    assert!(!verify_ode_solution(&sys, &names(&fns), &bad, &policy()).unwrap().passed());
    let partial = BTreeMap::from([("A".to_string(), p("1/(t+a)"))]);
    assert!(matches!(verify_ode_solution(&sys, &names(&fns), &partial, &policy()), Err(ReductionError::Unbound(_))));
}

#[test]
fn constant_ansatz_and_empty_residual() {
    let a = Ansatz::new("c", EpsSeries::lift(&p("c0"), 0), vec![], vec![]).unwrap();
    let res = substitute_ansatz(&EvolutionPDE::transport(), &a, 0).unwrap();
    assert!(res.is_zero());
    let sys = collect_reduced_system(&res.coeffs()[0], &[], None, &policy()).unwrap();
    assert!(sys.equations.is_empty());
}

#[test]
fn uncovered_profile_is_reported() {
    let fns = ["A", "B"];
    let res = with_fns("(dA - A^2)*x + dB - A*B", &fns);
    let err = collect_reduced_system(&res, &[p("x")], None, &policy()).unwrap_err();
    assert!(matches!(err, ReductionError::NotSpanned(_)), "{err}");
    assert!(matches!(collect_reduced_system(&res, &[p("x + 1")], None, &policy()), Err(ReductionError::BadBasis(_))));
}

#[test]
fn ansatz_rejects_jets_and_undeclared_functions() {
    assert!(Ansatz::new("bad", EpsSeries::lift(&p("u1"), 0), vec![], vec![]).is_err());
    let e = with_fns("A*x", &["A"]);
    assert!(Ansatz::new("bad", EpsSeries::lift(&e, 0), vec![], vec![]).is_err());
}

#[test]
fn kdv_first_order_ansatz_collects_three_odes() {
    let fns = ["p", "C", "D"];
    let u0 = p("(b - x)/(t + a)");
    let u1 = with_fns("p*(t+a)*exp((b - x)/(t + a)) + C*x + D", &fns);
    let a = Ansatz::new("ex1", EpsSeries::new(vec![u0, u1]), names(&fns), vec![]).unwrap();
    let res = substitute_ansatz(&EvolutionPDE::kdv_eps(), &a, 1).unwrap();
    assert!(is_zero(&res.coeffs()[0], &policy()).passed());
    let basis = [p("x"), p("1"), p("exp((b - x)/(t + a))")];
    let sys = collect_reduced_system(&res.coeffs()[1], &basis, None, &policy()).unwrap();
    let expected = vec![
        ("C".to_string(), with_fns("-2*C/(t+a)", &fns)),
        ("D".to_string(), with_fns("(b*C - D)/(t+a)", &fns)),
        ("p".to_string(), with_fns("-2*p/(t+a)", &fns)),
    ];
    let r = compare_system(&sys, &names(&fns), &expected, &policy()).unwrap();
    assert!(r.passed(), "{}", r.render());
}

#[test]
fn radical_chart_collects_half_powers() {
    let chart = Chart::new(&p("t^2 + t - x")).unwrap();
    let e = p("3*sqrt(t^2 + t - x)^3 + x*(t^2+t-x)^(-1/2)");
    let back = chart.unapply(&chart.apply(&e).unwrap()).unwrap();
    assert!(is_zero(&back.sub(&e), &policy()).passed());
    assert!(Chart::new(&p("t^2 - x^2")).is_err());

    let basis = [p("(t^2+t-x)^(3/2)"), p("(t^2+t-x)^(1/2)"), p("(t^2+t-x)^(-1/2)")];
    let sys = collect_reduced_system(&e, &basis, Some(&chart), &policy()).unwrap();
    assert_eq!(sys.equations, vec![p("3"), p("-1"), p("t^2 + t")]);
}

#[test]
fn example_two_first_order_system_and_constant() {
    let fns = ["F1", "F2", "F3"];
    let u0 = p("2*sqrt(t^2 + t - x) - 2*t - 1");
    let u1 = with_fns("K*(t^2+t-x)^(-2) + F1 + F2*(t^2+t-x)^(-1/2) + F3*(t^2+t-x)^(1/2)", &fns);
    let a = Ansatz::new("ex2", EpsSeries::new(vec![u0, u1]), names(&fns), names(&["K"])).unwrap();
    let res = substitute_ansatz(&EvolutionPDE::kdv_eps(), &a, 1).unwrap();
    assert!(is_zero(&res.coeffs()[0], &policy()).passed());
    let chart = Chart::new(&p("t^2 + t - x")).unwrap();
    let basis: Vec<Expr> = [
        "1",
        "(t^2+t-x)^(-1/2)",
        "(t^2+t-x)^(-1)",
        "(t^2+t-x)^(-3/2)",
        "(t^2+t-x)^(1/2)",
        "(t^2+t-x)^(-5/2)",
        "(t^2+t-x)^(-3)",
    ]
    .iter()
    .map(|s| p(s))
    .collect();
    let sys = collect_reduced_system(&res.coeffs()[1], &basis, Some(&chart), &policy()).unwrap();
    let k = solve_constants(&sys, &names(&fns), &names(&["K"])).unwrap();
    assert_eq!(k["K"], crate::expr::rat(1, 4));
    let sys = ReducedSystem {
        basis: sys.basis.clone(),
        equations: sys.equations.iter().map(|e| bind_constants(e, &k).unwrap()).collect(),
    };
    let expected = vec![
        ("F1".to_string(), with_fns("-2*F3", &fns)),
        ("F2".to_string(), with_fns("-F1", &fns)),
        ("F3".to_string(), Expr::zero()),
    ];
    let r = compare_system(&sys, &names(&fns), &expected, &policy()).unwrap();
    assert!(r.passed(), "{}", r.render());
    let sol = BTreeMap::from([
        ("F1".to_string(), p("-2*A*t + B")),
        ("F2".to_string(), p("A*t^2 - B*t + C")),
        ("F3".to_string(), p("A")),
    ]);
    assert!(verify_ode_solution(&sys, &names(&fns), &sol, &policy()).unwrap().passed());
}

#[test]
fn invariance_and_residual_examples() {
    let eta = EpsSeries::lift(&p("u2"), 0);
    let sol = EpsSeries::lift(&p("(b - x)/(t + a)"), 0);
    assert!(verify_conditional_invariance(&eta, &sol, 0, &policy()).unwrap().passed());
    assert!(verify_solution_residual(&EvolutionPDE::transport(), &sol, 0, &policy()).unwrap().passed());
    let eta = EpsSeries::lift(&p("u1*u3 - 3*u2^2"), 0);
    let sol = EpsSeries::lift(&p("2*sqrt(t^2 + t - x) - 2*t - 1"), 0);
    assert!(verify_conditional_invariance(&eta, &sol, 0, &policy()).unwrap().passed());
    let wrong = EpsSeries::lift(&p("(t^2 + t - x)^(1/3)"), 0);
    assert!(!verify_conditional_invariance(&eta, &wrong, 0, &policy()).unwrap().passed());
    assert!(!verify_solution_residual(&EvolutionPDE::transport(), &wrong, 0, &policy()).unwrap().passed());
    // missing higher coefficients count as zero
    assert!(verify_solution_residual(&EvolutionPDE::transport(), &sol, 1, &policy()).unwrap().passed());
    assert!(!verify_solution_residual(&EvolutionPDE::kdv_eps(), &sol, 1, &policy()).unwrap().passed());
}

#[test]
fn example_one_first_order_pair() {
    let u0 = p("(b - x)/(t + a)");
    let u1 = p("-c1/(t+a)*exp((b - x)/(t + a)) + c3*x/(b*(t+a)^2) + (c2*t + c2*a + c3)/(t+a)^2");
    let sol = EpsSeries::new(vec![u0.clone(), u1]);
    let kdv = EvolutionPDE::kdv_eps();
    let r = verify_solution_residual(&kdv, &sol, 1, &policy()).unwrap();
    // The constant term printed with the solution does not solve the D equation.
    assert!(!r.passed());
    let u1 = p("-c1/(t+a)*exp((b - x)/(t + a)) + c3*x/(b*(t+a)^2) + (c2*t + c2*a - c3)/(t+a)^2");
    let sol = EpsSeries::new(vec![u0, u1]);
    let r = verify_solution_residual(&kdv, &sol, 1, &policy()).unwrap();
    assert!(r.passed(), "{}", r.render());
}

fn cfg() -> GenConfig {
    GenConfig { max_terms: 3, max_jet: 3, max_degree: 2, ..GenConfig::default() }
}

fn profile(seed: u64) -> Expr {
    let choices = ["x^2*t + 1/(t+2)", "exp(x*t) + x", "sqrt(t^2 + t - x)", "x^3 - t*x", "(t+1)/(x - 3)"];
    p(choices[(seed % choices.len() as u64) as usize])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jet_evaluate_is_multiplicative(seed in any::<u64>(), k in 0u64..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_expr(&mut rng, &cfg());
        let b = random_expr(&mut rng, &cfg());
        let s = profile(k);
        let lhs = jet_evaluate(&s, &a.mul(&b)).unwrap();
        let rhs = jet_evaluate(&s, &a).unwrap().mul(&jet_evaluate(&s, &b).unwrap());
        prop_assert!(is_zero(&lhs.sub(&rhs), &policy()).passed());
    }

    #[test]
    fn jet_evaluate_commutes_with_total_dx(seed in any::<u64>(), k in 0u64..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_expr(&mut rng, &cfg());
        let s = profile(k);
        let lhs = jet_evaluate(&s, &total_dx(&e)).unwrap();
        let rhs = jet_evaluate(&s, &e).unwrap().partial_deriv(&Atom::X);
        prop_assert!(is_zero(&lhs.sub(&rhs), &policy()).passed());
    }

    #[test]
    fn collection_round_trip(cs in proptest::collection::vec(-5i64..5, 4), ds in proptest::collection::vec(1i64..4, 4)) {
        let basis = [p("x^2"), p("x"), p("1"), p("exp(x/(t+1))")];
        let coeffs: Vec<Expr> = cs.iter().zip(&ds).map(|(c, d)| Expr::int(*c).mul(&p("t").pow(Exp::from_integer(*d)).unwrap())).collect();
        let mut residual = Expr::zero();
        for (c, b) in coeffs.iter().zip(&basis) {
            residual.add_assign(&c.mul(b));
        }
        let sys = collect_reduced_system(&residual, &basis, None, &policy()).unwrap();
        let mut back = Expr::zero();
        for (c, b) in sys.equations.iter().zip(&basis) {
            back.add_assign(&c.mul(b));
        }
        prop_assert!(is_zero(&back.sub(&residual), &policy()).passed());
        prop_assert_eq!(sys.equations, coeffs);
    }
}

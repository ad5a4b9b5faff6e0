use jetlab_core::calculus::EvolutionPDE;
use jetlab_core::parser::{parse_expression, parse_problem};
use jetlab_core::reduction::{
    collect_reduced_system, compare_system, substitute_ansatz, verify_conditional_invariance, verify_ode_solution,
    verify_solution_residual,
};
use jetlab_core::series::EpsSeries;
use jetlab_core::symmetry::{check_symmetry, SymmetryMode};
use jetlab_core::{Verdict, ZeroPolicy};

const TRANSPORT: &str = "
[pde]
name = transport
rhs0 = u*u1

[params]
symbols = a; b

[characteristic uxx]
eta0 = u2

[solution linear]
u0 = (b - x)/(t + a)

[ansatz linear]
expr = A*x + B
unknowns = A; B
basis = x; 1
system = dA = A^2; dB = A*B

[odesolution general]
ansatz = linear
A = -1/(t + a)
B = b/(t + a)
";

#[test]
fn transport_from_problem_text_to_verified_solution() {
    let problem = parse_problem(TRANSPORT).unwrap();
    let policy = problem.zero_policy();
    let eta = &problem.characteristic("uxx").unwrap().eta;
    assert!(check_symmetry(&problem.pde, eta, SymmetryMode::Nonclassical, 0, &policy).unwrap().passed());

    let spec = problem.ansatz("linear").unwrap();
    let res = substitute_ansatz(&problem.pde, &spec.ansatz, 0).unwrap();
    let sys = collect_reduced_system(&res.coeffs()[0], spec.bases[0].as_ref().unwrap(), None, &policy).unwrap();
    let expected = spec.systems[0].as_ref().unwrap();
    assert!(compare_system(&sys, &spec.ansatz.unknowns, expected, &policy).unwrap().passed());
    let general = &problem.ode_solution("general").unwrap().bindings;
    assert!(verify_ode_solution(&sys, &spec.ansatz.unknowns, general, &policy).unwrap().passed());

    let sol = &problem.solution("linear").unwrap().series;
    assert!(verify_solution_residual(&problem.pde, sol, 0, &policy).unwrap().passed());
    assert!(verify_conditional_invariance(eta, sol, 0, &policy).unwrap().passed());
}

#[test]
fn a_wrong_ode_solution_is_rejected_with_a_witness() {
    let problem = parse_problem(&TRANSPORT.replace("B = b/(t + a)", "B = b/(t + a)^2")).unwrap();
    let policy = problem.zero_policy();
    let spec = problem.ansatz("linear").unwrap();
    let res = substitute_ansatz(&problem.pde, &spec.ansatz, 0).unwrap();
    let sys = collect_reduced_system(&res.coeffs()[0], spec.bases[0].as_ref().unwrap(), None, &policy).unwrap();
    let r =
        verify_ode_solution(&sys, &spec.ansatz.unknowns, &problem.ode_solution("general").unwrap().bindings, &policy)
            .unwrap();
    assert_eq!(r.verdict, Verdict::Fail);
    assert!(r.render().contains("witness"));
}

#[test]
fn kdv_first_order_solution_through_the_public_api() {
    let kdv = EvolutionPDE::kdv_eps();
    let p = |s: &str| parse_expression(s).unwrap();
    let sol = EpsSeries::new(vec![
        p("2*sqrt(t^2 + t - x) - 2*t - 1"),
        p("1/4*(t^2 + t - x)^(-2) + 3 - 2*t + (t^2 - 3*t + 5)/sqrt(t^2 + t - x) + sqrt(t^2 + t - x)"),
    ]);
    let policy = ZeroPolicy::default();
    assert!(verify_solution_residual(&kdv, &sol, 1, &policy).unwrap().passed());
    let eta = EpsSeries::new(vec![p("u1*u3 - 3*u2^2"), p("-60*u2^5/u1^4")]);
    assert!(verify_conditional_invariance(&eta, &sol, 1, &policy).unwrap().passed());
    let off = sol.map(|c| c.clone()).add(&EpsSeries::new(vec![p("0"), p("1/100*x")]));
    assert!(!verify_solution_residual(&kdv, &off, 1, &policy).unwrap().passed());
}

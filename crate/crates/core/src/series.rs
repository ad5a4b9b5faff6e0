//! Truncated power series in the small parameter ε with expression coefficients.

use crate::expr::{is_zero, Expr, ZeroPolicy};
use crate::report::CheckReport;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeriesError {
    #[error("index {index} exceeds series order {order}")]
    OutOfRange { index: usize, order: usize },
}

/// Σ εⁱ cᵢ for i = 0..=order, everything beyond discarded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpsSeries {
    coeffs: Vec<Expr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesOp {
    Add,
    Mul,
}

impl EpsSeries {
    pub fn new(coeffs: Vec<Expr>) -> Self {
        assert!(!coeffs.is_empty(), "a series has at least the ε⁰ coefficient");
        EpsSeries { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        EpsSeries { coeffs: vec![Expr::zero(); order + 1] }
    }

    pub fn lift(e: &Expr, order: usize) -> Self {
        let mut s = EpsSeries::zero(order);
        s.coeffs[0] = e.clone();
        s
    }

    /// ε·e at the given order.
    pub fn eps_times(e: &Expr, order: usize) -> Self {
        let mut s = EpsSeries::zero(order);
        if order >= 1 {
            s.coeffs[1] = e.clone();
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Expr] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> Result<&Expr, SeriesError> {
        self.coeffs.get(i).ok_or(SeriesError::OutOfRange { index: i, order: self.order() })
    }

    pub fn truncate(&self, order: usize) -> Self {
        EpsSeries { coeffs: self.coeffs[..=order.min(self.order())].to_vec() }
    }

    pub fn map(&self, f: impl FnMut(&Expr) -> Expr) -> Self {
        EpsSeries { coeffs: self.coeffs.iter().map(f).collect() }
    }

    pub fn try_map<E>(&self, f: impl FnMut(&Expr) -> Result<Expr, E>) -> Result<Self, E> {
        Ok(EpsSeries { coeffs: self.coeffs.iter().map(f).collect::<Result<_, _>>()? })
    }

    pub fn add(&self, other: &Self) -> Self {
        combine(SeriesOp::Add, self, other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        combine(SeriesOp::Add, self, &other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        combine(SeriesOp::Mul, self, other)
    }

    pub fn neg(&self) -> Self {
        self.map(Expr::neg)
    }

    pub fn scale_expr(&self, e: &Expr) -> Self {
        self.map(|c| c.mul(e))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Expr::is_zero)
    }
}

/// Sum or Cauchy product truncated at the smaller order.
pub fn series_combine(op: SeriesOp, a: &EpsSeries, b: &EpsSeries) -> EpsSeries {
    combine(op, a, b)
}

fn combine(op: SeriesOp, a: &EpsSeries, b: &EpsSeries) -> EpsSeries {
    let n = a.order().min(b.order());
    let coeffs = (0..=n)
        .map(|i| match op {
            SeriesOp::Add => a.coeffs[i].add(&b.coeffs[i]),
            SeriesOp::Mul => {
                let mut acc = Expr::zero();
                for j in 0..=i {
                    if !a.coeffs[j].is_zero() && !b.coeffs[i - j].is_zero() {
                        acc.add_assign(&a.coeffs[j].mul(&b.coeffs[i - j]));
                    }
                }
                acc
            }
        })
        .collect();
    EpsSeries { coeffs }
}

/// Checks that the series is o(εᵖ): coefficients 0..=p all vanish.
pub fn is_o(s: &EpsSeries, p: usize, policy: &ZeroPolicy) -> Result<CheckReport, SeriesError> {
    if p > s.order() {
        return Err(SeriesError::OutOfRange { index: p, order: s.order() });
    }
    let children = (0..=p)
        .map(|i| {
            let mut r = is_zero(&s.coeffs[i], policy);
            r.label = format!("order eps^{i}");
            r
        })
        .collect();
    Ok(CheckReport::aggregate(format!("o(eps^{p})"), children))
}

impl std::fmt::Display for EpsSeries {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{random_expr, GenConfig};
    use crate::report::Verdict;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn s(v: Vec<Expr>) -> EpsSeries {
        EpsSeries::new(v)
    }

    #[test]
    fn lift_examples() {
        assert_eq!(EpsSeries::lift(&Expr::u(2), 1), s(vec![Expr::u(2), Expr::zero()]));
        assert_eq!(EpsSeries::lift(&Expr::zero(), 2), EpsSeries::zero(2));
        assert_eq!(EpsSeries::lift(&Expr::zero(), 2).coeffs().len(), 3);
        let rhs = Expr::u(0).mul(&Expr::u(1));
        assert_eq!(EpsSeries::lift(&rhs, 1).coeff(0).unwrap(), &rhs);
    }

    #[test]
    fn combine_examples() {
        let a = s(vec![Expr::u(0), Expr::zero()]);
        let b = s(vec![Expr::u(1), Expr::zero()]);
        assert_eq!(a.mul(&b), s(vec![Expr::u(0).mul(&Expr::u(1)), Expr::zero()]));

        let a = s(vec![Expr::u(2), Expr::u(3)]);
        let eps = s(vec![Expr::zero(), Expr::one()]);
        assert_eq!(a.mul(&eps), s(vec![Expr::zero(), Expr::u(2)]));

        let a = s(vec![Expr::u(1), Expr::one()]);
        let b = s(vec![Expr::u(1), Expr::int(-1)]);
        assert_eq!(a.mul(&b), s(vec![Expr::u(1).mul(&Expr::u(1)), Expr::zero()]));
    }

    #[test]
    fn mixed_orders_truncate_to_the_smaller() {
        let a = s(vec![Expr::u(0), Expr::u(1), Expr::u(2)]);
        let b = s(vec![Expr::one(), Expr::one()]);
        assert_eq!(a.add(&b).order(), 1);
        assert_eq!(a.mul(&b), s(vec![Expr::u(0), Expr::u(0).add(&Expr::u(1))]));
    }

    #[test]
    fn coeff_examples() {
        let eta1 = Expr::func("eta1", vec![Expr::u(0)]);
        let a = s(vec![Expr::u(2), eta1.clone()]);
        assert_eq!(a.coeff(0).unwrap(), &Expr::u(2));
        assert_eq!(a.coeff(1).unwrap(), &eta1);
        assert!(EpsSeries::lift(&Expr::u(4), 3).coeff(2).unwrap().is_zero());
        assert_eq!(a.coeff(2), Err(SeriesError::OutOfRange { index: 2, order: 1 }));
        assert_eq!(s(vec![Expr::zero(), Expr::u(3)]).coeff(1).unwrap(), &Expr::u(3));
    }

    #[test]
    fn is_o_examples() {
        let pol = ZeroPolicy::default();
        assert!(is_o(&EpsSeries::zero(1), 1, &pol).unwrap().passed());
        let r = is_o(&s(vec![Expr::zero(), Expr::u(1)]), 1, &pol).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.witness.is_some());
        assert!(is_o(&s(vec![Expr::zero(), Expr::u(1)]), 0, &pol).unwrap().passed());
        assert!(is_o(&EpsSeries::zero(1), 2, &pol).is_err());
    }

    fn rnd(seed: u64, order: usize) -> (EpsSeries, EpsSeries, EpsSeries) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let cfg = GenConfig::default();
        let mut one = || EpsSeries::new((0..=order).map(|_| random_expr(&mut r, &cfg)).collect());
        (one(), one(), one())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn product_is_commutative_and_associative(seed in any::<u64>(), order in 0usize..3) {
            let (a, b, c) = rnd(seed, order);
            prop_assert_eq!(a.mul(&b), b.mul(&a));
            prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        }

        #[test]
        fn lift_is_a_ring_morphism(seed in any::<u64>(), order in 0usize..3) {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let cfg = GenConfig::rich();
            let (x, y) = (random_expr(&mut r, &cfg), random_expr(&mut r, &cfg));
            let (lx, ly) = (EpsSeries::lift(&x, order), EpsSeries::lift(&y, order));
            prop_assert_eq!(lx.add(&ly), EpsSeries::lift(&x.add(&y), order));
            prop_assert_eq!(lx.mul(&ly), EpsSeries::lift(&x.mul(&y), order));
        }

        #[test]
        fn is_o_is_monotone(seed in any::<u64>(), order in 0usize..3, zeros in 0usize..3) {
            let (mut a, _, _) = rnd(seed, order);
            for i in 0..zeros.min(order + 1) {
                a.coeffs[i] = Expr::zero();
            }
            let pol = ZeroPolicy::default();
            for p in 0..=order {
                if is_o(&a, p, &pol).unwrap().passed() {
                    for q in 0..=p {
                        prop_assert!(is_o(&a, q, &pol).unwrap().passed());
                    }
                }
            }
        }
    }
}

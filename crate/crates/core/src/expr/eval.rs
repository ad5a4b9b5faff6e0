use super::{coeff_to_f64, Atom, Exp, Expr};
use std::collections::{BTreeMap, HashMap};

/// Numeric bindings for atoms. Leaf atoms must be bound; opaque function
/// applications may be bound directly, in which case their arguments are not
/// evaluated.
pub type Point = BTreeMap<Atom, f64>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DomainError {
    #[error("unbound atom {0}")]
    Unbound(String),
    #[error("negative base {value} under fractional power in {subexpr}")]
    NegativeRadicand { subexpr: String, value: f64 },
    #[error("zero base under negative power in {subexpr}")]
    ZeroDenominator { subexpr: String },
    #[error("non-finite value in {subexpr}")]
    NonFinite { subexpr: String },
}

/// Evaluates `e` at `point` in double precision.
pub fn eval_numeric(e: &Expr, point: &Point) -> Result<f64, DomainError> {
    Evaluator::new(point).eval(e).map(|(v, _)| v)
}

pub(crate) struct Evaluator<'a> {
    point: &'a Point,
    cache: HashMap<Atom, f64>,
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(point: &'a Point) -> Self {
        Evaluator { point, cache: HashMap::new() }
    }

    /// Value and magnitude scale (sum of absolute term values).
    pub(crate) fn eval(&mut self, e: &Expr) -> Result<(f64, f64), DomainError> {
        let mut sum = 0.0;
        let mut scale = 0.0;
        for (m, c) in e.terms() {
            let mut v = coeff_to_f64(c);
            for (a, k) in m.factors() {
                let base = self.atom(a)?;
                v *= power(base, *k, a)?;
            }
            sum += v;
            scale += v.abs();
        }
        if !sum.is_finite() {
            return Err(DomainError::NonFinite { subexpr: e.to_string() });
        }
        Ok((sum, scale))
    }

    fn atom(&mut self, a: &Atom) -> Result<f64, DomainError> {
        if let Some(v) = self.point.get(a) {
            return Ok(*v);
        }
        if let Some(v) = self.cache.get(a) {
            return Ok(*v);
        }
        let v = match a {
            Atom::ExpOf(arg) => {
                let v = self.eval(arg)?.0.exp();
                if !v.is_finite() {
                    return Err(DomainError::NonFinite { subexpr: a.to_string() });
                }
                v
            }
            Atom::Pow(base) => self.eval(base)?.0,
            _ => return Err(DomainError::Unbound(a.to_string())),
        };
        self.cache.insert(a.clone(), v);
        Ok(v)
    }
}

fn power(base: f64, k: Exp, a: &Atom) -> Result<f64, DomainError> {
    if base == 0.0 && *k.numer() < 0 {
        return Err(DomainError::ZeroDenominator { subexpr: a.to_string() });
    }
    if k.is_integer() {
        let n = *k.numer();
        return Ok(if let Ok(n) = i32::try_from(n) { base.powi(n) } else { base.powf(n as f64) });
    }
    if base < 0.0 {
        return Err(DomainError::NegativeRadicand { subexpr: a.to_string(), value: base });
    }
    Ok(base.powf(*k.numer() as f64 / *k.denom() as f64))
}

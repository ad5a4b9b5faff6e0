use super::{Atom, Coeff, Exp, Expr};
use num_traits::{One, Signed};
use std::fmt;

pub(super) fn fmt_atom(a: &Atom, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match a {
        Atom::T => f.write_str("t"),
        Atom::X => f.write_str("x"),
        Atom::Jet(0) => f.write_str("u"),
        Atom::Jet(k) => write!(f, "u{k}"),
        Atom::Param(p) => f.write_str(p),
        Atom::Func(app) => {
            f.write_str(&app.name)?;
            if !app.derivs.is_empty() {
                f.write_str("[")?;
                for (i, d) in app.derivs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{d}")?;
                }
                f.write_str("]")?;
            }
            f.write_str("(")?;
            for (i, arg) in app.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{arg}")?;
            }
            f.write_str(")")
        }
        Atom::ExpOf(e) => write!(f, "exp({e})"),
        Atom::Pow(e) => write!(f, "({e})"),
    }
}

fn fmt_exp(e: Exp, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if e.is_integer() && *e.numer() > 0 {
        write!(f, "^{}", e.numer())
    } else if e.is_integer() {
        write!(f, "^({})", e.numer())
    } else {
        write!(f, "^({}/{})", e.numer(), e.denom())
    }
}

fn fmt_coeff_abs(c: &Coeff, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let a = c.abs();
    if a.is_integer() {
        write!(f, "{}", a.numer())
    } else {
        write!(f, "{}/{}", a.numer(), a.denom())
    }
}

pub(super) fn fmt_expr(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if e.is_zero() {
        return f.write_str("0");
    }
    for (i, (m, c)) in e.terms().enumerate() {
        let neg = c.is_negative();
        match (i, neg) {
            (0, true) => f.write_str("-")?,
            (0, false) => {}
            (_, true) => f.write_str(" - ")?,
            (_, false) => f.write_str(" + ")?,
        }
        let unit = c.abs().is_one();
        if m.is_one() {
            fmt_coeff_abs(c, f)?;
            continue;
        }
        if !unit {
            fmt_coeff_abs(c, f)?;
            f.write_str("*")?;
        }
        for (j, (a, k)) in m.factors().iter().enumerate() {
            if j > 0 {
                f.write_str("*")?;
            }
            fmt_atom(a, f)?;
            if !k.is_one() {
                fmt_exp(*k, f)?;
            }
        }
    }
    Ok(())
}

//! Symbolic jet-space engine for approximate nonclassical Lie–Bäcklund
//! symmetries of evolution equations with a small parameter.

pub mod calculus;
pub mod expr;
pub mod gen;
pub mod linalg;
pub mod numeric;
pub mod parser;
pub mod reduction;
pub mod report;
pub mod selfcheck;
pub mod series;
pub mod symmetry;

pub use expr::{is_zero, Atom, Coeff, Exp, Expr, ExprError, Monomial, ZeroPolicy};
pub use report::{CheckReport, Sample, Verdict};

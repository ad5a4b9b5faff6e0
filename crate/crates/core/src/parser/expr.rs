//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' expo)?
//! expo    := ('-' | '+') expo | power          (a rational constant)
//! primary := number | ident | ident ('[' int (',' int)* ']')? '(' args ')' | '(' expr ')'
//! ```

use super::ParseError;
use crate::expr::{Atom, Coeff, Exp, Expr, ExprError};
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use std::collections::{BTreeMap, BTreeSet};

/// Name resolution for identifiers.
#[derive(Debug, Clone, Default)]
pub struct Scope {
    /// Declared symbolic parameters; `None` accepts any unknown identifier as one.
    pub params: Option<BTreeSet<String>>,
    /// Parameters with a rational value, substituted while parsing.
    pub constants: BTreeMap<String, Coeff>,
    /// Declared opaque functions; `None` accepts any call name.
    pub functions: Option<BTreeSet<String>>,
    /// Functions of t written bare (`A`), with `dA` for the derivative.
    pub time_functions: BTreeSet<String>,
    /// Accept `_1`, `_2`, ... as argument placeholders.
    pub placeholders: bool,
}

impl Scope {
    /// Only t, x, jet variables and calls to any function name.
    pub fn strict() -> Scope {
        Scope { params: Some(BTreeSet::new()), ..Scope::default() }
    }

    /// Any identifier is accepted as a parameter.
    pub fn permissive() -> Scope {
        Scope::default()
    }
}

/// Placeholder atom for argument slot `k` (1-based) of a function body.
pub fn placeholder(k: usize) -> Atom {
    Atom::param(&format!("_{k}"))
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Coeff),
    Ident(String),
    Sym(char),
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
}

fn lex(text: &str) -> Result<Lexer, (usize, String)> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let int: String = chars[start..i].iter().collect();
            let mut value = Coeff::from_integer(int.parse::<BigInt>().unwrap_or_default());
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                let fs = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let frac: String = chars[fs..i].iter().collect();
                if !frac.is_empty() {
                    let num: BigInt = frac.parse().unwrap();
                    let den = num_traits::pow(BigInt::from(10), frac.len());
                    value += Coeff::new(num, den);
                }
            }
            toks.push((Tok::Num(value), start));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push((Tok::Ident(chars[start..i].iter().collect()), start));
        } else if "+-*/^()[],".contains(c) {
            toks.push((Tok::Sym(c), i));
            i += 1;
        } else {
            return Err((i, format!("unexpected character '{c}'")));
        }
    }
    Ok(Lexer { toks })
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    scope: &'a Scope,
    end: usize,
}

type PResult<T> = Result<T, (usize, String)>;

fn lift(col: usize) -> impl Fn(ExprError) -> (usize, String) {
    move |e| (col, e.to_string())
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|(_, c)| *c).unwrap_or(self.end)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> PResult<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err((self.col(), format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = acc.add(&self.term()?);
            } else if self.eat('-') {
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut acc = self.unary()?;
        loop {
            let col = self.col();
            if self.eat('*') {
                acc = acc.mul(&self.unary()?);
            } else if self.eat('/') {
                let d = self.unary()?;
                if d.is_zero() {
                    return Err((col, "division by zero".into()));
                }
                acc = acc.div(&d).map_err(lift(col))?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat('-') {
            return Ok(self.unary()?.neg());
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let base = self.primary()?;
        let col = self.col();
        if self.eat('^') {
            let e = self.expo()?;
            let q = to_exp(&e).ok_or_else(|| (col, format!("exponent is not a rational constant: {e}")))?;
            return base.pow(q).map_err(lift(col));
        }
        Ok(base)
    }

    fn expo(&mut self) -> PResult<Expr> {
        if self.eat('-') {
            return Ok(self.expo()?.neg());
        }
        if self.eat('+') {
            return self.expo();
        }
        self.power()
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        let mut out = Vec::new();
        if self.eat(')') {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.eat(')') {
                return Ok(out);
            }
            self.expect(',')?;
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let col = self.col();
        match self.peek().cloned() {
            Some(Tok::Num(c)) => {
                self.pos += 1;
                Ok(Expr::constant(c))
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.peek() == Some(&Tok::Sym('[')) {
                    self.pos += 1;
                    let mut derivs = Vec::new();
                    loop {
                        match self.peek().cloned() {
                            Some(Tok::Num(n)) if n.is_integer() => {
                                self.pos += 1;
                                derivs.push(n.to_integer().to_usize().ok_or((col, "bad slot".to_string()))?);
                            }
                            _ => return Err((self.col(), "expected argument slot index".into())),
                        }
                        if self.eat(']') {
                            break;
                        }
                        self.expect(',')?;
                    }
                    self.expect('(')?;
                    let args = self.args()?;
                    return self.call(&name, derivs, args, col);
                }
                if self.eat('(') {
                    let args = self.args()?;
                    return self.call(&name, Vec::new(), args, col);
                }
                self.ident(&name, col)
            }
            Some(Tok::Sym(c)) => Err((col, format!("unexpected '{c}'"))),
            None => Err((col, "unexpected end of input".into())),
        }
    }

    fn call(&self, name: &str, derivs: Vec<usize>, args: Vec<Expr>, col: usize) -> PResult<Expr> {
        if derivs.is_empty() {
            match (name, args.len()) {
                ("sqrt", 1) => return Expr::sqrt(&args[0]).map_err(lift(col)),
                ("exp", 1) => return Ok(Expr::exp(&args[0])),
                ("pow", 2) => {
                    let q = to_exp(&args[1])
                        .ok_or_else(|| (col, format!("exponent is not a rational constant: {}", args[1])))?;
                    return args[0].pow(q).map_err(lift(col));
                }
                ("sqrt" | "exp" | "pow", n) => {
                    return Err((col, format!("{name} takes a different number of arguments than {n}")))
                }
                _ => {}
            }
        }
        let known =
            self.scope.time_functions.contains(name) || self.scope.functions.as_ref().is_none_or(|f| f.contains(name));
        if !known {
            return Err((col, format!("unknown function '{name}'")));
        }
        if derivs.iter().any(|&d| d >= args.len()) {
            return Err((col, format!("argument slot out of range for '{name}'")));
        }
        Ok(Expr::atom(Atom::func(name, derivs, args)))
    }

    fn ident(&self, name: &str, col: usize) -> PResult<Expr> {
        match name {
            "t" => return Ok(Expr::t()),
            "x" => return Ok(Expr::x()),
            "u" => return Ok(Expr::u(0)),
            _ => {}
        }
        if let Some(rest) = name.strip_prefix('u') {
            if rest.starts_with(|c: char| c.is_ascii_digit()) {
                return match rest.parse::<u32>() {
                    Ok(k) => Ok(Expr::u(k)),
                    Err(_) => Err((col, ExprError::BadJetIndex(name.to_string()).to_string())),
                };
            }
        }
        if let Some(c) = self.scope.constants.get(name) {
            return Ok(Expr::constant(c.clone()));
        }
        if self.scope.time_functions.contains(name) {
            return Ok(Expr::atom(Atom::time_fn(name, 0)));
        }
        let stripped = name.trim_start_matches('d');
        let order = name.len() - stripped.len();
        if order > 0 && self.scope.time_functions.contains(stripped) {
            return Ok(Expr::atom(Atom::time_fn(stripped, order)));
        }
        if self.scope.placeholders {
            if let Some(k) = name.strip_prefix('_').and_then(|k| k.parse::<usize>().ok()) {
                if k >= 1 {
                    return Ok(Expr::atom(placeholder(k)));
                }
            }
        }
        match &self.scope.params {
            Some(p) if !p.contains(name) => Err((col, format!("unknown identifier '{name}'"))),
            _ => Ok(Expr::param(name)),
        }
    }
}

/// The exponent value of a rational constant expression.
pub fn to_exp(e: &Expr) -> Option<Exp> {
    let c = e.as_constant()?;
    let n = c.numer().to_i64()?;
    let d = c.denom().to_i64()?;
    Some(Exp::new(n, d))
}

/// Parses with an explicit scope; `line` is used for error positions.
pub fn parse_expression_in(text: &str, scope: &Scope, line: usize) -> Result<Expr, ParseError> {
    let err = |(col, msg): (usize, String)| ParseError { line, column: col + 1, message: msg };
    let lexer = lex(text).map_err(err)?;
    let mut p = Parser { toks: lexer.toks, pos: 0, scope, end: text.chars().count() };
    if p.toks.is_empty() {
        return Err(err((0, "empty expression".into())));
    }
    let e = p.expr().map_err(err)?;
    if p.pos < p.toks.len() {
        return Err(err((p.col(), "unexpected trailing input".into())));
    }
    Ok(e)
}

/// Parses an expression over t, x and jet variables; calls to any function
/// name are opaque applications.
pub fn parse_expression(text: &str) -> Result<Expr, ParseError> {
    parse_expression_in(text, &Scope::strict(), 1)
}

/// Parses an expression accepting any identifier as a symbolic parameter.
pub fn parse_permissive(text: &str) -> Result<Expr, ParseError> {
    parse_expression_in(text, &Scope::permissive(), 1)
}

//! Sectioned problem files.
//!
//! ```text
//! [pde]
//! name = kdv
//! rhs0 = u*u1
//! rhs1 = u3
//!
//! [params]
//! symbols = a; b
//!
//! [characteristic eta_uxx]
//! eta0 = u2
//! eta1 = symbolic(6)
//! ```

use super::expr::{parse_expression_in, Scope};
use super::ParseError;
use crate::calculus::EvolutionPDE;
use crate::expr::{Coeff, Expr, ZeroPolicy};
use crate::reduction::Ansatz;
use crate::series::EpsSeries;
use crate::symmetry::SymmetryMode;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq)]
pub struct Characteristic {
    pub name: String,
    pub eta: EpsSeries,
    pub mode: Option<SymmetryMode>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSpec {
    pub name: String,
    pub series: EpsSeries,
    /// Characteristic used for the invariance check.
    pub characteristic: Option<String>,
    /// Bodies for opaque functions, written with `_1`, `_2`, ... for arguments.
    pub functions: Vec<(String, Expr)>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzSpec {
    pub ansatz: Ansatz,
    /// Collection basis per ε order; `None` means the residual must vanish.
    pub bases: Vec<Option<Vec<Expr>>>,
    /// Expected explicit systems φ′ = rhs per ε order.
    pub systems: Vec<Option<Vec<(String, Expr)>>>,
    pub radical: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolutionSpec {
    pub name: String,
    pub ansatz: String,
    pub bindings: BTreeMap<String, Expr>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolicyOverrides {
    pub samples: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub boxes: BTreeMap<String, (f64, f64)>,
}

impl PolicyOverrides {
    pub fn apply(&self, policy: &mut ZeroPolicy) {
        if let Some(s) = self.samples {
            policy.samples = s;
        }
        if let Some(t) = self.tol {
            policy.tol = t;
        }
        if let Some(s) = self.seed {
            policy.seed = s;
        }
        for (k, v) in &self.boxes {
            policy.boxes.insert(k.clone(), *v);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub name: String,
    pub pde: EvolutionPDE,
    pub symbols: Vec<String>,
    pub constants: BTreeMap<String, Coeff>,
    pub functions: Vec<String>,
    pub characteristics: Vec<Characteristic>,
    pub solutions: Vec<SolutionSpec>,
    pub ansatze: Vec<AnsatzSpec>,
    pub ode_solutions: Vec<OdeSolutionSpec>,
    pub policy: PolicyOverrides,
}

impl Problem {
    pub fn characteristic(&self, name: &str) -> Option<&Characteristic> {
        self.characteristics.iter().find(|c| c.name == name)
    }

    pub fn solution(&self, name: &str) -> Option<&SolutionSpec> {
        self.solutions.iter().find(|c| c.name == name)
    }

    pub fn ansatz(&self, name: &str) -> Option<&AnsatzSpec> {
        self.ansatze.iter().find(|c| c.ansatz.name == name)
    }

    pub fn ode_solution(&self, name: &str) -> Option<&OdeSolutionSpec> {
        self.ode_solutions.iter().find(|c| c.name == name)
    }

    /// Default policy (seed from the environment) with the file's overrides.
    pub fn zero_policy(&self) -> ZeroPolicy {
        let mut p = ZeroPolicy::from_env();
        self.policy.apply(&mut p);
        p
    }
}

struct Entry {
    key: String,
    value: String,
    line: usize,
    column: usize,
}

struct Section {
    kind: String,
    name: Option<String>,
    line: usize,
    entries: Vec<Entry>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<Entry> {
        let i = self.entries.iter().position(|e| e.key == key)?;
        Some(self.entries.remove(i))
    }

    fn named(&self) -> Result<String, ParseError> {
        self.name.clone().ok_or_else(|| err(self.line, 1, format!("section [{}] needs a name", self.kind)))
    }

    /// Keys `prefix0`, `prefix1`, ... in order; gaps are errors.
    fn indexed(&mut self, prefix: &str) -> Result<Vec<Entry>, ParseError> {
        let mut found: BTreeMap<usize, Entry> = BTreeMap::new();
        let mut rest = Vec::new();
        for e in self.entries.drain(..) {
            match e.key.strip_prefix(prefix).and_then(|k| k.parse::<usize>().ok()) {
                Some(i) => {
                    found.insert(i, e);
                }
                None => rest.push(e),
            }
        }
        self.entries = rest;
        let mut out = Vec::new();
        for (expect, (i, e)) in found.into_iter().enumerate() {
            if i != expect {
                return Err(err(e.line, 1, format!("{prefix}{expect} missing before {prefix}{i}")));
            }
            out.push(e);
        }
        Ok(out)
    }

    fn finish(self) -> Result<(), ParseError> {
        match self.entries.into_iter().next() {
            Some(e) => Err(err(e.line, e.column, format!("unknown key '{}' in [{}]", e.key, self.kind))),
            None => Ok(()),
        }
    }
}

fn err(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError { line, column, message: message.into() }
}

fn split_sections(text: &str) -> Result<Vec<Section>, ParseError> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(inner) = trimmed.strip_prefix('[') {
            let inner = inner.strip_suffix(']').ok_or_else(|| err(line, raw.len(), "unterminated section header"))?;
            let mut words = inner.split_whitespace();
            let kind = words.next().ok_or_else(|| err(line, 1, "empty section header"))?.to_string();
            let name = words.next().map(str::to_string);
            if words.next().is_some() {
                return Err(err(line, 1, "section header takes at most a kind and a name"));
            }
            sections.push(Section { kind, name, line, entries: Vec::new() });
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| err(line, 1, "expected key = value"))?;
        let section = sections.last_mut().ok_or_else(|| err(line, 1, "key outside of any section"))?;
        let key = key.trim().to_string();
        if section.entries.iter().any(|e| e.key == key) {
            return Err(err(line, 1, format!("duplicate key '{key}'")));
        }
        let column = content.find('=').unwrap() + 2 + (value.len() - value.trim_start().len());
        section.entries.push(Entry { key, value: value.trim().to_string(), line, column });
    }
    Ok(sections)
}

fn list(value: &str) -> Vec<String> {
    value.split(';').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

fn expr_in(e: &Entry, scope: &Scope) -> Result<Expr, ParseError> {
    parse_expression_in(&e.value, scope, e.line).map_err(|mut pe| {
        if pe.line == e.line {
            pe.column += e.column - 1;
        }
        pe
    })
}

fn expr_list(e: &Entry, scope: &Scope) -> Result<Vec<Expr>, ParseError> {
    list(&e.value)
        .iter()
        .map(|item| {
            parse_expression_in(item, scope, e.line)
                .map_err(|pe| err(e.line, e.column, format!("in '{item}': {}", pe.message)))
        })
        .collect()
}

fn parse_range(e: &Entry) -> Result<(f64, f64), ParseError> {
    let bad = || err(e.line, e.column, format!("expected lo..hi, found '{}'", e.value));
    let (lo, hi) = e.value.split_once("..").ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo < hi) {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn parse_number<T: std::str::FromStr>(e: &Entry) -> Result<T, ParseError> {
    e.value.parse().map_err(|_| err(e.line, e.column, format!("invalid number '{}'", e.value)))
}

fn symbolic_eta(e: &Entry, name: &str) -> Result<Option<Expr>, ParseError> {
    let Some(rest) = e.value.strip_prefix("symbolic") else {
        return Ok(None);
    };
    let rest = rest.trim();
    let order: u32 = if rest.is_empty() {
        6
    } else {
        rest.strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|r| r.trim().parse().ok())
            .ok_or_else(|| err(e.line, e.column, "expected symbolic or symbolic(K)"))?
    };
    let args: Vec<Expr> = [Expr::t(), Expr::x()].into_iter().chain((0..=order).map(Expr::u)).collect();
    Ok(Some(Expr::func(name, args)))
}

/// One `dphi = rhs` item per unknown.
fn parse_system(e: &Entry, scope: &Scope, unknowns: &[String]) -> Result<Vec<(String, Expr)>, ParseError> {
    let mut out = Vec::new();
    for item in list(&e.value) {
        let (lhs, rhs) = item
            .split_once('=')
            .ok_or_else(|| err(e.line, e.column, format!("'{item}' is not of the form dphi = rhs")))?;
        let lhs = lhs.trim();
        let name = lhs
            .strip_prefix('d')
            .filter(|n| unknowns.iter().any(|u| u == n))
            .ok_or_else(|| err(e.line, e.column, format!("'{lhs}' is not the derivative of a declared unknown")))?;
        let rhs = parse_expression_in(rhs.trim(), scope, e.line).map_err(|pe| err(e.line, e.column, pe.message))?;
        out.push((name.to_string(), rhs));
    }
    Ok(out)
}

pub fn parse_problem(text: &str) -> Result<Problem, ParseError> {
    let mut sections = split_sections(text)?;

    let mut symbols = Vec::new();
    let mut constants = BTreeMap::new();
    let mut functions = Vec::new();
    let mut policy = PolicyOverrides::default();
    let mut pde_section = None;
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    let mut rest = Vec::new();
    for mut s in sections.drain(..) {
        match s.kind.as_str() {
            "params" => {
                if let Some(e) = s.take("symbols") {
                    symbols.extend(list(&e.value));
                }
                if let Some(e) = s.take("functions") {
                    functions.extend(list(&e.value));
                }
                for e in s.entries.drain(..) {
                    let c = parse_expression_in(&e.value, &Scope::strict(), e.line)
                        .ok()
                        .and_then(|v| v.as_constant())
                        .ok_or_else(|| {
                            err(e.line, e.column, format!("parameter '{}' must be a rational constant", e.key))
                        })?;
                    constants.insert(e.key, c);
                }
            }
            "policy" => {
                for e in s.entries.drain(..) {
                    match e.key.as_str() {
                        "samples" => policy.samples = Some(parse_number(&e)?),
                        "tol" => policy.tol = Some(parse_number(&e)?),
                        "seed" => policy.seed = Some(parse_number(&e)?),
                        _ => {
                            policy.boxes.insert(e.key.clone(), parse_range(&e)?);
                        }
                    }
                }
            }
            "pde" => {
                if pde_section.is_some() {
                    return Err(err(s.line, 1, "duplicate [pde] section"));
                }
                pde_section = Some(s);
            }
            "characteristic" | "solution" | "ansatz" | "odesolution" => {
                let name = s.named()?;
                if !seen.insert((s.kind.clone(), name.clone())) {
                    return Err(err(s.line, 1, format!("duplicate [{} {name}]", s.kind)));
                }
                rest.push(s);
            }
            other => return Err(err(s.line, 1, format!("unknown section [{other}]"))),
        }
    }

    let base = Scope {
        params: Some(symbols.iter().cloned().collect()),
        constants: constants.clone(),
        functions: Some(functions.iter().cloned().collect()),
        time_functions: BTreeSet::new(),
        placeholders: false,
    };

    let mut pde_section = pde_section.ok_or_else(|| err(1, 1, "missing [pde] section"))?;
    let name = pde_section.take("name").map(|e| e.value).unwrap_or_else(|| "problem".to_string());
    let rhs_entries = pde_section.indexed("rhs")?;
    if rhs_entries.is_empty() {
        return Err(err(pde_section.line, 1, "[pde] needs rhs0"));
    }
    let rhs: Vec<Expr> = rhs_entries.iter().map(|e| expr_in(e, &base)).collect::<Result<_, _>>()?;
    pde_section.finish()?;
    let pde = EvolutionPDE::from_parts(name.clone(), rhs);

    let mut problem = Problem {
        name,
        pde,
        symbols,
        constants,
        functions,
        characteristics: Vec::new(),
        solutions: Vec::new(),
        ansatze: Vec::new(),
        ode_solutions: Vec::new(),
        policy,
    };

    for mut s in rest {
        let name = s.named()?;
        match s.kind.as_str() {
            "characteristic" => {
                let entries = s.indexed("eta")?;
                if entries.is_empty() {
                    return Err(err(s.line, 1, "characteristic needs eta0"));
                }
                let mut coeffs = Vec::new();
                for (j, e) in entries.iter().enumerate() {
                    let sym = if j > 0 { symbolic_eta(e, &format!("eta{j}"))? } else { None };
                    coeffs.push(match sym {
                        Some(x) => x,
                        None => expr_in(e, &base)?,
                    });
                }
                let mode = match s.take("mode") {
                    Some(e) => Some(
                        SymmetryMode::parse(&e.value)
                            .ok_or_else(|| err(e.line, e.column, format!("unknown mode '{}'", e.value)))?,
                    ),
                    None => None,
                };
                let note = s.take("note").map(|e| e.value);
                s.finish()?;
                problem.characteristics.push(Characteristic { name, eta: EpsSeries::new(coeffs), mode, note });
            }
            "solution" => {
                let entries = s.indexed("u")?;
                if entries.is_empty() {
                    return Err(err(s.line, 1, "solution needs u0"));
                }
                let coeffs: Vec<Expr> = entries.iter().map(|e| expr_in(e, &base)).collect::<Result<_, _>>()?;
                for (e, c) in entries.iter().zip(&coeffs) {
                    if c.max_jet_order().is_some() {
                        return Err(err(e.line, e.column, "solutions may not contain jet variables"));
                    }
                }
                let characteristic = s.take("characteristic").map(|e| (e.value, e.line));
                let note = s.take("note").map(|e| e.value);
                let mut fns = Vec::new();
                let body_scope = Scope { placeholders: true, ..base.clone() };
                for e in std::mem::take(&mut s.entries) {
                    match e.key.strip_prefix("fn.") {
                        Some(f) if problem.functions.iter().any(|g| g == f) => {
                            fns.push((f.to_string(), expr_in(&e, &body_scope)?))
                        }
                        Some(f) => return Err(err(e.line, 1, format!("'{f}' is not a declared function"))),
                        None => s.entries.push(e),
                    }
                }
                s.finish()?;
                let characteristic = match characteristic {
                    Some((c, line)) => {
                        if problem.characteristic(&c).is_none() {
                            return Err(err(line, 1, format!("unknown characteristic '{c}'")));
                        }
                        Some(c)
                    }
                    None => None,
                };
                problem.solutions.push(SolutionSpec {
                    name,
                    series: EpsSeries::new(coeffs),
                    characteristic,
                    functions: fns,
                    note,
                });
            }
            "ansatz" => {
                let unknowns = s.take("unknowns").map(|e| list(&e.value)).unwrap_or_default();
                let consts = s.take("constants").map(|e| list(&e.value)).unwrap_or_default();
                for n in unknowns.iter().chain(&consts) {
                    if problem.symbols.contains(n) || problem.constants.contains_key(n) || problem.functions.contains(n)
                    {
                        return Err(err(s.line, 1, format!("'{n}' is already declared in [params]")));
                    }
                }
                let mut scope = base.clone();
                scope.time_functions = unknowns.iter().cloned().collect();
                if let Some(p) = scope.params.as_mut() {
                    p.extend(consts.iter().cloned());
                }
                let mut entries = s.indexed("u")?;
                if let Some(e) = s.take("expr") {
                    if !entries.is_empty() {
                        return Err(err(e.line, 1, "use either expr or u0, u1, ..."));
                    }
                    entries.push(e);
                }
                if entries.is_empty() {
                    return Err(err(s.line, 1, "ansatz needs expr or u0"));
                }
                let coeffs: Vec<Expr> = entries.iter().map(|e| expr_in(e, &scope)).collect::<Result<_, _>>()?;
                let n = coeffs.len();
                let mut bases = vec![None; n];
                let mut systems = vec![None; n];
                if let Some(e) = s.take("basis") {
                    bases[0] = Some(expr_list(&e, &base)?);
                }
                if let Some(e) = s.take("system") {
                    systems[0] = Some(parse_system(&e, &scope, &unknowns)?);
                }
                for i in 0..n {
                    if let Some(e) = s.take(&format!("basis{i}")) {
                        if bases[i].is_some() {
                            return Err(err(e.line, 1, "basis given twice for the same order"));
                        }
                        bases[i] = Some(expr_list(&e, &base)?);
                    }
                    if let Some(e) = s.take(&format!("system{i}")) {
                        if systems[i].is_some() {
                            return Err(err(e.line, 1, "system given twice for the same order"));
                        }
                        systems[i] = Some(parse_system(&e, &scope, &unknowns)?);
                    }
                }
                let radical = s.take("radical").map(|e| expr_in(&e, &base)).transpose()?;
                s.finish()?;
                let ansatz = Ansatz::new(name, EpsSeries::new(coeffs), unknowns, consts)
                    .map_err(|e| err(entries[0].line, 1, e.to_string()))?;
                problem.ansatze.push(AnsatzSpec { ansatz, bases, systems, radical });
            }
            "odesolution" => {
                let a = s.take("ansatz").ok_or_else(|| err(s.line, 1, "odesolution needs ansatz = <name>"))?;
                let spec = problem
                    .ansatz(&a.value)
                    .ok_or_else(|| err(a.line, a.column, format!("unknown ansatz '{}'", a.value)))?;
                let unknowns = spec.ansatz.unknowns.clone();
                let note = s.take("note").map(|e| e.value);
                let mut bindings = BTreeMap::new();
                for e in std::mem::take(&mut s.entries) {
                    if unknowns.contains(&e.key) {
                        bindings.insert(e.key.clone(), expr_in(&e, &base)?);
                    } else {
                        s.entries.push(e);
                    }
                }
                let line = s.line;
                s.finish()?;
                if let Some(u) = unknowns.iter().find(|u| !bindings.contains_key(*u)) {
                    return Err(err(line, 1, format!("unknown {u} has no binding")));
                }
                problem.ode_solutions.push(OdeSolutionSpec { name, ansatz: a.value, bindings, note });
            }
            _ => unreachable!(),
        }
    }
    Ok(problem)
}

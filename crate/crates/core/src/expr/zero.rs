use super::eval::Evaluator;
use super::{Atom, Expr, Point};
use crate::report::{CheckReport, Sample, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

pub const DEFAULT_SEED: u64 = 42;
pub const SEED_ENV: &str = "JETLAB_SEED";

/// Parameters of the probabilistic zero test.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroPolicy {
    pub samples: usize,
    pub tol: f64,
    pub seed: u64,
    /// Sampling interval per atom name (`t`, `x`, `u2`, parameter names, ...).
    pub boxes: BTreeMap<String, (f64, f64)>,
    /// Interval for atoms without an entry in `boxes`.
    pub default_box: (f64, f64),
    /// Total attempts allowed per required sample when points hit domain errors.
    pub resample_factor: usize,
}

impl Default for ZeroPolicy {
    fn default() -> Self {
        let mut boxes = BTreeMap::new();
        boxes.insert("t".to_string(), (1.0, 2.0));
        boxes.insert("x".to_string(), (-1.0, 0.0));
        ZeroPolicy { samples: 24, tol: 1e-9, seed: DEFAULT_SEED, boxes, default_box: (0.5, 1.5), resample_factor: 10 }
    }
}

impl ZeroPolicy {
    /// Default policy with the seed taken from `JETLAB_SEED` when set.
    pub fn from_env() -> Self {
        let mut p = ZeroPolicy::default();
        if let Some(s) = std::env::var(SEED_ENV).ok().and_then(|s| s.trim().parse().ok()) {
            p.seed = s;
        }
        p
    }

    pub fn box_for(&self, atom: &Atom) -> (f64, f64) {
        let key = match atom {
            Atom::Func(app) => app.name.to_string(),
            other => other.to_string(),
        };
        self.boxes.get(&key).copied().unwrap_or(self.default_box)
    }

    /// Draws a point for the given free atoms, deterministically from `index`.
    pub fn sample_point(&self, atoms: &BTreeSet<Atom>, index: u64) -> Point {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(index));
        atoms
            .iter()
            .map(|a| {
                let (lo, hi) = self.box_for(a);
                let v = if hi > lo { rng.gen_range(lo..hi) } else { lo };
                (a.clone(), v)
            })
            .collect()
    }
}

/// Atoms that must be bound to evaluate `e`: leaves and opaque applications.
pub fn free_atoms(e: &Expr) -> BTreeSet<Atom> {
    let mut out = BTreeSet::new();
    collect_free(e, &mut out);
    out
}

fn collect_free(e: &Expr, out: &mut BTreeSet<Atom>) {
    for a in e.top_atoms() {
        match &a {
            Atom::ExpOf(inner) | Atom::Pow(inner) => collect_free(inner, out),
            _ => {
                out.insert(a);
            }
        }
    }
}

pub(crate) fn render_point(p: &Point) -> Vec<(String, f64)> {
    p.iter().map(|(a, v)| (a.to_string(), *v)).collect()
}

/// Decides `e = 0`: structurally first, then by seeded sampling.
///
/// On the exact fragment (leaf atoms only) the normal form is decisive and
/// sampling only supplies a witness for a nonzero expression.
pub fn is_zero(e: &Expr, policy: &ZeroPolicy) -> CheckReport {
    if e.is_zero() {
        let mut r = CheckReport::new("zero test", Verdict::Pass);
        r.symbolic = true;
        return r;
    }
    let atoms = free_atoms(e);
    let exact = e.is_exact_fragment();
    let budget = (policy.samples.max(1) * policy.resample_factor.max(1)) as u64;
    let mut report = CheckReport::new("zero test", Verdict::Pass);
    let mut valid = 0usize;
    let mut best: Option<Sample> = None;
    for index in 0..budget {
        if valid >= policy.samples {
            break;
        }
        let point = policy.sample_point(&atoms, index);
        match Evaluator::new(&point).eval(e) {
            Err(_) => report.domain_failures += 1,
            Ok((value, scale)) => {
                valid += 1;
                let s = Sample { point: render_point(&point), value, scale };
                report.max_residual = report.max_residual.max(value.abs());
                let exceeds = value.abs() > policy.tol * (1.0 + scale);
                report.samples.push(s.clone());
                if exceeds {
                    report.verdict = Verdict::Fail;
                    report.witness = Some(s);
                    break;
                }
                if best.as_ref().is_none_or(|b| value.abs() > b.value.abs()) {
                    best = Some(s);
                }
            }
        }
    }
    if exact {
        report.symbolic = true;
        if report.verdict != Verdict::Fail {
            report.verdict = Verdict::Fail;
            report.witness = best;
            report.notes.push("nonzero normal form; sampled values fall below tolerance".into());
        }
        return report;
    }
    if report.verdict != Verdict::Fail && valid < policy.samples {
        report.verdict = Verdict::Inconclusive;
        report.notes.push(format!("only {valid} of {} samples avoided domain errors", policy.samples));
    }
    report
}

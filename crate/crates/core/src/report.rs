//! Verdicts and check reports shared by every module.

use serde::{Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "INCONCLUSIVE")]
    Inconclusive,
}

impl Verdict {
    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }

    /// Fail dominates inconclusive, which dominates pass.
    pub fn merge(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn point_as_map<S: Serializer>(point: &[(String, f64)], s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(point.iter().map(|(k, v)| (k, v)))
}

/// One sampled evaluation of a residual.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    #[serde(serialize_with = "point_as_map")]
    pub point: Vec<(String, f64)>,
    pub value: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub label: String,
    pub verdict: Verdict,
    /// True when the verdict was decided on the normal form alone.
    pub symbolic: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<Sample>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Sample>,
    pub max_residual: f64,
    pub domain_failures: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<CheckReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn new(label: impl Into<String>, verdict: Verdict) -> Self {
        CheckReport {
            label: label.into(),
            verdict,
            symbolic: false,
            mode: None,
            samples: Vec::new(),
            witness: None,
            max_residual: 0.0,
            domain_failures: 0,
            children: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// A report whose verdict merges the children's verdicts.
    pub fn aggregate(label: impl Into<String>, children: Vec<CheckReport>) -> Self {
        let mut r = CheckReport::new(label, Verdict::Pass);
        r.symbolic = !children.is_empty() && children.iter().all(|c| c.symbolic);
        for c in &children {
            r.verdict = r.verdict.merge(c.verdict);
            r.max_residual = r.max_residual.max(c.max_residual);
            r.domain_failures += c.domain_failures;
            if r.witness.is_none() && c.verdict == Verdict::Fail {
                r.witness = c.witness.clone();
            }
        }
        r.children = children;
        r
    }

    pub fn with_mode(mut self, mode: impl Into<String>) -> Self {
        self.mode = Some(mode.into());
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict.is_pass()
    }

    /// Indented one-line-per-report rendering for terminals.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out, 0);
        out
    }

    fn render_into(&self, out: &mut String, depth: usize) {
        use std::fmt::Write;
        let pad = "  ".repeat(depth);
        let how = if self.symbolic { "symbolic" } else { "sampled" };
        let _ = write!(out, "{pad}{} [{}] {} (max residual {:.3e}", self.label, self.verdict, how, self.max_residual);
        if self.domain_failures > 0 {
            let _ = write!(out, ", {} domain rejections", self.domain_failures);
        }
        out.push_str(")\n");
        if let Some(w) = &self.witness {
            let pts: Vec<String> = w.point.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
            let _ = writeln!(out, "{pad}  witness: value {:.6e} at {}", w.value, pts.join(", "));
        }
        for n in &self.notes {
            let _ = writeln!(out, "{pad}  note: {n}");
        }
        for c in &self.children {
            c.render_into(out, depth + 1);
        }
    }
}

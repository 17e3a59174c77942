//! Serializable command reports and their text rendering. Wall-clock data
//! lives only in `timing` sections so the rest compares byte-exactly.

use std::fmt::Write;

use combkit_core::gf::GfSystem;
use combkit_core::interval::{Interval, Round};
use combkit_core::oracle::Point;
use combkit_core::sampler::{SampleStats, Term, Window};
use combkit_core::system::ValidationReport;
use serde::Serialize;
use serde_json::{json, Value};

/// Significant digits for interval ends at `precision` bits, plus margin.
pub fn digits_for(precision: u32) -> u32 {
    (precision as f64 * std::f64::consts::LOG10_2).ceil() as u32 + 2
}

#[derive(Clone, Debug, Serialize)]
pub struct Enclosure {
    pub lo: String,
    pub hi: String,
}

impl Enclosure {
    pub fn new(i: &Interval, digits: u32) -> Self {
        Enclosure { lo: i.lo().to_decimal(digits, Round::Down), hi: i.hi().to_decimal(digits, Round::Up) }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Assignment {
    pub variable: String,
    pub value: String,
}

pub fn assignments(gfs: &GfSystem, point: &Point) -> Vec<Assignment> {
    gfs.variables().iter().zip(point.values()).map(|(v, x)| Assignment { variable: v.clone(), value: x.to_string() }).collect()
}

fn point_text(a: &[Assignment]) -> String {
    a.iter().map(|a| format!("{}={}", a.variable, a.value)).collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Debug, Serialize)]
pub struct Bound {
    pub variable: String,
    pub lo: u64,
    pub hi: Option<u64>,
}

pub fn window_bounds(gfs: &GfSystem, w: &Window) -> Vec<Bound> {
    gfs.variables().iter().enumerate().map(|(v, name)| Bound { variable: name.clone(), lo: w.lo[v], hi: w.hi[v] }).collect()
}

fn window_text(b: &[Bound]) -> String {
    b.iter()
        .map(|b| match b.hi {
            Some(h) => format!("{}∈[{}, {}]", b.variable, b.lo, h),
            None => format!("{}∈[{}, ∞)", b.variable, b.lo),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostic {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<String>,
}

pub fn diagnostics(report: &ValidationReport) -> Vec<Diagnostic> {
    report
        .diagnostics
        .iter()
        .map(|d| Diagnostic { code: d.code.as_str().into(), message: d.message.clone(), node: d.node.map(|n| n.0), position: None })
        .collect()
}

/// Structured error written to the error stream.
#[derive(Clone, Debug, Serialize)]
pub struct ErrorReport {
    pub error: String,
    pub exit_code: i32,
    pub diagnostics: Vec<Diagnostic>,
}

impl ErrorReport {
    pub fn text(&self) -> String {
        let mut s = format!("error: {}\n", self.error);
        for d in &self.diagnostics {
            let at = d.position.as_deref().map(|p| format!(" at {p}")).unwrap_or_default();
            let _ = writeln!(s, "  {}{}: {}", d.code, at, d.message);
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassInfo {
    pub name: String,
    pub equation: String,
    pub min_size: Option<Vec<u64>>,
    /// `null` entries are unbounded.
    pub max_size: Option<Vec<Option<u64>>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidateReport {
    pub command: &'static str,
    pub valid: bool,
    pub variables: Vec<String>,
    pub classes: Vec<ClassInfo>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidateReport {
    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", if self.valid { "valid" } else { "invalid" });
        let _ = writeln!(s, "variables: {}", self.variables.join(", "));
        for c in &self.classes {
            let min = c.min_size.as_ref().map_or("none".into(), |m| format!("{m:?}"));
            let max = c.max_size.as_ref().map_or("none".into(), |m| {
                let parts: Vec<String> = m.iter().map(|x| x.map_or("∞".into(), |v| v.to_string())).collect();
                format!("[{}]", parts.join(", "))
            });
            let _ = writeln!(s, "{}  min {}  max {}", c.equation, min, max);
        }
        for d in &self.diagnostics {
            let _ = writeln!(s, "{}: {}", d.code, d.message);
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Coefficient {
    pub exponents: Vec<u32>,
    pub value: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CountReport {
    pub command: &'static str,
    pub class: String,
    pub variables: Vec<String>,
    pub terms: u32,
    /// Univariate coefficients `c_0..=c_terms`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<String>>,
    /// Nonzero multivariate coefficients, variable 0 varying fastest.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<Coefficient>>,
}

impl CountReport {
    pub fn text(&self) -> String {
        if let Some(c) = &self.coefficients {
            return format!("[{}]\n", c.join(", "));
        }
        let mut s = String::new();
        for c in self.table.iter().flatten() {
            let mono: Vec<String> = self.variables.iter().zip(&c.exponents).map(|(v, e)| format!("{v}^{e}")).collect();
            let _ = writeln!(s, "{} {}", mono.join(" "), c.value);
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NamedEnclosure {
    pub name: String,
    pub lo: String,
    pub hi: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct NodeEnclosure {
    pub node: u32,
    pub lo: String,
    pub hi: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub command: &'static str,
    pub point: Vec<Assignment>,
    pub precision: u32,
    pub classes: Vec<NamedEnclosure>,
    pub nodes: Vec<NodeEnclosure>,
}

impl OracleReport {
    pub fn text(&self) -> String {
        let mut s = format!("point {}  precision {}\n", point_text(&self.point), self.precision);
        for c in &self.classes {
            let _ = writeln!(s, "{} ∈ [{}, {}]", c.name, c.lo, c.hi);
        }
        for n in &self.nodes {
            let _ = writeln!(s, "  node {} ∈ [{}, {}]", n.node, n.lo, n.hi);
        }
        s
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Counters {
    pub attempts: u64,
    pub accepted: u64,
    pub early_aborts: u64,
    pub rejections: u64,
    pub escalations: u64,
    pub max_precision: u32,
}

impl From<&SampleStats> for Counters {
    fn from(s: &SampleStats) -> Self {
        Counters {
            attempts: s.attempts,
            accepted: s.accepted,
            early_aborts: s.early_aborts,
            rejections: s.rejections,
            escalations: s.escalations,
            max_precision: s.max_precision,
        }
    }
}

impl Counters {
    fn text(&self) -> String {
        format!(
            "attempts {}  accepted {}  early aborts {}  rejections {}  escalations {}  max precision {}\n",
            self.attempts, self.accepted, self.early_aborts, self.rejections, self.escalations, self.max_precision
        )
    }
}

/// JSON form of a built tree: `{"atom": key}`, `{"product": [...]}` or
/// `{"seq": [...]}`.
pub fn term_json(t: &Term) -> Value {
    match t {
        Term::Atom(k) => json!({ "atom": k }),
        Term::Product(c) => json!({ "product": c.iter().map(term_json).collect::<Vec<_>>() }),
        Term::Sequence(c) => json!({ "seq": c.iter().map(term_json).collect::<Vec<_>>() }),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleItem {
    /// Term string, or a JSON tree with `--tree`.
    pub object: Value,
    pub size: Vec<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleReport {
    pub command: &'static str,
    pub class: String,
    pub seed: u64,
    pub point: Vec<Assignment>,
    /// Expected sizes at a tuned point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<Vec<NamedEnclosure>>,
    pub window: Option<Vec<Bound>>,
    pub precision: u32,
    pub early_rejection: bool,
    pub samples: Vec<SampleItem>,
    pub counters: Counters,
    pub timing: Timing,
}

impl SampleReport {
    pub fn text(&self) -> String {
        let mut s = format!("class {}  seed {}  point {}\n", self.class, self.seed, point_text(&self.point));
        for e in self.expected.iter().flatten() {
            let _ = writeln!(s, "expected {} ∈ [{}, {}]", e.name, e.lo, e.hi);
        }
        if let Some(w) = &self.window {
            let _ = writeln!(s, "window {}", window_text(w));
        }
        for item in &self.samples {
            let object = match &item.object {
                Value::String(t) => t.clone(),
                v => v.to_string(),
            };
            let _ = writeln!(s, "{object}  size {:?}", item.size);
        }
        s.push_str(&self.counters.text());
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TuneReport {
    pub command: &'static str,
    pub class: String,
    pub target: Vec<Assignment>,
    pub point: Vec<Assignment>,
    pub expected: Vec<NamedEnclosure>,
    /// Present when samples were drawn at the tuned point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleReport>,
}

impl TuneReport {
    pub fn text(&self) -> String {
        let mut s = format!("class {}  target {}\npoint {}\n", self.class, point_text(&self.target), point_text(&self.point));
        for e in &self.expected {
            let _ = writeln!(s, "expected {} ∈ [{}, {}]", e.name, e.lo, e.hi);
        }
        if let Some(r) = &self.sample {
            s.push_str(&r.text());
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct UniformityRowOut {
    pub size: u64,
    pub structures: String,
    pub observed: usize,
    pub samples: u64,
    pub chi_square: f64,
    pub df: u64,
    pub p_value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct UniformityReport {
    pub command: &'static str,
    pub class: String,
    pub seed: u64,
    pub point: Vec<Assignment>,
    pub samples_per_size: u64,
    pub attempts: u64,
    pub escalations: u64,
    pub rows: Vec<UniformityRowOut>,
    pub timing: Timing,
}

impl UniformityReport {
    pub fn text(&self) -> String {
        let mut s = format!("class {}  seed {}  point {}\n", self.class, self.seed, point_text(&self.point));
        let _ = writeln!(s, "{:>5} {:>10} {:>10} {:>12} {:>6} {:>10}", "size", "#", "samples", "chi2", "df", "p");
        for r in &self.rows {
            let _ = writeln!(s, "{:>5} {:>10} {:>10} {:>12.4} {:>6} {:>10.4}", r.size, r.structures, r.samples, r.chi_square, r.df, r.p_value);
        }
        let _ = writeln!(s, "attempts {}  escalations {}", self.attempts, self.escalations);
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchTiming {
    pub mean_speedup: f64,
    pub ci95: [f64; 2],
    pub block_speedups: Vec<f64>,
    pub baseline_ns_per_attempt: f64,
    pub early_ns_per_attempt: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub command: &'static str,
    pub class: String,
    pub seed: u64,
    pub point: Vec<Assignment>,
    pub window: Vec<Bound>,
    pub attempts: u64,
    pub blocks: usize,
    pub mismatches: u64,
    pub accepted: u64,
    pub early_aborts: u64,
    pub timing: BenchTiming,
}

impl BenchReport {
    pub fn text(&self) -> String {
        let mut s = format!("class {}  seed {}  point {}  window {}\n", self.class, self.seed, point_text(&self.point), window_text(&self.window));
        let _ = writeln!(
            s,
            "attempts {}  accepted {}  early aborts {}  mismatches {}",
            self.attempts, self.accepted, self.early_aborts, self.mismatches
        );
        let t = &self.timing;
        let _ = writeln!(
            s,
            "speedup {:.3} (95% CI {:.3}-{:.3})  baseline {:.1} ns/attempt  early {:.1} ns/attempt",
            t.mean_speedup, t.ci95[0], t.ci95[1], t.baseline_ns_per_attempt, t.early_ns_per_attempt
        );
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReplayReport {
    pub command: &'static str,
    pub verified: usize,
    pub samples: Vec<SampleItem>,
}

impl ReplayReport {
    pub fn text(&self) -> String {
        let mut s = String::new();
        for item in &self.samples {
            let object = match &item.object {
                Value::String(t) => t.clone(),
                v => v.to_string(),
            };
            let _ = writeln!(s, "{object}  size {:?}", item.size);
        }
        let _ = writeln!(s, "verified {}", self.verified);
        s
    }
}

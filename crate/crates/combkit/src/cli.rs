//! The `combkit` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use combkit_core::grammar::ParseError;
use combkit_core::interval::Ratio;
use combkit_core::oracle::{eval_system, OracleConfig, OracleError, Point};
use combkit_core::sampler::{build, verify_trace, window_feasible, CompiledSampler, SampleError, SamplerConfig, TermBuilder, TreeBuilder, Window};
use combkit_core::series::{counting_sequence, counting_table};
use combkit_core::system::{ClassId, NodeId};
use combkit_core::tuner::{tune, TuneConfig, TuneError};
use serde::Serialize;
use serde_json::Value;

use crate::batch::Batch;
use crate::harness::{bench_rejection, uniformity, BenchConfig, HarnessError, UniformityConfig};
use crate::report::*;
use crate::spec::{inline_sources, load, parse_assignment, parse_range, parse_sources, read_sources, LoadedSpec, SpecError};
use crate::trace_io::{TraceFile, TraceIoError};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SPEC: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "combkit", version, about = "Exact counting and uniform random sampling of combinatorial classes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Inline specification; equations separated by `;` or newlines.
    #[arg(short = 's', long)]
    pub spec: Option<String>,
    /// Specification file, one equation per line, `#` comments.
    #[arg(short = 'f', long)]
    pub spec_file: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    #[command(flatten)]
    pub source: Source,
    /// Class to operate on; defaults to the first equation's class.
    #[arg(long)]
    pub class: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct Sampling {
    /// Master seed; drawn from the OS when absent and always echoed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Initial sampler precision in bits.
    #[arg(long, env = "COMBKIT_PRECISION", default_value_t = 53)]
    pub precision: u32,
    #[arg(long)]
    pub no_early_rejection: bool,
    /// Emit JSON trees instead of term strings.
    #[arg(long)]
    pub tree: bool,
    /// Give up after this many attempts.
    #[arg(long)]
    pub max_attempts: Option<u64>,
}

fn ratio(s: &str) -> Result<Ratio, String> {
    s.parse().map_err(|e: combkit_core::interval::RatioParseError| e.to_string())
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a specification and print size bounds.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Exact coefficients up to order `--terms`.
    Count {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        terms: u32,
    },
    /// Certified enclosures of every generating function at a point.
    #[command(name = "oracle-eval", alias = "oracle")]
    OracleEval {
        #[command(flatten)]
        common: Common,
        #[arg(long = "point", value_parser = parse_assignment, required = true)]
        point: Vec<(String, Ratio)>,
        #[arg(long, env = "COMBKIT_PRECISION", default_value_t = 53)]
        precision: u32,
    },
    /// Find the point whose expected size matches the targets.
    Tune {
        #[command(flatten)]
        common: Common,
        #[arg(long = "target", value_parser = parse_assignment, required = true)]
        target: Vec<(String, Ratio)>,
        #[arg(long, value_parser = ratio)]
        tolerance: Option<Ratio>,
        /// Also draw this many objects at the tuned point.
        #[arg(long = "sample")]
        sample: Option<usize>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Draw objects at a point or at a tuned target.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long = "point", value_parser = parse_assignment, conflicts_with = "target")]
        point: Vec<(String, Ratio)>,
        #[arg(long = "target", value_parser = parse_assignment)]
        target: Vec<(String, Ratio)>,
        #[arg(long, value_parser = ratio)]
        tolerance: Option<Ratio>,
        #[arg(short = 'n', default_value_t = 1)]
        n: usize,
        /// Explicit size window `a..b` of a univariate class.
        #[arg(long, value_parser = parse_range)]
        sizes: Option<(u64, Option<u64>)>,
        /// Write accepted traces to this file.
        #[arg(long)]
        traces: Option<PathBuf>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Chi-square test of conditioned uniformity per size.
    Uniformity {
        #[command(flatten)]
        common: Common,
        #[arg(long = "point", value_parser = parse_assignment)]
        point: Vec<(String, Ratio)>,
        #[arg(long, value_parser = parse_range, default_value = "3..7")]
        sizes: (u64, Option<u64>),
        /// Conditioned samples per size.
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Paired timing of early rejection against the baseline sampler.
    BenchRejection {
        #[command(flatten)]
        common: Common,
        #[arg(long = "point", value_parser = parse_assignment, required = true)]
        point: Vec<(String, Ratio)>,
        #[arg(long, value_parser = parse_range, default_value = "40..60")]
        sizes: (u64, Option<u64>),
        /// Total attempts, split into blocks.
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value_t = 20)]
        blocks: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "COMBKIT_PRECISION", default_value_t = 53)]
        precision: u32,
    },
    /// Verify and rebuild objects from a trace file.
    Replay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        tree: bool,
    },
}

/// An error with its exit code and structured diagnostics.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    pub diagnostics: Vec<Diagnostic>,
}

impl Failure {
    fn new(code: i32, message: impl ToString) -> Self {
        Failure { code, message: message.to_string(), diagnostics: Vec::new() }
    }

    fn diagnostic(mut self, code: &str, node: Option<NodeId>, position: Option<String>) -> Self {
        let message = self.message.clone();
        self.diagnostics.push(Diagnostic { code: code.into(), message, node: node.map(|n| n.0), position });
        self
    }
}

fn parse_code(e: &ParseError) -> &'static str {
    match e {
        ParseError::Syntax { .. } => "Syntax",
        ParseError::EmptyAlternative { .. } => "EmptyAlternative",
        ParseError::DuplicateDefinition { .. } => "DuplicateDefinition",
        ParseError::ReservedName { .. } => "ReservedName",
        ParseError::NoEquations => "NoEquations",
    }
}

impl From<SpecError> for Failure {
    fn from(e: SpecError) -> Self {
        match &e {
            SpecError::Parse(p) => Failure::new(EXIT_SPEC, &e).diagnostic(parse_code(p), None, p.position().map(ToString::to_string)),
            SpecError::Invalid(r) => Failure { code: EXIT_SPEC, message: e.to_string(), diagnostics: diagnostics(r) },
            SpecError::Io { .. } => Failure::new(EXIT_SPEC, &e).diagnostic("Io", None, None),
            SpecError::UnknownClass(_) => Failure::new(EXIT_USAGE, &e).diagnostic("UnknownClass", None, None),
        }
    }
}

fn oracle_code(e: &OracleError) -> (i32, &'static str, Option<NodeId>) {
    match e {
        OracleError::Divergent { .. } => (EXIT_NUMERIC, "Divergent", None),
        OracleError::SeqOperandAtOne { node } => (EXIT_NUMERIC, "SeqOperandAtOne", Some(*node)),
        OracleError::ContractionFailed { .. } => (EXIT_NUMERIC, "ContractionFailed", None),
        OracleError::SingularJacobian { .. } => (EXIT_NUMERIC, "SingularJacobian", None),
        OracleError::InvalidPoint(_) => (EXIT_USAGE, "InvalidPoint", None),
        OracleError::PrecisionTooLow(_) => (EXIT_USAGE, "PrecisionTooLow", None),
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        let (code, name, node) = oracle_code(&e);
        Failure::new(code, &e).diagnostic(name, node, None)
    }
}

impl From<TuneError> for Failure {
    fn from(e: TuneError) -> Self {
        match &e {
            TuneError::Oracle(o) => o.clone().into(),
            TuneError::Infeasible { .. } => Failure::new(EXIT_NUMERIC, &e).diagnostic("Infeasible", None, None),
            TuneError::NoConvergence { .. } => Failure::new(EXIT_NUMERIC, &e).diagnostic("NoConvergence", None, None),
            TuneError::UnknownClass(_) => Failure::new(EXIT_USAGE, &e).diagnostic("UnknownClass", None, None),
            TuneError::UnknownVariable(_) => Failure::new(EXIT_USAGE, &e).diagnostic("UnknownVariable", None, None),
            TuneError::InvalidTarget(_) => Failure::new(EXIT_USAGE, &e).diagnostic("InvalidTarget", None, None),
        }
    }
}

impl From<SampleError> for Failure {
    fn from(e: SampleError) -> Self {
        let name = match &e {
            SampleError::Oracle(o) => return o.clone().into(),
            SampleError::Tune(t) => return t.clone().into(),
            SampleError::UnknownClass(_) => return Failure::new(EXIT_USAGE, &e).diagnostic("UnknownClass", None, None),
            SampleError::Entropy(_) => "EntropyExhausted",
            SampleError::PrecisionCeiling { .. } => "PrecisionCeiling",
            SampleError::ReplayMismatch { node, .. } => return Failure::new(EXIT_NUMERIC, &e).diagnostic("ReplayMismatch", Some(*node), None),
            SampleError::WindowEmpty => "WindowEmpty",
            SampleError::AttemptLimit { .. } => "AttemptLimit",
            SampleError::Builder { node, .. } => return Failure::new(EXIT_NUMERIC, &e).diagnostic("Builder", Some(*node), None),
        };
        Failure::new(EXIT_NUMERIC, &e).diagnostic(name, None, None)
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Sample(s) => s.into(),
            HarnessError::Tune(t) => t.into(),
            HarnessError::Series(s) => Failure::new(EXIT_NUMERIC, &s).diagnostic("Series", None, None),
            HarnessError::TooFewCategories { .. } => Failure::new(EXIT_USAGE, &e).diagnostic("TooFewCategories", None, None),
            HarnessError::Multivariate => Failure::new(EXIT_USAGE, &e).diagnostic("Multivariate", None, None),
            HarnessError::UnknownClass(_) => Failure::new(EXIT_USAGE, &e).diagnostic("UnknownClass", None, None),
            HarnessError::Ambiguous { .. } => Failure::new(EXIT_NUMERIC, &e).diagnostic("Ambiguous", None, None),
            HarnessError::AttemptLimit { .. } => Failure::new(EXIT_NUMERIC, &e).diagnostic("AttemptLimit", None, None),
        }
    }
}

impl From<TraceIoError> for Failure {
    fn from(e: TraceIoError) -> Self {
        Failure::new(EXIT_USAGE, &e).diagnostic("Trace", None, None)
    }
}

fn sources(s: &Source) -> Result<Vec<combkit_core::EquationSource>, Failure> {
    match (&s.spec, &s.spec_file) {
        (Some(text), _) => Ok(inline_sources(text)),
        (None, Some(path)) => Ok(read_sources(path)?),
        (None, None) => Err(Failure::new(EXIT_USAGE, "no specification given")),
    }
}

fn load_spec(c: &Common) -> Result<(LoadedSpec, String), Failure> {
    let spec = load(&sources(&c.source)?)?;
    let class = spec.class_name(c.class.as_deref())?.to_string();
    Ok((spec, class))
}

fn point_of(spec: &LoadedSpec, values: &[(String, Ratio)]) -> Result<Point, Failure> {
    Ok(Point::new(&spec.gfs, values)?)
}

fn class_id(spec: &LoadedSpec, class: &str) -> ClassId {
    spec.gfs.class_id(class).expect("class was resolved")
}

fn named_expected(spec: &LoadedSpec, expected: &[combkit_core::interval::Interval], digits: u32) -> Vec<NamedEnclosure> {
    spec.gfs
        .variables()
        .iter()
        .zip(expected)
        .map(|(v, e)| {
            let e = Enclosure::new(e, digits);
            NamedEnclosure { name: v.clone(), lo: e.lo, hi: e.hi }
        })
        .collect()
}

fn targets_text(t: &[(String, Ratio)]) -> Vec<Assignment> {
    t.iter().map(|(v, x)| Assignment { variable: v.clone(), value: x.to_string() }).collect()
}

fn target_window(spec: &LoadedSpec, target: &[(String, Ratio)], tolerance: &Ratio) -> Window {
    let mut t = vec![None; spec.gfs.variables().len()];
    for (name, v) in target {
        if let Some(i) = spec.gfs.variable_index(name) {
            t[i] = Some(v.clone());
        }
    }
    Window::from_targets(&t, tolerance)
}

fn objects(spec: &LoadedSpec, traces: &[combkit_core::sampler::ChoiceTrace], tree: bool) -> Result<Vec<SampleItem>, Failure> {
    traces
        .iter()
        .map(|t| {
            let object = if tree {
                term_json(&build(&spec.gfs, t, &mut TreeBuilder).map_err(|_| Failure::new(EXIT_NUMERIC, "malformed trace"))?)
            } else {
                Value::String(build(&spec.gfs, t, &mut TermBuilder).map_err(|_| Failure::new(EXIT_NUMERIC, "malformed trace"))?)
            };
            Ok(SampleItem { object, size: t.size.as_slice().to_vec() })
        })
        .collect()
}

struct Draw<'a> {
    spec: &'a LoadedSpec,
    class: &'a str,
    point: Point,
    expected: Option<Vec<NamedEnclosure>>,
    window: Option<Window>,
    n: usize,
    sampling: &'a Sampling,
    traces: Option<&'a PathBuf>,
}

fn draw(d: Draw<'_>) -> Result<SampleReport, Failure> {
    let start = Instant::now();
    let seed = d.sampling.seed.unwrap_or_else(rand::random);
    let class = class_id(d.spec, d.class);
    if let Some(w) = &d.window {
        if !window_feasible(&d.spec.gfs, class, w) {
            return Err(SampleError::WindowEmpty.into());
        }
    }
    let config = SamplerConfig { precision: d.sampling.precision, early_rejection: !d.sampling.no_early_rejection, ..SamplerConfig::default() };
    let base = Arc::new(CompiledSampler::compile(d.spec.gfs.clone(), &d.point, config.precision)?);
    let batch = Batch { base, config: config.clone(), class, window: d.window.clone(), seed };
    let (traces, stats) = batch.collect_accepted(d.n, d.sampling.max_attempts)?;
    if let Some(path) = d.traces {
        let files: Vec<TraceFile> = traces.iter().map(|t| TraceFile::new(&d.spec.gfs, &d.point, t)).collect();
        let text = serde_json::to_string_pretty(&files).expect("traces serialize");
        fs::write(path, text + "\n").map_err(|e| Failure::new(EXIT_USAGE, format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(SampleReport {
        command: "sample",
        class: d.class.into(),
        seed,
        point: assignments(&d.spec.gfs, &d.point),
        expected: d.expected,
        window: d.window.as_ref().map(|w| window_bounds(&d.spec.gfs, w)),
        precision: config.precision,
        early_rejection: config.early_rejection,
        samples: objects(d.spec, &traces, d.sampling.tree)?,
        counters: (&stats).into(),
        timing: Timing { seconds: start.elapsed().as_secs_f64() },
    })
}

fn univariate_window(spec: &LoadedSpec, sizes: (u64, Option<u64>)) -> Result<Window, Failure> {
    if spec.gfs.variables().len() != 1 {
        return Err(Failure::new(EXIT_USAGE, "--sizes needs a univariate class").diagnostic("Multivariate", None, None));
    }
    Ok(Window::new(&[sizes.0], &[sizes.1]))
}

fn emit<T: Serialize>(format: Format, report: &T, text: impl FnOnce(&T) -> String) -> String {
    match format {
        Format::Text => text(report),
        Format::Json => serde_json::to_string_pretty(report).expect("reports serialize") + "\n",
    }
}

fn validate(common: &Common) -> Result<(String, i32), Failure> {
    let system = parse_sources(&sources(&common.source)?)?;
    let report = system.validate();
    let min = system.min_sizes();
    let max = system.max_sizes();
    let classes = system
        .equations()
        .iter()
        .enumerate()
        .map(|(i, eq)| ClassInfo {
            name: eq.name.clone(),
            equation: eq.to_string(),
            min_size: min[i].as_ref().map(|m| m.as_slice().to_vec()),
            max_size: min[i].is_some().then(|| max[i].to_vec()),
        })
        .collect();
    let out = ValidateReport {
        command: "validate",
        valid: report.is_ok(),
        variables: system.variables().to_vec(),
        classes,
        diagnostics: diagnostics(&report),
    };
    let code = if out.valid { 0 } else { EXIT_SPEC };
    Ok((emit(common.format, &out, ValidateReport::text), code))
}

fn execute(command: &Command) -> Result<(String, i32), Failure> {
    let out = match command {
        Command::Validate { common } => return validate(common),
        Command::Count { common, terms } => {
            let (spec, class) = load_spec(common)?;
            let vars = spec.gfs.variables().to_vec();
            let numeric = |e: combkit_core::series::SeriesError| Failure::new(EXIT_NUMERIC, e).diagnostic("Series", None, None);
            let report = if vars.len() <= 1 {
                let c = counting_sequence(&spec.gfs, &class, *terms).map_err(numeric)?;
                CountReport { command: "count", class, variables: vars, terms: *terms, coefficients: Some(c.iter().map(ToString::to_string).collect()), table: None }
            } else {
                let bounds = vec![*terms; vars.len()];
                let t = counting_table(&spec.gfs, &class, &bounds).map_err(numeric)?;
                let table = t.nonzero().map(|(e, v)| Coefficient { exponents: e.to_vec(), value: v.to_string() }).collect();
                CountReport { command: "count", class, variables: vars, terms: *terms, coefficients: None, table: Some(table) }
            };
            emit(common.format, &report, CountReport::text)
        }
        Command::OracleEval { common, point, precision } => {
            let (spec, _) = load_spec(common)?;
            let p = point_of(&spec, point)?;
            let values = eval_system(&spec.gfs, &p, &OracleConfig::new(*precision))?;
            let digits = digits_for(*precision);
            let classes = spec
                .gfs
                .class_names()
                .iter()
                .zip(&values.classes)
                .map(|(name, i)| {
                    let e = Enclosure::new(i, digits);
                    NamedEnclosure { name: name.clone(), lo: e.lo, hi: e.hi }
                })
                .collect();
            let nodes = values
                .nodes
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let e = Enclosure::new(v, digits);
                    NodeEnclosure { node: i as u32, lo: e.lo, hi: e.hi }
                })
                .collect();
            let report = OracleReport { command: "oracle-eval", point: assignments(&spec.gfs, &p), precision: values.precision, classes, nodes };
            emit(common.format, &report, OracleReport::text)
        }
        Command::Tune { common, target, tolerance, sample, sampling } => {
            let (spec, class) = load_spec(common)?;
            let cfg = TuneConfig::default();
            let tuned = tune(&spec.gfs, &class, target, &cfg)?;
            let digits = digits_for(cfg.precision);
            let expected = named_expected(&spec, &tuned.expected, digits);
            let sample = match sample {
                Some(n) => Some(draw(Draw {
                    spec: &spec,
                    class: &class,
                    point: tuned.point.clone(),
                    expected: None,
                    window: tolerance.as_ref().map(|t| target_window(&spec, target, t)),
                    n: *n,
                    sampling,
                    traces: None,
                })?),
                None => None,
            };
            let report = TuneReport {
                command: "tune",
                class: class.clone(),
                target: targets_text(target),
                point: assignments(&spec.gfs, &tuned.point),
                expected,
                sample,
            };
            emit(common.format, &report, TuneReport::text)
        }
        Command::Sample { common, point, target, tolerance, n, sizes, traces, sampling } => {
            let (spec, class) = load_spec(common)?;
            let (p, expected, derived) = if !target.is_empty() {
                let cfg = TuneConfig::default();
                let tuned = tune(&spec.gfs, &class, target, &cfg)?;
                let expected = named_expected(&spec, &tuned.expected, digits_for(cfg.precision));
                (tuned.point, Some(expected), tolerance.as_ref().map(|t| target_window(&spec, target, t)))
            } else if !point.is_empty() {
                (point_of(&spec, point)?, None, None)
            } else {
                return Err(Failure::new(EXIT_USAGE, "sample needs --point or --target"));
            };
            let window = match sizes {
                Some(s) => Some(univariate_window(&spec, *s)?),
                None => derived,
            };
            let report = draw(Draw { spec: &spec, class: &class, point: p, expected, window, n: *n, sampling, traces: traces.as_ref() })?;
            emit(common.format, &report, SampleReport::text)
        }
        Command::Uniformity { common, point, sizes, samples, sampling } => {
            let start = Instant::now();
            let (spec, class) = load_spec(common)?;
            let (a, b) = match sizes {
                (a, Some(b)) => (*a, *b),
                (_, None) => return Err(Failure::new(EXIT_USAGE, "uniformity needs a bounded size range")),
            };
            let seed = sampling.seed.unwrap_or_else(rand::random);
            let cfg = UniformityConfig {
                class: class.clone(),
                sizes: (a, b),
                samples: *samples,
                seed,
                point: if point.is_empty() { None } else { Some(point_of(&spec, point)?) },
                sampler: SamplerConfig { precision: sampling.precision, early_rejection: !sampling.no_early_rejection, ..SamplerConfig::default() },
                max_attempts: sampling.max_attempts,
            };
            let u = uniformity(spec.gfs.clone(), &cfg)?;
            let rows = u
                .rows
                .iter()
                .map(|r| UniformityRowOut {
                    size: r.size,
                    structures: r.structures.to_string(),
                    observed: r.observed,
                    samples: r.samples,
                    chi_square: r.chi_square.statistic,
                    df: r.chi_square.df,
                    p_value: r.chi_square.p_value,
                })
                .collect();
            let report = UniformityReport {
                command: "uniformity",
                class,
                seed,
                point: assignments(&spec.gfs, &u.point),
                samples_per_size: *samples,
                attempts: u.attempts,
                escalations: u.escalations,
                rows,
                timing: Timing { seconds: start.elapsed().as_secs_f64() },
            };
            emit(common.format, &report, UniformityReport::text)
        }
        Command::BenchRejection { common, point, sizes, samples, blocks, seed, precision } => {
            let (spec, class) = load_spec(common)?;
            let window = univariate_window(&spec, *sizes)?;
            let seed = seed.unwrap_or_else(rand::random);
            let blocks = (*blocks).max(1);
            let cfg = BenchConfig {
                class: class.clone(),
                point: point_of(&spec, point)?,
                window: window.clone(),
                blocks,
                block_size: samples.div_ceil(blocks as u64).max(1),
                seed,
                precision: *precision,
            };
            let b = bench_rejection(spec.gfs.clone(), &cfg)?;
            let report = BenchReport {
                command: "bench-rejection",
                class,
                seed,
                point: assignments(&spec.gfs, &cfg.point),
                window: window_bounds(&spec.gfs, &window),
                attempts: b.attempts,
                blocks,
                mismatches: b.mismatches,
                accepted: b.accepted,
                early_aborts: b.early_aborts,
                timing: BenchTiming {
                    mean_speedup: b.mean_speedup,
                    ci95: [b.ci95.0, b.ci95.1],
                    block_speedups: b.speedups,
                    baseline_ns_per_attempt: b.baseline_ns_per_attempt,
                    early_ns_per_attempt: b.early_ns_per_attempt,
                },
            };
            emit(common.format, &report, BenchReport::text)
        }
        Command::Replay { common, traces, tree } => {
            let (spec, _) = load_spec(common)?;
            let text = fs::read_to_string(traces).map_err(|e| Failure::new(EXIT_USAGE, format!("cannot read {}: {e}", traces.display())))?;
            let files: Vec<TraceFile> = match serde_json::from_str::<Vec<Value>>(&text) {
                Ok(items) => items.iter().map(|v| TraceFile::from_json(&v.to_string())).collect::<Result<_, _>>()?,
                Err(_) => vec![TraceFile::from_json(&text)?],
            };
            let mut decoded = Vec::with_capacity(files.len());
            for f in &files {
                let trace = f.to_trace(&spec.gfs)?;
                let values: Vec<(String, Ratio)> =
                    f.point.iter().map(|(v, x)| Ok((v.clone(), ratio(x).map_err(|e| Failure::new(EXIT_USAGE, e))?))).collect::<Result<_, Failure>>()?;
                let p = point_of(&spec, &values)?;
                let compiled = CompiledSampler::compile(spec.gfs.clone(), &p, trace.precision)?;
                verify_trace(&compiled, &trace)?;
                decoded.push(trace);
            }
            let report = ReplayReport { command: "replay", verified: decoded.len(), samples: objects(&spec, &decoded, *tree)? };
            emit(common.format, &report, ReplayReport::text)
        }
    };
    Ok((out, 0))
}

fn format_of(command: &Command) -> Format {
    match command {
        Command::Validate { common }
        | Command::Count { common, .. }
        | Command::OracleEval { common, .. }
        | Command::Tune { common, .. }
        | Command::Sample { common, .. }
        | Command::Uniformity { common, .. }
        | Command::BenchRejection { common, .. }
        | Command::Replay { common, .. } => common.format,
    }
}

/// Runs the command line, writing reports to `out` and diagnostics to
/// `err`; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let format = format_of(&cli.command);
    match execute(&cli.command) {
        Ok((s, code)) => {
            let _ = out.write_all(s.as_bytes());
            if code != 0 {
                let _ = err.write_all(b"error: specification is invalid\n");
            }
            code
        }
        Err(f) => {
            let report = ErrorReport { error: f.message, exit_code: f.code, diagnostics: f.diagnostics };
            let text = match format {
                Format::Json => serde_json::to_string(&report).expect("reports serialize") + "\n",
                Format::Text => report.text(),
            };
            let _ = err.write_all(text.as_bytes());
            f.code
        }
    }
}

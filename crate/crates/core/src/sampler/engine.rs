//! Compiled samplers, the precision ladder and the iterative attempt loop.

use alloc::sync::Arc;
use alloc::vec::Vec;

use rand_core::RngCore;
use smallvec::SmallVec;

use super::random::{EntropyExhausted, RandomReal};
use super::table::{ChoiceTable, Decision};
use crate::gf::{GfNode, GfSystem};
use crate::interval::{Precision, Ratio};
use crate::oracle::{self, NodeValues, OracleConfig, OracleError, Point};
use crate::system::{ClassId, NodeId, SizeVector};

/// Lowest precision the oracle runs at; tables may use fewer bits.
const ORACLE_MIN_PRECISION: Precision = 24;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SampleError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Entropy(#[from] EntropyExhausted),
    #[error("precision would exceed the {ceiling}-bit ceiling")]
    PrecisionCeiling { ceiling: Precision },
    #[error("decision {index} at node {node} changed outcome after escalation")]
    ReplayMismatch { index: usize, node: NodeId },
    #[error("unknown class `{0}`")]
    UnknownClass(alloc::string::String),
    #[error("no object size fits the window")]
    WindowEmpty,
    #[error(transparent)]
    Tune(#[from] crate::tuner::TuneError),
    #[error("no sample accepted after {attempts} attempts")]
    AttemptLimit { attempts: u64 },
    #[error("builder failed at node {node} (trace position {position}): {message}")]
    Builder { node: NodeId, position: usize, message: alloc::string::String },
}

#[derive(Clone, Debug)]
pub struct SamplerConfig {
    /// Initial table precision in bits.
    pub precision: Precision,
    /// Escalation stops with an error beyond this precision.
    pub ceiling: Precision,
    pub early_rejection: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { precision: 53, ceiling: 16384, early_rejection: true }
    }
}

/// Inclusive per-variable size window; `hi = None` is unbounded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Window {
    pub lo: SmallVec<[u64; 2]>,
    pub hi: SmallVec<[Option<u64>; 2]>,
}

impl Window {
    pub fn new(lo: &[u64], hi: &[Option<u64>]) -> Self {
        Window { lo: SmallVec::from_slice(lo), hi: SmallVec::from_slice(hi) }
    }

    pub fn unbounded(vars: usize) -> Self {
        Window { lo: SmallVec::from_elem(0, vars), hi: SmallVec::from_elem(None, vars) }
    }

    pub fn exact(size: &[u64]) -> Self {
        Window { lo: SmallVec::from_slice(size), hi: size.iter().map(|s| Some(*s)).collect() }
    }

    /// `[ceil(n(1-ε)), floor(n(1+ε))]` for each targeted variable; others
    /// are unconstrained.
    pub fn from_targets(targets: &[Option<Ratio>], tolerance: &Ratio) -> Self {
        let mut w = Window::unbounded(targets.len());
        let one_minus = ratio_one_minus(tolerance);
        let one_plus = ratio_one_plus(tolerance);
        for (v, t) in targets.iter().enumerate() {
            if let Some(t) = t {
                w.lo[v] = one_minus.as_ref().map(|m| t.mul(m).ceil()).map(|b| u64::try_from(b).unwrap_or(u64::MAX)).unwrap_or(0);
                w.hi[v] = Some(u64::try_from(t.mul(&one_plus).floor()).unwrap_or(u64::MAX));
            }
        }
        w
    }

    pub fn contains(&self, size: &[u64]) -> bool {
        size.iter().enumerate().all(|(v, s)| *s >= self.lo[v] && self.hi[v].is_none_or(|h| *s <= h))
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| h.is_some_and(|h| *l > h))
    }
}

fn ratio_one_minus(t: &Ratio) -> Option<Ratio> {
    // 1 - t, or None when t ≥ 1 (the lower end is then 0).
    let (n, d) = (t.numer(), t.denom());
    (n < d).then(|| Ratio::new(d - n, d.clone()).expect("nonzero denominator"))
}

fn ratio_one_plus(t: &Ratio) -> Ratio {
    Ratio::new(t.denom() + t.numer(), t.denom().clone()).expect("nonzero denominator")
}

#[derive(Clone, Debug)]
enum Step {
    Atom(usize),
    Ref(NodeId),
    Choice { children: Arc<[NodeId]> },
    Product { children: Arc<[NodeId]> },
    Seq { child: NodeId },
    Empty,
}

/// Precision-independent execution plan shared by every ladder level.
#[derive(Debug)]
pub(crate) struct Plan {
    vars: usize,
    steps: Vec<Step>,
    atom_sizes: Vec<SizeVector>,
    /// Flattened `[node][var]` minimum sizes.
    min: Vec<u64>,
    /// Flattened `[node][var]` maximum sizes, `u64::MAX` when unbounded.
    max: Vec<u64>,
}

impl Plan {
    fn new(gfs: &GfSystem) -> Self {
        let vars = gfs.variables().len();
        let mut atom_sizes = Vec::new();
        let mut min = Vec::with_capacity(gfs.nodes().len() * vars);
        let mut max = Vec::with_capacity(gfs.nodes().len() * vars);
        let steps = gfs
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let b = gfs.bounds(NodeId(i as u32));
                min.extend_from_slice(b.min.as_slice());
                max.extend(b.max.iter().map(|m| m.unwrap_or(u64::MAX)));
                match n {
                    GfNode::Zero => Step::Empty,
                    GfNode::Monomial { size, .. } => {
                        atom_sizes.push(size.clone());
                        Step::Atom(atom_sizes.len() - 1)
                    }
                    GfNode::Class(c) => Step::Ref(gfs.root(*c)),
                    GfNode::Sum(cs) => Step::Choice { children: cs.as_slice().into() },
                    GfNode::Product(cs) => Step::Product { children: cs.as_slice().into() },
                    GfNode::QuasiInverse(c) => Step::Seq { child: *c },
                }
            })
            .collect();
        Plan { vars, steps, atom_sizes, min, max }
    }
}

/// Choice tables for every union and sequence node at one precision.
#[derive(Debug)]
pub struct CompiledSampler {
    gfs: Arc<GfSystem>,
    plan: Arc<Plan>,
    point: Point,
    precision: Precision,
    values: NodeValues,
    tables: Vec<Option<ChoiceTable>>,
}

impl CompiledSampler {
    pub fn compile(gfs: Arc<GfSystem>, point: &Point, precision: Precision) -> Result<Self, OracleError> {
        let plan = Arc::new(Plan::new(&gfs));
        Self::compile_with(gfs, plan, point, precision, None)
    }

    /// Recompiles at a higher precision, intersecting node enclosures with
    /// this level's so that cumulative bounds only tighten.
    pub fn refine(&self, precision: Precision) -> Result<Self, OracleError> {
        Self::compile_with(self.gfs.clone(), self.plan.clone(), &self.point, precision, Some(&self.values))
    }

    fn compile_with(
        gfs: Arc<GfSystem>,
        plan: Arc<Plan>,
        point: &Point,
        precision: Precision,
        prev: Option<&NodeValues>,
    ) -> Result<Self, OracleError> {
        let cfg = OracleConfig::new(precision.max(ORACLE_MIN_PRECISION));
        let mut values = oracle::eval_system(&gfs, point, &cfg)?;
        if let Some(prev) = prev {
            for (v, p) in values.nodes.iter_mut().zip(&prev.nodes) {
                if let Some(t) = v.intersect(p) {
                    *v = t;
                }
            }
        }
        let tables = gfs
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| match n {
                GfNode::Sum(cs) => {
                    let vals: Vec<_> = cs.iter().map(|c| values.nodes[c.index()].clone()).collect();
                    Some(ChoiceTable::union(NodeId(i as u32), &vals, precision))
                }
                GfNode::QuasiInverse(c) => Some(ChoiceTable::sequence(NodeId(i as u32), &values.nodes[c.index()], precision)),
                _ => None,
            })
            .collect();
        Ok(CompiledSampler { gfs, plan, point: point.clone(), precision, values, tables })
    }

    pub fn system(&self) -> &Arc<GfSystem> {
        &self.gfs
    }

    pub fn point(&self) -> &Point {
        &self.point
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn values(&self) -> &NodeValues {
        &self.values
    }

    pub fn table(&self, node: NodeId) -> Option<&ChoiceTable> {
        self.tables[node.index()].as_ref()
    }
}

/// One recorded random choice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceDecision {
    pub node: NodeId,
    pub outcome: u32,
    pub real: RandomReal,
}

/// Random choices of an accepted attempt, in the order they were drawn.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChoiceTrace {
    pub class: ClassId,
    pub decisions: Vec<TraceDecision>,
    pub size: SizeVector,
    /// Highest table precision used by this attempt.
    pub precision: Precision,
}

impl ChoiceTrace {
    pub fn outcomes(&self) -> impl Iterator<Item = u32> + '_ {
        self.decisions.iter().map(|d| d.outcome)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RejectReason {
    Oversize,
    Undersize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rejection {
    pub reason: RejectReason,
    /// Whether size bounds of pending work, not committed atoms alone,
    /// triggered the rejection.
    pub early: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Attempt {
    Accepted(ChoiceTrace),
    Rejected(Rejection),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SampleStats {
    pub attempts: u64,
    pub accepted: u64,
    pub early_aborts: u64,
    pub rejections: u64,
    pub escalations: u64,
    pub max_precision: Precision,
}

impl SampleStats {
    pub fn merge(&mut self, other: &SampleStats) {
        self.attempts += other.attempts;
        self.accepted += other.accepted;
        self.early_aborts += other.early_aborts;
        self.rejections += other.rejections;
        self.escalations += other.escalations;
        self.max_precision = self.max_precision.max(other.max_precision);
    }
}

/// A sampling session: the base level, lazily built escalation levels,
/// counters and reusable buffers. Cheap to create from a shared base.
pub struct Sampler {
    levels: Vec<Arc<CompiledSampler>>,
    config: SamplerConfig,
    stats: SampleStats,
    stack: Vec<NodeId>,
    committed: Vec<u64>,
    pending_min: Vec<u64>,
    pending_max: Vec<u64>,
    pending_inf: Vec<u32>,
}

impl Sampler {
    pub fn new(gfs: Arc<GfSystem>, point: &Point, config: SamplerConfig) -> Result<Self, SampleError> {
        let base = Arc::new(CompiledSampler::compile(gfs, point, config.precision)?);
        Ok(Sampler::from_compiled(base, config))
    }

    pub fn from_compiled(base: Arc<CompiledSampler>, config: SamplerConfig) -> Self {
        let vars = base.plan.vars;
        let stats = SampleStats { max_precision: base.precision, ..SampleStats::default() };
        Sampler {
            levels: alloc::vec![base],
            config,
            stats,
            stack: Vec::new(),
            committed: alloc::vec![0; vars],
            pending_min: alloc::vec![0; vars],
            pending_max: alloc::vec![0; vars],
            pending_inf: alloc::vec![0; vars],
        }
    }

    pub fn base(&self) -> &Arc<CompiledSampler> {
        &self.levels[0]
    }

    pub fn system(&self) -> &Arc<GfSystem> {
        self.levels[0].system()
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn stats(&self) -> &SampleStats {
        &self.stats
    }

    pub fn reset_stats(&mut self) {
        self.stats = SampleStats { max_precision: self.levels[0].precision, ..SampleStats::default() };
    }

    /// Compiled sampler for escalation step `i` (precision `P·2^i`).
    pub fn level(&mut self, i: usize) -> Result<&Arc<CompiledSampler>, SampleError> {
        while self.levels.len() <= i {
            let last = self.levels.last().expect("base level");
            let next = last.precision.saturating_mul(2);
            if next > self.config.ceiling {
                return Err(SampleError::PrecisionCeiling { ceiling: self.config.ceiling });
            }
            let compiled = Arc::new(last.refine(next)?);
            self.levels.push(compiled);
        }
        Ok(&self.levels[i])
    }

    fn push(&mut self, node: NodeId) {
        let plan = &self.levels[0].plan;
        let base = node.index() * plan.vars;
        for v in 0..plan.vars {
            self.pending_min[v] += plan.min[base + v];
            let m = plan.max[base + v];
            if m == u64::MAX {
                self.pending_inf[v] += 1;
            } else {
                self.pending_max[v] = self.pending_max[v].saturating_add(m);
            }
        }
        self.stack.push(node);
    }

    fn pop(&mut self) -> Option<NodeId> {
        let node = self.stack.pop()?;
        let plan = &self.levels[0].plan;
        let base = node.index() * plan.vars;
        for v in 0..plan.vars {
            self.pending_min[v] -= plan.min[base + v];
            let m = plan.max[base + v];
            if m == u64::MAX {
                self.pending_inf[v] -= 1;
            } else {
                self.pending_max[v] -= m;
            }
        }
        Some(node)
    }

    fn check(&self, window: &Window) -> Option<Rejection> {
        for v in 0..self.committed.len() {
            if let Some(hi) = window.hi[v] {
                if self.committed[v] > hi {
                    return Some(Rejection { reason: RejectReason::Oversize, early: false });
                }
                if self.config.early_rejection && self.committed[v].saturating_add(self.pending_min[v]) > hi {
                    return Some(Rejection { reason: RejectReason::Oversize, early: true });
                }
            }
            if self.config.early_rejection
                && !self.stack.is_empty()
                && self.pending_inf[v] == 0
                && self.committed[v].saturating_add(self.pending_max[v]) < window.lo[v]
            {
                return Some(Rejection { reason: RejectReason::Undersize, early: true });
            }
        }
        None
    }

    /// Draws one object of `class`, recording its choices; rejects when the
    /// size falls outside `window`.
    pub fn attempt<R: RngCore + ?Sized>(
        &mut self,
        class: ClassId,
        window: Option<&Window>,
        rng: &mut R,
    ) -> Result<Attempt, SampleError> {
        self.stats.attempts += 1;
        let result = self.run(class, window, rng);
        match &result {
            Ok(Attempt::Accepted(t)) => {
                self.stats.accepted += 1;
                self.stats.max_precision = self.stats.max_precision.max(t.precision);
            }
            Ok(Attempt::Rejected(r)) if r.early => self.stats.early_aborts += 1,
            Ok(Attempt::Rejected(_)) => self.stats.rejections += 1,
            Err(_) => {}
        }
        result
    }

    fn run<R: RngCore + ?Sized>(&mut self, class: ClassId, window: Option<&Window>, rng: &mut R) -> Result<Attempt, SampleError> {
        self.stack.clear();
        for v in 0..self.committed.len() {
            self.committed[v] = 0;
            self.pending_min[v] = 0;
            self.pending_max[v] = 0;
            self.pending_inf[v] = 0;
        }
        let plan = self.levels[0].plan.clone();
        let root = self.levels[0].gfs.root(class);
        let mut level = 0usize;
        let mut decisions: Vec<TraceDecision> = Vec::new();
        self.push(root);
        while let Some(node) = self.pop() {
            match &plan.steps[node.index()] {
                Step::Atom(a) => {
                    for (c, s) in self.committed.iter_mut().zip(plan.atom_sizes[*a].as_slice()) {
                        *c += s;
                    }
                }
                Step::Ref(r) => self.push(*r),
                Step::Product { children } => {
                    for c in children.iter().rev() {
                        self.push(*c);
                    }
                }
                Step::Choice { children } => {
                    let k = self.decide(node, &mut level, &mut decisions, rng)?;
                    self.push(children[k as usize]);
                }
                Step::Seq { child } => {
                    let k = self.decide(node, &mut level, &mut decisions, rng)?;
                    for _ in 0..k {
                        self.push(*child);
                    }
                }
                Step::Empty => unreachable!("validated systems have no empty nodes"),
            }
            if let Some(w) = window {
                if let Some(r) = self.check(w) {
                    return Ok(Attempt::Rejected(r));
                }
            }
        }
        if let Some(w) = window {
            if !w.contains(&self.committed) {
                let reason = if self.committed.iter().zip(&w.lo).any(|(c, l)| c < l) {
                    RejectReason::Undersize
                } else {
                    RejectReason::Oversize
                };
                return Ok(Attempt::Rejected(Rejection { reason, early: false }));
            }
        }
        let precision = self.levels[level].precision;
        Ok(Attempt::Accepted(ChoiceTrace { class, decisions, size: SizeVector::from_slice(&self.committed), precision }))
    }

    /// Draws a fresh real for `node` and decides it, escalating and
    /// replaying earlier decisions while the outcome is ambiguous.
    fn decide<R: RngCore + ?Sized>(
        &mut self,
        node: NodeId,
        level: &mut usize,
        decisions: &mut Vec<TraceDecision>,
        rng: &mut R,
    ) -> Result<u32, SampleError> {
        let mut real = RandomReal::new();
        loop {
            let compiled = self.levels[*level].clone();
            real.extend_to(compiled.precision, rng)?;
            let table = compiled.tables[node.index()].as_ref().expect("choice node has a table");
            if let Decision::Outcome(k) = table.decide(&real) {
                decisions.push(TraceDecision { node, outcome: k, real });
                return Ok(k);
            }
            *level += 1;
            self.stats.escalations += 1;
            let next = self.level(*level)?.clone();
            replay(&next, decisions, rng)?;
        }
    }
}

/// Re-decides recorded choices at `compiled`'s precision, extending each
/// real as needed; every outcome must be unchanged.
pub fn replay<R: RngCore + ?Sized>(compiled: &CompiledSampler, decisions: &mut [TraceDecision], rng: &mut R) -> Result<(), SampleError> {
    for (index, d) in decisions.iter_mut().enumerate() {
        d.real.extend_to(compiled.precision, rng)?;
        let table = compiled.tables[d.node.index()].as_ref().expect("choice node has a table");
        if table.decide(&d.real) != Decision::Outcome(d.outcome) {
            return Err(SampleError::ReplayMismatch { index, node: d.node });
        }
    }
    Ok(())
}

/// Checks that every recorded decision re-resolves identically at
/// `compiled`'s precision, given reals long enough for it.
pub fn verify_trace(compiled: &CompiledSampler, trace: &ChoiceTrace) -> Result<(), SampleError> {
    for (index, d) in trace.decisions.iter().enumerate() {
        let table = compiled.tables[d.node.index()].as_ref().expect("choice node has a table");
        if d.real.len() < compiled.precision || table.decide(&d.real) != Decision::Outcome(d.outcome) {
            return Err(SampleError::ReplayMismatch { index, node: d.node });
        }
    }
    Ok(())
}

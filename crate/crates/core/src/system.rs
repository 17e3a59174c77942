//! Class systems: the node arena built from parsed equations, well-foundedness
//! checks, per-class size bounds and the symbolic transfer to generating
//! function equations.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use smallvec::SmallVec;

use crate::gf::{GfNode, GfSystem};
use crate::grammar::{Equation, SpecNode};
use crate::series;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ClassId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Multivariate size: one count per system variable, in system order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SizeVector(SmallVec<[u64; 2]>);

impl SizeVector {
    pub fn zeros(vars: usize) -> Self {
        SizeVector(SmallVec::from_elem(0, vars))
    }

    pub fn from_slice(v: &[u64]) -> Self {
        SizeVector(SmallVec::from_slice(v))
    }

    pub fn get(&self, var: usize) -> u64 {
        self.0[var]
    }

    pub fn set(&mut self, var: usize, v: u64) {
        self.0[var] = v;
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn add_assign(&mut self, other: &SizeVector) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a = a.saturating_add(*b);
        }
    }

    /// Component-wise `self ≤ other`.
    pub fn le(&self, other: &SizeVector) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a <= b)
    }

    /// Renders as `{z: 1, u: 0}` with the given variable names.
    pub fn display<'a>(&'a self, vars: &'a [String]) -> impl fmt::Display + 'a {
        DisplaySize { size: self, vars }
    }
}

struct DisplaySize<'a> {
    size: &'a SizeVector,
    vars: &'a [String],
}

impl fmt::Display for DisplaySize<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, n)) in self.vars.iter().zip(self.size.0.iter()).enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}: {n}")?;
        }
        f.write_str("}")
    }
}

/// Per-variable upper size bound; `None` means unbounded.
pub type MaxSize = SmallVec<[Option<u64>; 2]>;

/// Lower and upper bounds on the size of any object derived from a node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SizeBounds {
    pub min: SizeVector,
    pub max: MaxSize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Atom { key: String, size: SizeVector },
    Ref(ClassId),
    /// A name that is neither a defined class nor an implicit atom.
    Unresolved(String),
    Union(Vec<NodeId>),
    Product(Vec<NodeId>),
    Seq(NodeId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub class: ClassId,
    pub kind: NodeKind,
}

/// Named equations over a node arena. Node ids are assigned in equation
/// order, preorder within each tree, so every child id exceeds its parent's.
#[derive(Clone, Debug)]
pub struct ClassSystem {
    equations: Vec<Equation>,
    names: Vec<String>,
    variables: Vec<String>,
    nodes: Vec<Node>,
    roots: Vec<NodeId>,
}

impl ClassSystem {
    pub(crate) fn from_equations(equations: Vec<Equation>) -> Self {
        let names: Vec<String> = equations.iter().map(|e| e.name.clone()).collect();
        let index: BTreeMap<&str, ClassId> =
            names.iter().enumerate().map(|(i, n)| (n.as_str(), ClassId(i as u32))).collect();

        let mut variables: Vec<String> = Vec::new();
        for eq in &equations {
            collect_variables(&eq.body, &mut variables);
        }
        let mut sys = ClassSystem { equations: Vec::new(), names: names.clone(), variables, nodes: Vec::new(), roots: Vec::new() };
        for (i, eq) in equations.iter().enumerate() {
            let root = sys.push_tree(&eq.body, ClassId(i as u32), &index);
            sys.roots.push(root);
        }
        sys.equations = equations;
        sys
    }

    fn push_tree(&mut self, node: &SpecNode, class: ClassId, index: &BTreeMap<&str, ClassId>) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node { class, kind: NodeKind::Unresolved(String::new()) });
        let kind = match node {
            SpecNode::Atom(a) => {
                let mut size = SizeVector::zeros(self.variables.len());
                for (var, n) in &a.size {
                    let v = self.variables.iter().position(|x| x == var).expect("variable collected");
                    size.set(v, *n);
                }
                NodeKind::Atom { key: a.key.clone(), size }
            }
            SpecNode::ClassRef(name) => match index.get(name.as_str()) {
                Some(c) => NodeKind::Ref(*c),
                None => NodeKind::Unresolved(name.clone()),
            },
            SpecNode::Union(children) => {
                NodeKind::Union(children.iter().map(|c| self.push_tree(c, class, index)).collect())
            }
            SpecNode::Product(children) => {
                NodeKind::Product(children.iter().map(|c| self.push_tree(c, class, index)).collect())
            }
            SpecNode::Seq(child) => NodeKind::Seq(self.push_tree(child, class, index)),
        };
        self.nodes[id.index()].kind = kind;
        id
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    pub fn class_names(&self) -> &[String] {
        &self.names
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn root(&self, class: ClassId) -> NodeId {
        self.roots[class.index()]
    }

    pub fn class_count(&self) -> usize {
        self.names.len()
    }

    pub fn class_id(&self, name: &str) -> Option<ClassId> {
        self.names.iter().position(|n| n == name).map(|i| ClassId(i as u32))
    }

    /// Least fixed point of the minimum-size equations; `None` entries are
    /// empty classes. Union minima are taken per variable independently.
    pub fn min_sizes(&self) -> Vec<Option<SizeVector>> {
        let mut class_min: Vec<Option<SizeVector>> = alloc::vec![None; self.class_count()];
        loop {
            let mut changed = false;
            for c in 0..self.class_count() {
                let v = self.node_min(self.roots[c], &class_min);
                if v != class_min[c] {
                    class_min[c] = v;
                    changed = true;
                }
            }
            if !changed {
                return class_min;
            }
        }
    }

    pub(crate) fn node_min(&self, id: NodeId, class_min: &[Option<SizeVector>]) -> Option<SizeVector> {
        match &self.node(id).kind {
            NodeKind::Atom { size, .. } => Some(size.clone()),
            NodeKind::Ref(c) => class_min[c.index()].clone(),
            NodeKind::Unresolved(_) => None,
            NodeKind::Union(children) => {
                let mut best: Option<SizeVector> = None;
                for ch in children {
                    if let Some(m) = self.node_min(*ch, class_min) {
                        best = Some(match best {
                            None => m,
                            Some(mut b) => {
                                for v in 0..b.len() {
                                    b.set(v, b.get(v).min(m.get(v)));
                                }
                                b
                            }
                        });
                    }
                }
                best
            }
            NodeKind::Product(children) => {
                let mut acc = SizeVector::zeros(self.variables.len());
                for ch in children {
                    acc.add_assign(&self.node_min(*ch, class_min)?);
                }
                Some(acc)
            }
            NodeKind::Seq(_) => Some(SizeVector::zeros(self.variables.len())),
        }
    }

    /// Least fixed point of the minimum total size (sum over variables),
    /// which can exceed the sum of the per-variable minima.
    fn min_totals(&self) -> Vec<Option<u64>> {
        let mut class_min: Vec<Option<u64>> = alloc::vec![None; self.class_count()];
        loop {
            let mut changed = false;
            for c in 0..self.class_count() {
                let v = self.node_min_total(self.roots[c], &class_min);
                if v != class_min[c] {
                    class_min[c] = v;
                    changed = true;
                }
            }
            if !changed {
                return class_min;
            }
        }
    }

    fn node_min_total(&self, id: NodeId, class_min: &[Option<u64>]) -> Option<u64> {
        match &self.node(id).kind {
            NodeKind::Atom { size, .. } => Some(size.total()),
            NodeKind::Ref(c) => class_min[c.index()],
            NodeKind::Unresolved(_) => None,
            NodeKind::Union(children) => children.iter().filter_map(|c| self.node_min_total(*c, class_min)).min(),
            NodeKind::Product(children) => {
                children.iter().try_fold(0u64, |acc, c| Some(acc.saturating_add(self.node_min_total(*c, class_min)?)))
            }
            NodeKind::Seq(_) => Some(0),
        }
    }

    pub fn min_size(&self, class: &str) -> Option<SizeVector> {
        let c = self.class_id(class)?;
        self.min_sizes()[c.index()].clone()
    }

    /// Per-class maximum sizes (`None` = unbounded in that variable).
    /// Assumes every class is non-empty.
    pub fn max_sizes(&self) -> Vec<MaxSize> {
        const INF: u64 = u64::MAX;
        let n = self.class_count().max(1);
        let nv = self.variables.len();
        let mut vals: Vec<SmallVec<[u64; 2]>> = alloc::vec![SmallVec::from_elem(0, nv); self.class_count()];
        let round = |vals: &Vec<SmallVec<[u64; 2]>>| -> Vec<SmallVec<[u64; 2]>> {
            (0..self.class_count()).map(|c| self.node_max(self.roots[c], vals)).collect()
        };
        // Longest-path style relaxation: bounded classes settle within n
        // rounds, classes on a size-gaining cycle keep growing.
        for _ in 0..n {
            vals = round(&vals);
        }
        let settled = vals.clone();
        for _ in 0..n {
            vals = round(&vals);
        }
        for c in 0..self.class_count() {
            for v in 0..nv {
                if vals[c][v] > settled[c][v] {
                    vals[c][v] = INF;
                }
            }
        }
        for _ in 0..n + 1 {
            let next = round(&vals);
            if next == vals {
                break;
            }
            vals = next;
        }
        vals.into_iter()
            .map(|v| v.into_iter().map(|x| (x != INF).then_some(x)).collect())
            .collect()
    }

    pub(crate) fn node_max(&self, id: NodeId, vals: &[SmallVec<[u64; 2]>]) -> SmallVec<[u64; 2]> {
        let nv = self.variables.len();
        match &self.node(id).kind {
            NodeKind::Atom { size, .. } => SmallVec::from_slice(size.as_slice()),
            NodeKind::Ref(c) => vals[c.index()].clone(),
            NodeKind::Unresolved(_) => SmallVec::from_elem(0, nv),
            NodeKind::Union(children) => {
                let mut acc: SmallVec<[u64; 2]> = SmallVec::from_elem(0, nv);
                for ch in children {
                    let m = self.node_max(*ch, vals);
                    for v in 0..nv {
                        acc[v] = acc[v].max(m[v]);
                    }
                }
                acc
            }
            NodeKind::Product(children) => {
                let mut acc: SmallVec<[u64; 2]> = SmallVec::from_elem(0, nv);
                for ch in children {
                    let m = self.node_max(*ch, vals);
                    for v in 0..nv {
                        acc[v] = acc[v].saturating_add(m[v]);
                    }
                }
                acc
            }
            NodeKind::Seq(child) => {
                let m = self.node_max(*child, vals);
                m.iter().map(|&x| if x > 0 { u64::MAX } else { 0 }).collect()
            }
        }
    }

    pub fn max_size(&self, class: &str) -> Option<MaxSize> {
        let c = self.class_id(class)?;
        Some(self.max_sizes()[c.index()].clone())
    }

    /// Checks references, emptiness, sequence well-foundedness and
    /// truncated-series stabilization.
    pub fn validate(&self) -> ValidationReport {
        self.validate_with(&StabilityCheck::default())
    }

    pub fn validate_with(&self, check: &StabilityCheck) -> ValidationReport {
        let mut diagnostics = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let NodeKind::Unresolved(name) = &node.kind {
                diagnostics.push(Diagnostic {
                    code: DiagnosticCode::UnresolvedReference,
                    message: alloc::format!("`{name}` is not a defined class (only single lowercase letters are implicit atoms)"),
                    node: Some(NodeId(i as u32)),
                });
            }
        }
        if !diagnostics.is_empty() {
            return ValidationReport { diagnostics };
        }

        let mins = self.min_sizes();
        for (c, m) in mins.iter().enumerate() {
            if m.is_none() {
                diagnostics.push(Diagnostic {
                    code: DiagnosticCode::EmptyClass,
                    message: alloc::format!("class `{}` contains no finite object", self.names[c]),
                    node: Some(self.roots[c]),
                });
            }
        }
        if !diagnostics.is_empty() {
            return ValidationReport { diagnostics };
        }

        let totals = self.min_totals();
        for (i, node) in self.nodes.iter().enumerate() {
            if let NodeKind::Seq(child) = node.kind {
                if self.node_min_total(child, &totals) == Some(0) {
                    diagnostics.push(Diagnostic {
                        code: DiagnosticCode::IllFoundedSequence,
                        message: String::from("sequence operand admits an object of size zero"),
                        node: Some(NodeId(i as u32)),
                    });
                }
            }
        }
        if !diagnostics.is_empty() {
            return ValidationReport { diagnostics };
        }

        let gfs = GfSystem::build_unchecked(self);
        // Zero-size cycles only show up at or above each class's minimum size.
        let bounds: Vec<u32> = (0..self.variables.len())
            .map(|v| {
                let deepest = mins.iter().flatten().map(|m| m.get(v)).max().unwrap_or(0);
                check.order.max(deepest.min(u32::MAX as u64) as u32)
            })
            .collect();
        let budget = check.budget(self.class_count(), &bounds);
        if let Err(iterations) = series::stabilizes(&gfs, &bounds, budget) {
            diagnostics.push(Diagnostic {
                code: DiagnosticCode::NonStabilizing,
                message: alloc::format!(
                    "iteration from the zero series did not stabilize at order {} within {iterations} steps (infinitely many objects of some size)",
                    check.order
                ),
                node: None,
            });
        }
        ValidationReport { diagnostics }
    }
}

fn collect_variables(node: &SpecNode, out: &mut Vec<String>) {
    match node {
        SpecNode::Atom(a) => {
            for var in a.size.keys() {
                if !out.contains(var) {
                    out.push(var.clone());
                }
            }
        }
        SpecNode::ClassRef(_) => {}
        SpecNode::Union(cs) | SpecNode::Product(cs) => cs.iter().for_each(|c| collect_variables(c, out)),
        SpecNode::Seq(c) => collect_variables(c, out),
    }
}

/// Parameters of the truncated-series stabilization check.
#[derive(Clone, Debug)]
pub struct StabilityCheck {
    /// Per-variable truncation order.
    pub order: u32,
    /// Iteration budget; `None` derives one from the system size.
    pub budget: Option<usize>,
}

impl Default for StabilityCheck {
    fn default() -> Self {
        StabilityCheck { order: 8, budget: None }
    }
}

impl StabilityCheck {
    fn budget(&self, classes: usize, bounds: &[u32]) -> usize {
        // Each degree may need one pass per class through zero-size chains.
        let degree: usize = bounds.iter().map(|b| *b as usize).sum();
        self.budget.unwrap_or((classes + 1) * (degree + 1) + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DiagnosticCode {
    UnresolvedReference,
    EmptyClass,
    IllFoundedSequence,
    NonStabilizing,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::UnresolvedReference => "UnresolvedReference",
            DiagnosticCode::EmptyClass => "EmptyClass",
            DiagnosticCode::IllFoundedSequence => "IllFoundedSequence",
            DiagnosticCode::NonStabilizing => "NonStabilizing",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub message: String,
    pub node: Option<NodeId>,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Some(n) => write!(f, "{} at node {}: {}", self.code.as_str(), n, self.message),
            None => write!(f, "{}: {}", self.code.as_str(), self.message),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.diagnostics.is_empty()
    }

    pub fn has(&self, code: DiagnosticCode) -> bool {
        self.diagnostics.iter().any(|d| d.code == code)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("invalid specification: {}", .report.diagnostics.first().map(|d| alloc::format!("{d}")).unwrap_or_default())]
pub struct ValidationError {
    pub report: ValidationReport,
}

/// Validates the system and produces its generating-function equations:
/// atoms become monomials, unions sums, products products, sequences
/// quasi-inverses `1/(1 - A)` and references the class unknowns.
pub fn transfer(system: &ClassSystem) -> Result<GfSystem, ValidationError> {
    let report = system.validate();
    if !report.is_ok() {
        return Err(ValidationError { report });
    }
    let mut gfs = GfSystem::build_unchecked(system);
    gfs.attach_bounds(system);
    Ok(gfs)
}

pub(crate) fn gf_node(kind: &NodeKind) -> GfNode {
    match kind {
        NodeKind::Atom { key, size } => GfNode::Monomial { key: key.clone(), size: size.clone() },
        NodeKind::Ref(c) => GfNode::Class(*c),
        NodeKind::Unresolved(_) => GfNode::Zero,
        NodeKind::Union(cs) => GfNode::Sum(cs.clone()),
        NodeKind::Product(cs) => GfNode::Product(cs.clone()),
        NodeKind::Seq(c) => GfNode::QuasiInverse(*c),
    }
}

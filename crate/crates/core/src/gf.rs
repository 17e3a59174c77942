//! Generating-function equations and a generic evaluator over them.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use smallvec::SmallVec;

use crate::system::{self, ClassId, ClassSystem, MaxSize, NodeId, SizeBounds, SizeVector};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GfNode {
    Zero,
    Monomial { key: String, size: SizeVector },
    Class(ClassId),
    Sum(Vec<NodeId>),
    Product(Vec<NodeId>),
    /// `1 / (1 - child)`.
    QuasiInverse(NodeId),
}

/// `Y_i = H_i(Y, x)` for each class `i`, sharing node ids with the
/// originating [`ClassSystem`].
#[derive(Clone, Debug)]
pub struct GfSystem {
    names: Vec<String>,
    variables: Vec<String>,
    nodes: Vec<GfNode>,
    roots: Vec<NodeId>,
    bounds: Vec<SizeBounds>,
}

/// Operations needed to evaluate generating-function equations.
pub trait Algebra {
    type Elem: Clone;
    type Error;

    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn monomial(&self, size: &SizeVector) -> Self::Elem;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn scale(&self, a: &Self::Elem, k: u64) -> Self::Elem;
    /// `1 / (1 - a)` for the sequence at `node`.
    fn quasi_inverse(&self, node: NodeId, a: &Self::Elem) -> Result<Self::Elem, Self::Error>;
}

impl GfSystem {
    pub(crate) fn build_unchecked(system: &ClassSystem) -> Self {
        let nv = system.variables().len();
        GfSystem {
            names: system.class_names().to_vec(),
            variables: system.variables().to_vec(),
            nodes: system.nodes().iter().map(|n| system::gf_node(&n.kind)).collect(),
            roots: (0..system.class_count()).map(|c| system.root(ClassId(c as u32))).collect(),
            bounds: alloc::vec![
                SizeBounds { min: SizeVector::zeros(nv), max: SmallVec::from_elem(None, nv) };
                system.nodes().len()
            ],
        }
    }

    pub(crate) fn attach_bounds(&mut self, system: &ClassSystem) {
        let mins = system.min_sizes();
        let maxs = system.max_sizes();
        let inf: Vec<SmallVec<[u64; 2]>> = maxs
            .iter()
            .map(|m| m.iter().map(|x| x.unwrap_or(u64::MAX)).collect())
            .collect();
        for i in 0..self.nodes.len() {
            let id = NodeId(i as u32);
            let min = system.node_min(id, &mins).unwrap_or_else(|| SizeVector::zeros(self.variables.len()));
            let max: MaxSize = system.node_max(id, &inf).into_iter().map(|x| (x != u64::MAX).then_some(x)).collect();
            self.bounds[i] = SizeBounds { min, max };
        }
    }

    pub fn class_names(&self) -> &[String] {
        &self.names
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn class_count(&self) -> usize {
        self.names.len()
    }

    pub fn class_id(&self, name: &str) -> Option<ClassId> {
        self.names.iter().position(|n| n == name).map(|i| ClassId(i as u32))
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|n| n == name)
    }

    pub fn nodes(&self) -> &[GfNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &GfNode {
        &self.nodes[id.index()]
    }

    pub fn root(&self, class: ClassId) -> NodeId {
        self.roots[class.index()]
    }

    pub fn bounds(&self, id: NodeId) -> &SizeBounds {
        &self.bounds[id.index()]
    }

    /// Values of every node given the class values.
    pub fn eval_nodes<A: Algebra>(&self, alg: &A, classes: &[A::Elem]) -> Result<Vec<A::Elem>, A::Error> {
        let mut vals: Vec<Option<A::Elem>> = alloc::vec![None; self.nodes.len()];
        // Children always carry larger ids than their parent.
        for i in (0..self.nodes.len()).rev() {
            let get = |id: &NodeId| vals[id.index()].as_ref().expect("child evaluated");
            let v = match &self.nodes[i] {
                GfNode::Zero => alg.zero(),
                GfNode::Monomial { size, .. } => alg.monomial(size),
                GfNode::Class(c) => classes[c.index()].clone(),
                GfNode::Sum(cs) => {
                    let mut acc = get(&cs[0]).clone();
                    for c in &cs[1..] {
                        acc = alg.add(&acc, get(c));
                    }
                    acc
                }
                GfNode::Product(cs) => {
                    let mut acc = get(&cs[0]).clone();
                    for c in &cs[1..] {
                        acc = alg.mul(&acc, get(c));
                    }
                    acc
                }
                GfNode::QuasiInverse(c) => alg.quasi_inverse(NodeId(i as u32), get(c))?,
            };
            vals[i] = Some(v);
        }
        Ok(vals.into_iter().map(|v| v.expect("all nodes evaluated")).collect())
    }

    /// `H(Y)`: the right-hand side of every equation.
    pub fn apply<A: Algebra>(&self, alg: &A, classes: &[A::Elem]) -> Result<Vec<A::Elem>, A::Error> {
        let vals = self.eval_nodes(alg, classes)?;
        Ok(self.roots.iter().map(|r| vals[r.index()].clone()).collect())
    }

    /// Renders class `c`'s equation, e.g. `B = z + z*B*B`.
    pub fn equation_text(&self, c: ClassId) -> String {
        let mut s = String::new();
        let _ = write!(s, "{} = ", self.names[c.index()]);
        self.write_node(&mut s, self.roots[c.index()], 0);
        s
    }

    fn write_node(&self, s: &mut String, id: NodeId, ctx: u8) {
        match &self.nodes[id.index()] {
            GfNode::Zero => s.push('0'),
            GfNode::Monomial { size, .. } => {
                let mut first = true;
                for (v, n) in size.as_slice().iter().enumerate() {
                    if *n == 0 {
                        continue;
                    }
                    if !first {
                        s.push('*');
                    }
                    first = false;
                    s.push_str(&self.variables[v]);
                    if *n > 1 {
                        let _ = write!(s, "^{n}");
                    }
                }
                if first {
                    s.push('1');
                }
            }
            GfNode::Class(c) => s.push_str(&self.names[c.index()]),
            GfNode::Sum(cs) => {
                if ctx >= 1 {
                    s.push('(');
                }
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        s.push_str(" + ");
                    }
                    self.write_node(s, *c, 0);
                }
                if ctx >= 1 {
                    s.push(')');
                }
            }
            GfNode::Product(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        s.push('*');
                    }
                    self.write_node(s, *c, 1);
                }
            }
            GfNode::QuasiInverse(c) => {
                s.push_str("1/(1 - ");
                self.write_node(s, *c, 2);
                s.push(')');
            }
        }
    }
}

/// Forward-mode tangents over a base algebra: each element carries a value
/// and one tangent per direction. Directions either differentiate in a class
/// unknown (seeded by the caller) or apply `x_v d/dx_v` to the monomials.
pub struct Dual<'a, A: Algebra> {
    pub base: &'a A,
    /// Per direction, the variable whose `x d/dx` acts on monomials.
    pub theta: Vec<Option<usize>>,
}

#[derive(Clone, Debug)]
pub struct DualElem<E> {
    pub value: E,
    pub tangent: Vec<E>,
}

impl<'a, A: Algebra> Dual<'a, A> {
    pub fn new(base: &'a A, theta: Vec<Option<usize>>) -> Self {
        Dual { base, theta }
    }

    pub fn directions(&self) -> usize {
        self.theta.len()
    }

    /// An element with the given value and all-zero tangents.
    pub fn constant(&self, value: A::Elem) -> DualElem<A::Elem> {
        DualElem { value, tangent: alloc::vec![self.base.zero(); self.theta.len()] }
    }

    /// An element whose tangent is one in direction `dir`.
    pub fn seeded(&self, value: A::Elem, dir: usize) -> DualElem<A::Elem> {
        let mut e = self.constant(value);
        e.tangent[dir] = self.base.one();
        e
    }
}

impl<A: Algebra> Algebra for Dual<'_, A> {
    type Elem = DualElem<A::Elem>;
    type Error = A::Error;

    fn zero(&self) -> Self::Elem {
        self.constant(self.base.zero())
    }

    fn one(&self) -> Self::Elem {
        self.constant(self.base.one())
    }

    fn monomial(&self, size: &SizeVector) -> Self::Elem {
        let value = self.base.monomial(size);
        let tangent = self
            .theta
            .iter()
            .map(|t| match t {
                Some(v) if size.get(*v) > 0 => self.base.scale(&value, size.get(*v)),
                _ => self.base.zero(),
            })
            .collect();
        DualElem { value, tangent }
    }

    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        DualElem {
            value: self.base.add(&a.value, &b.value),
            tangent: a.tangent.iter().zip(&b.tangent).map(|(x, y)| self.base.add(x, y)).collect(),
        }
    }

    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        DualElem {
            value: self.base.mul(&a.value, &b.value),
            tangent: a
                .tangent
                .iter()
                .zip(&b.tangent)
                .map(|(da, db)| self.base.add(&self.base.mul(da, &b.value), &self.base.mul(&a.value, db)))
                .collect(),
        }
    }

    fn scale(&self, a: &Self::Elem, k: u64) -> Self::Elem {
        DualElem {
            value: self.base.scale(&a.value, k),
            tangent: a.tangent.iter().map(|t| self.base.scale(t, k)).collect(),
        }
    }

    fn quasi_inverse(&self, node: NodeId, a: &Self::Elem) -> Result<Self::Elem, Self::Error> {
        let q = self.base.quasi_inverse(node, &a.value)?;
        let q2 = self.base.mul(&q, &q);
        Ok(DualElem { tangent: a.tangent.iter().map(|t| self.base.mul(&q2, t)).collect(), value: q })
    }
}

/// Plain `f64` evaluation, used for quick approximations.
pub struct F64Algebra<'a> {
    pub point: &'a [f64],
}

impl Algebra for F64Algebra<'_> {
    type Elem = f64;
    type Error = NodeId;

    fn zero(&self) -> f64 {
        0.0
    }

    fn one(&self) -> f64 {
        1.0
    }

    fn monomial(&self, size: &SizeVector) -> f64 {
        let mut m = 1.0;
        for (v, n) in size.as_slice().iter().enumerate() {
            for _ in 0..*n {
                m *= self.point[v];
            }
        }
        m
    }

    fn add(&self, a: &f64, b: &f64) -> f64 {
        a + b
    }

    fn mul(&self, a: &f64, b: &f64) -> f64 {
        a * b
    }

    fn scale(&self, a: &f64, k: u64) -> f64 {
        a * k as f64
    }

    fn quasi_inverse(&self, node: NodeId, a: &f64) -> Result<f64, NodeId> {
        if *a >= 1.0 || !a.is_finite() {
            Err(node)
        } else {
            Ok(1.0 / (1.0 - a))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_str;
    use crate::system::transfer;

    #[test]
    fn f64_evaluation_and_tangents() {
        let gfs = transfer(&parse_str("B = z + z*B*B").unwrap()).unwrap();
        let point = [0.2];
        let alg = F64Algebra { point: &point };
        let y = [0.3];
        let h = gfs.apply(&alg, &y).unwrap();
        assert!((h[0] - (0.2 + 0.2 * 0.09)).abs() < 1e-15);

        let dual = Dual::new(&alg, alloc::vec![None, Some(0)]);
        let ys = [dual.seeded(0.3, 0)];
        let h = gfs.apply(&dual, &ys).unwrap();
        // dH/dB = 2 z B, x dH/dx = z + z B^2.
        assert!((h[0].tangent[0] - 2.0 * 0.2 * 0.3).abs() < 1e-15);
        assert!((h[0].tangent[1] - (0.2 + 0.2 * 0.09)).abs() < 1e-15);
    }

    #[test]
    fn bounds_per_node() {
        let gfs = transfer(&parse_str("B = z + z*B*B").unwrap()).unwrap();
        assert_eq!(gfs.bounds(NodeId(1)).max.as_slice(), &[Some(1)]);
        assert_eq!(gfs.bounds(NodeId(2)).min.as_slice(), &[3]);
        assert_eq!(gfs.bounds(NodeId(2)).max.as_slice(), &[None]);
    }

    #[test]
    fn sequence_text() {
        let gfs = transfer(&parse_str("S = Seq(z*z + u)").unwrap()).unwrap();
        assert_eq!(gfs.equation_text(ClassId(0)), "S = 1/(1 - (z*z + u))");
    }
}

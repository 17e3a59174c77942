//! Turning accepted traces into objects through builder callbacks.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::engine::ChoiceTrace;
use crate::gf::{GfNode, GfSystem};
use crate::system::{NodeId, SizeVector};

/// An atom reached while building.
#[derive(Clone, Copy, Debug)]
pub struct AtomRef<'a> {
    pub key: &'a str,
    pub size: &'a SizeVector,
    pub node: NodeId,
}

/// Callbacks materializing a trace, invoked in postorder. Unions and class
/// references are transparent.
pub trait Builder {
    type Object;
    type Output;
    type Error;

    fn atom(&mut self, atom: AtomRef<'_>) -> Result<Self::Object, Self::Error>;
    fn product(&mut self, node: NodeId, children: Vec<Self::Object>) -> Result<Self::Object, Self::Error>;
    fn sequence(&mut self, node: NodeId, children: Vec<Self::Object>) -> Result<Self::Object, Self::Error>;
    fn finalize(&mut self, object: Self::Object) -> Result<Self::Output, Self::Error>;
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BuildError<E: fmt::Debug + fmt::Display> {
    /// A callback failed; `position` counts the decisions consumed so far.
    #[error("builder failed at node {node} (trace position {position}): {error}")]
    Builder { node: NodeId, position: usize, error: E },
    #[error("trace does not match the system at position {position}")]
    Malformed { position: usize },
}

enum Frame {
    Visit(NodeId),
    Product(NodeId, usize),
    Sequence(NodeId, usize),
}

/// Replays `trace` against `gfs`, calling `builder` for every atom, product
/// and sequence. Uses an explicit stack, so deep objects are fine.
pub fn build<B>(gfs: &GfSystem, trace: &ChoiceTrace, builder: &mut B) -> Result<B::Output, BuildError<B::Error>>
where
    B: Builder,
    B::Error: fmt::Debug + fmt::Display,
{
    let mut frames = alloc::vec![Frame::Visit(gfs.root(trace.class))];
    let mut out: Vec<B::Object> = Vec::new();
    let mut pos = 0usize;
    let fail = |node, position, error| BuildError::Builder { node, position, error };
    let next_outcome = |node: NodeId, pos: &mut usize| -> Result<u32, BuildError<B::Error>> {
        let d = trace.decisions.get(*pos).filter(|d| d.node == node).ok_or(BuildError::Malformed { position: *pos })?;
        *pos += 1;
        Ok(d.outcome)
    };
    while let Some(frame) = frames.pop() {
        match frame {
            Frame::Visit(node) => match gfs.node(node) {
                GfNode::Monomial { key, size } => {
                    let obj = builder.atom(AtomRef { key, size, node }).map_err(|e| fail(node, pos, e))?;
                    out.push(obj);
                }
                GfNode::Class(c) => frames.push(Frame::Visit(gfs.root(*c))),
                GfNode::Sum(cs) => {
                    let k = next_outcome(node, &mut pos)? as usize;
                    let child = *cs.get(k).ok_or(BuildError::Malformed { position: pos - 1 })?;
                    frames.push(Frame::Visit(child));
                }
                GfNode::Product(cs) => {
                    frames.push(Frame::Product(node, cs.len()));
                    frames.extend(cs.iter().rev().map(|c| Frame::Visit(*c)));
                }
                GfNode::QuasiInverse(c) => {
                    let k = next_outcome(node, &mut pos)? as usize;
                    frames.push(Frame::Sequence(node, k));
                    frames.extend((0..k).map(|_| Frame::Visit(*c)));
                }
                GfNode::Zero => return Err(BuildError::Malformed { position: pos }),
            },
            Frame::Product(node, n) => {
                let children = out.split_off(out.len() - n);
                let obj = builder.product(node, children).map_err(|e| fail(node, pos, e))?;
                out.push(obj);
            }
            Frame::Sequence(node, k) => {
                let children = out.split_off(out.len() - k);
                let obj = builder.sequence(node, children).map_err(|e| fail(node, pos, e))?;
                out.push(obj);
            }
        }
    }
    if pos != trace.decisions.len() || out.len() != 1 {
        return Err(BuildError::Malformed { position: pos });
    }
    let root = gfs.root(trace.class);
    builder.finalize(out.pop().expect("one object")).map_err(|e| fail(root, pos, e))
}

/// Builds nested term strings: atoms print their key, products
/// `Prod(a, b)`, sequences `Seq(a, b)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct TermBuilder;

impl Builder for TermBuilder {
    type Object = String;
    type Output = String;
    type Error = core::convert::Infallible;

    fn atom(&mut self, atom: AtomRef<'_>) -> Result<String, Self::Error> {
        Ok(atom.key.into())
    }

    fn product(&mut self, _node: NodeId, children: Vec<String>) -> Result<String, Self::Error> {
        Ok(alloc::format!("Prod({})", children.join(", ")))
    }

    fn sequence(&mut self, _node: NodeId, children: Vec<String>) -> Result<String, Self::Error> {
        Ok(alloc::format!("Seq({})", children.join(", ")))
    }

    fn finalize(&mut self, object: String) -> Result<String, Self::Error> {
        Ok(object)
    }
}

/// Generic tree: useful for JSON output and structural comparisons.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Atom(String),
    Product(Vec<Term>),
    Sequence(Vec<Term>),
}

#[derive(Clone, Copy, Debug, Default)]
pub struct TreeBuilder;

impl Builder for TreeBuilder {
    type Object = Term;
    type Output = Term;
    type Error = core::convert::Infallible;

    fn atom(&mut self, atom: AtomRef<'_>) -> Result<Term, Self::Error> {
        Ok(Term::Atom(atom.key.into()))
    }

    fn product(&mut self, _node: NodeId, children: Vec<Term>) -> Result<Term, Self::Error> {
        Ok(Term::Product(children))
    }

    fn sequence(&mut self, _node: NodeId, children: Vec<Term>) -> Result<Term, Self::Error> {
        Ok(Term::Sequence(children))
    }

    fn finalize(&mut self, object: Term) -> Result<Term, Self::Error> {
        Ok(object)
    }
}

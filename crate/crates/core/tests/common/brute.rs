//! Exhaustive generation of every object up to a total size, for checking
//! enumeration against first principles.

use std::collections::{BTreeMap, BTreeSet};

use combkit_core::system::{ClassId, ClassSystem, NodeId, NodeKind};

pub const MAX_TOTAL: u64 = 8;

pub type Obj = (String, Vec<u64>);

pub fn total(s: &[u64]) -> u64 {
    s.iter().sum()
}

fn expand(sys: &ClassSystem, node: NodeId, sets: &[BTreeSet<Obj>]) -> BTreeSet<Obj> {
    let vars = sys.variables().len();
    match &sys.node(node).kind {
        NodeKind::Atom { key, size } => {
            let s = size.as_slice().to_vec();
            if total(&s) <= MAX_TOTAL {
                [(key.clone(), s)].into()
            } else {
                BTreeSet::new()
            }
        }
        NodeKind::Ref(c) => sets[c.index()].iter().map(|(t, s)| (format!("{}<{t}>", sys.class_names()[c.index()]), s.clone())).collect(),
        NodeKind::Union(cs) => cs.iter().enumerate().flat_map(|(i, c)| expand(sys, *c, sets).into_iter().map(move |(t, s)| (format!("{i}:{t}"), s))).collect(),
        NodeKind::Product(cs) => {
            let mut acc: BTreeSet<Obj> = [(String::new(), vec![0; vars])].into();
            for c in cs {
                let part = expand(sys, *c, sets);
                let mut next = BTreeSet::new();
                for (ta, sa) in &acc {
                    for (tb, sb) in &part {
                        let s: Vec<u64> = sa.iter().zip(sb).map(|(a, b)| a + b).collect();
                        if total(&s) <= MAX_TOTAL {
                            next.insert((format!("{ta}({tb})"), s));
                        }
                    }
                }
                acc = next;
            }
            acc
        }
        NodeKind::Seq(c) => {
            let part = expand(sys, *c, sets);
            let mut out: BTreeSet<Obj> = [(String::from("[]"), vec![0; vars])].into();
            let mut frontier = out.clone();
            while !frontier.is_empty() {
                let mut next = BTreeSet::new();
                for (ta, sa) in &frontier {
                    for (tb, sb) in &part {
                        let s: Vec<u64> = sa.iter().zip(sb).map(|(a, b)| a + b).collect();
                        if total(&s) <= MAX_TOTAL && total(sb) > 0 {
                            next.insert((format!("{ta}[{tb}]"), s));
                        }
                    }
                }
                frontier = next.difference(&out).cloned().collect();
                out.extend(next);
            }
            out
        }
        NodeKind::Unresolved(n) => panic!("unresolved {n}"),
    }
}

/// All objects of every class with total size at most `MAX_TOTAL`.
pub fn brute_force(sys: &ClassSystem) -> Vec<BTreeSet<Obj>> {
    let n = sys.class_count();
    let mut sets = vec![BTreeSet::new(); n];
    loop {
        let next: Vec<BTreeSet<Obj>> = (0..n).map(|c| expand(sys, sys.root(ClassId(c as u32)), &sets)).collect();
        if next == sets {
            return sets;
        }
        sets = next;
    }
}

pub fn counts(objs: &BTreeSet<Obj>) -> BTreeMap<Vec<u64>, u64> {
    let mut m = BTreeMap::new();
    for (_, s) in objs {
        *m.entry(s.clone()).or_insert(0) += 1;
    }
    m
}

pub const SYSTEMS: &[&str] = &[
    "A = z",
    "B = z + (z*B*B)",
    "B = z + (B*B)",
    "UB = z + (z*UB) + (z*UB*UB)",
    "T = z * Seq(T)",
    "S = Seq(z)",
    "M = C + (C*M) + (C*M*M) + (C*M*M*M)\nC = c + c13\nc = atom(z: 1)\nc13 = atom(z: 1, u: 1)",
    "W = Seq(a + b*b)",
    "E = z + (z*O*O)\nO = z*E",
    "P = x * Seq(y * P) + y",
];

//! Choice tables: rounded cumulative probability bounds and the decision rule.

use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use super::random::RandomReal;
use crate::interval::{Float, Interval, Precision, Round};
use crate::system::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableKind {
    Union,
    Sequence,
}

/// Longest sequence table ever built; beyond it decisions are ambiguous.
const MAX_SEQUENCE_OUTCOMES: usize = 1 << 20;

/// Integer thresholds `floor(L_k·2^P)` / `floor(U_k·2^P)`.
#[derive(Clone, Debug)]
enum Thresholds {
    Small { lo: Vec<u128>, hi: Vec<u128> },
    Big { lo: Vec<BigUint>, hi: Vec<BigUint> },
}

#[derive(Clone, Debug)]
pub struct ChoiceTable {
    pub node: NodeId,
    pub kind: TableKind,
    pub precision: Precision,
    /// Per-outcome bounds `l_n ≤ p_n ≤ u_n`.
    pub probs: Vec<(Float, Float)>,
    /// Cumulative bounds `L_k`, summed with downward rounding.
    pub lower: Vec<Float>,
    /// Cumulative bounds `U_k`, summed with upward rounding, capped at 1.
    pub upper: Vec<Float>,
    thresholds: Thresholds,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Outcome(u32),
    Ambiguous,
}

impl ChoiceTable {
    /// Union over children with value enclosures `values`; outcome `n` has
    /// probability `A_n / Σ A_j`.
    pub fn union(node: NodeId, values: &[Interval], p: Precision) -> Self {
        let m = values.len();
        let mut probs = Vec::with_capacity(m);
        for n in 0..m {
            let mut rest_hi = Float::zero();
            let mut rest_lo = Float::zero();
            for (j, v) in values.iter().enumerate() {
                if j != n {
                    rest_hi = rest_hi.add(v.hi(), p, Round::Up);
                    rest_lo = rest_lo.add(v.lo(), p, Round::Down);
                }
            }
            let a = &values[n];
            let den_hi = a.lo().add(&rest_hi, p, Round::Up);
            let den_lo = a.hi().add(&rest_lo, p, Round::Down);
            let l = a.lo().div(&den_hi, p, Round::Down).unwrap_or_else(Float::zero);
            let u = a.hi().div(&den_lo, p, Round::Up).map(|u| Float::min(&u, &Float::one())).unwrap_or_else(Float::one);
            probs.push((l, u));
        }
        let (mut lower, mut upper) = cumulative(&probs, p);
        // The last outcome is certain once all others are excluded.
        *lower.last_mut().expect("non-empty union") = Float::one();
        *upper.last_mut().expect("non-empty union") = Float::one();
        ChoiceTable::finish(node, TableKind::Union, p, probs, lower, upper)
    }

    /// Sequence with operand enclosure `a`: `p_k = (1 - a)·a^k`. The table
    /// stops at the first `K` with `U_K ≥ L_{K+1}`: beyond it no outcome can
    /// be decided at this precision.
    pub fn sequence(node: NodeId, a: &Interval, p: Precision) -> Self {
        let one = Float::one();
        let q_lo = one.sub(a.hi(), p, Round::Down);
        let q_hi = one.sub(a.lo(), p, Round::Up);
        let mut probs: Vec<(Float, Float)> = Vec::new();
        let mut lower: Vec<Float> = Vec::new();
        let mut upper: Vec<Float> = Vec::new();
        let (mut pow_lo, mut pow_hi) = (Float::one(), Float::one());
        let (mut cl, mut cu) = (Float::zero(), Float::zero());
        loop {
            let l = q_lo.mul(&pow_lo, p, Round::Down);
            let u = Float::min(&q_hi.mul(&pow_hi, p, Round::Up), &one);
            let next_lower = cl.add(&l, p, Round::Down);
            if let Some(last_upper) = upper.last() {
                if *last_upper >= next_lower || lower.len() >= MAX_SEQUENCE_OUTCOMES {
                    break;
                }
            }
            cl = next_lower;
            cu = Float::min(&cu.add(&u, p, Round::Up), &one);
            probs.push((l, u));
            lower.push(cl.clone());
            upper.push(cu.clone());
            pow_lo = pow_lo.mul(a.lo(), p, Round::Down);
            pow_hi = pow_hi.mul(a.hi(), p, Round::Up);
        }
        ChoiceTable::finish(node, TableKind::Sequence, p, probs, lower, upper)
    }

    fn finish(node: NodeId, kind: TableKind, p: Precision, probs: Vec<(Float, Float)>, lower: Vec<Float>, upper: Vec<Float>) -> Self {
        let thresholds = if p <= 126 {
            let conv = |v: &Float| v.floor_scaled(p).to_u128().expect("threshold fits");
            Thresholds::Small { lo: lower.iter().map(conv).collect(), hi: upper.iter().map(conv).collect() }
        } else {
            Thresholds::Big {
                lo: lower.iter().map(|v| v.floor_scaled(p)).collect(),
                hi: upper.iter().map(|v| v.floor_scaled(p)).collect(),
            }
        };
        ChoiceTable { node, kind, precision: p, probs, lower, upper, thresholds }
    }

    /// Number of outcomes the table can ever return.
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// Decides on `r ∈ [t, t+1)·2^-P` where `t` is the `P`-bit prefix: outcome
    /// `k` when the whole interval lies below `L_k` and above `U_{k-1}`.
    pub fn decide(&self, r: &RandomReal) -> Decision {
        let p = self.precision;
        match &self.thresholds {
            Thresholds::Small { lo, hi } => {
                let t = r.prefix_u128(p);
                for k in 0..lo.len() {
                    if t > hi[k] {
                        continue;
                    }
                    return if t < lo[k] { Decision::Outcome(k as u32) } else { Decision::Ambiguous };
                }
            }
            Thresholds::Big { lo, hi } => {
                let t = r.prefix_big(p);
                for k in 0..lo.len() {
                    if t > hi[k] {
                        continue;
                    }
                    return if t < lo[k] { Decision::Outcome(k as u32) } else { Decision::Ambiguous };
                }
            }
        }
        Decision::Ambiguous
    }
}

fn cumulative(probs: &[(Float, Float)], p: Precision) -> (Vec<Float>, Vec<Float>) {
    let one = Float::one();
    let mut lower = Vec::with_capacity(probs.len());
    let mut upper = Vec::with_capacity(probs.len());
    let (mut cl, mut cu) = (Float::zero(), Float::zero());
    for (l, u) in probs {
        cl = cl.add(l, p, Round::Down);
        cu = Float::min(&cu.add(u, p, Round::Up), &one);
        lower.push(cl.clone());
        upper.push(cu.clone());
    }
    (lower, upper)
}

//! Certified interval evaluation of generating functions at a point.

use alloc::string::String;
use alloc::vec::Vec;

use crate::gf::{Algebra, Dual, GfSystem};
use crate::interval::{Float, Interval, Precision, Ratio, Round};
use crate::system::{ClassId, NodeId, SizeVector};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("iteration diverged after {iterations} steps: the point lies outside the domain of convergence")]
    Divergent { iterations: usize },
    #[error("sequence operand at node {node} reaches 1: the point lies on or beyond a singularity")]
    SeqOperandAtOne { node: NodeId },
    #[error("could not certify an enclosure at {precision} bits")]
    ContractionFailed { precision: Precision },
    #[error("derivative system is singular or too ill-conditioned at {precision} bits")]
    SingularJacobian { precision: Precision },
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("precision {0} is below the 24-bit minimum")]
    PrecisionTooLow(Precision),
}

/// Positive rational control parameters, one per system variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Point {
    values: Vec<Ratio>,
}

impl Point {
    /// Builds a point from `(variable, value)` pairs covering every variable.
    pub fn new(gfs: &GfSystem, values: &[(String, Ratio)]) -> Result<Self, OracleError> {
        let mut out: Vec<Option<Ratio>> = alloc::vec![None; gfs.variables().len()];
        for (name, v) in values {
            let i = gfs
                .variable_index(name)
                .ok_or_else(|| OracleError::InvalidPoint(alloc::format!("unknown variable `{name}`")))?;
            if v.is_zero() {
                return Err(OracleError::InvalidPoint(alloc::format!("`{name}` must be positive")));
            }
            out[i] = Some(v.clone());
        }
        let values = out
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| OracleError::InvalidPoint(alloc::format!("no value for `{}`", gfs.variables()[i]))))
            .collect::<Result<_, _>>()?;
        Ok(Point { values })
    }

    /// Point from values in system variable order.
    pub fn from_values(values: Vec<Ratio>) -> Self {
        Point { values }
    }

    pub fn values(&self) -> &[Ratio] {
        &self.values
    }

    pub fn enclose(&self, prec: Precision) -> Vec<Interval> {
        self.values.iter().map(|v| v.enclose(prec)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct OracleConfig {
    pub precision: Precision,
    /// Class values above this are treated as divergence.
    pub growth_limit: f64,
    /// Newton iteration budget; `None` uses `64·ceil(log2 P)`.
    pub budget: Option<usize>,
    /// Number of ε-inflation attempts before giving up.
    pub attempts: u32,
}

impl OracleConfig {
    pub fn new(precision: Precision) -> Self {
        OracleConfig { precision, growth_limit: 1e6, budget: None, attempts: 8 }
    }

    fn budget(&self) -> usize {
        self.budget.unwrap_or(64 * (32 - (self.precision.max(2) - 1).leading_zeros()) as usize)
    }
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig::new(53)
    }
}

/// Enclosures of every node's generating function at a point.
#[derive(Clone, Debug)]
pub struct NodeValues {
    pub precision: Precision,
    pub nodes: Vec<Interval>,
    pub classes: Vec<Interval>,
}

impl NodeValues {
    pub fn node(&self, id: NodeId) -> &Interval {
        &self.nodes[id.index()]
    }

    pub fn class(&self, c: ClassId) -> &Interval {
        &self.classes[c.index()]
    }
}

/// Outward-rounded interval evaluation.
pub struct IntervalAlgebra {
    pub prec: Precision,
    pub point: Vec<Interval>,
}

impl Algebra for IntervalAlgebra {
    type Elem = Interval;
    type Error = OracleError;

    fn zero(&self) -> Interval {
        Interval::zero()
    }

    fn one(&self) -> Interval {
        Interval::one()
    }

    fn monomial(&self, size: &SizeVector) -> Interval {
        let mut acc = Interval::one();
        for (v, n) in size.as_slice().iter().enumerate() {
            if *n > 0 {
                acc = acc.mul(&self.point[v].pow(*n, self.prec), self.prec);
            }
        }
        acc
    }

    fn add(&self, a: &Interval, b: &Interval) -> Interval {
        a.add(b, self.prec)
    }

    fn mul(&self, a: &Interval, b: &Interval) -> Interval {
        a.mul(b, self.prec)
    }

    fn scale(&self, a: &Interval, k: u64) -> Interval {
        a.scale(k, self.prec)
    }

    fn quasi_inverse(&self, node: NodeId, a: &Interval) -> Result<Interval, OracleError> {
        if a.hi() >= &Float::one() {
            return Err(OracleError::SeqOperandAtOne { node });
        }
        Interval::one().sub(a, self.prec).div_from_one(self.prec).ok_or(OracleError::SeqOperandAtOne { node })
    }
}

trait OneOver {
    fn div_from_one(&self, prec: Precision) -> Option<Interval>;
}

impl OneOver for Interval {
    fn div_from_one(&self, prec: Precision) -> Option<Interval> {
        Interval::one().div(self, prec)
    }
}

/// Approximate evaluation with every operation rounded down; used only to
/// locate candidate fixed points.
struct FloatAlgebra {
    prec: Precision,
    point: Vec<Float>,
}

impl Algebra for FloatAlgebra {
    type Elem = Float;
    type Error = NodeId;

    fn zero(&self) -> Float {
        Float::zero()
    }

    fn one(&self) -> Float {
        Float::one()
    }

    fn monomial(&self, size: &SizeVector) -> Float {
        let mut acc = Float::one();
        for (v, n) in size.as_slice().iter().enumerate() {
            for _ in 0..*n {
                acc = acc.mul(&self.point[v], self.prec, Round::Down);
            }
        }
        acc
    }

    fn add(&self, a: &Float, b: &Float) -> Float {
        a.add(b, self.prec, Round::Down)
    }

    fn mul(&self, a: &Float, b: &Float) -> Float {
        a.mul(b, self.prec, Round::Down)
    }

    fn scale(&self, a: &Float, k: u64) -> Float {
        a.mul(&Float::from_u64(k), self.prec, Round::Down)
    }

    fn quasi_inverse(&self, node: NodeId, a: &Float) -> Result<Float, NodeId> {
        let d = Float::one().sub(a, self.prec, Round::Down);
        if !d.is_positive() {
            return Err(node);
        }
        Float::one().div(&d, self.prec, Round::Down).ok_or(node)
    }
}

/// Solves `(I - J) x = rhs` approximately, without pivoting. Returns `None`
/// if a pivot is not positive, which for the nonnegative Jacobians here
/// means the spectral radius of `J` is at least one.
fn solve_m_matrix(j: &[Vec<Float>], rhs: &[Float], prec: Precision) -> Option<Vec<Float>> {
    let n = rhs.len();
    let mut m: Vec<Vec<Float>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    let id = if r == c { Float::one() } else { Float::zero() };
                    id.sub(&j[r][c], prec, Round::Down)
                })
                .collect()
        })
        .collect();
    let mut b = rhs.to_vec();
    for k in 0..n {
        if !m[k][k].is_positive() {
            return None;
        }
        for r in k + 1..n {
            if m[r][k].is_zero() {
                continue;
            }
            let f = m[r][k].div(&m[k][k], prec, Round::Down)?;
            for c in k..n {
                let t = f.mul(&m[k][c], prec, Round::Down);
                m[r][c] = m[r][c].sub(&t, prec, Round::Down);
            }
            let t = f.mul(&b[k], prec, Round::Down);
            b[r] = b[r].sub(&t, prec, Round::Down);
        }
    }
    let mut x = alloc::vec![Float::zero(); n];
    for k in (0..n).rev() {
        let mut acc = b[k].clone();
        for c in k + 1..n {
            acc = acc.sub(&m[k][c].mul(&x[c], prec, Round::Down), prec, Round::Down);
        }
        x[k] = acc.div(&m[k][k], prec, Round::Down)?;
    }
    Some(x)
}

fn float_jacobian(gfs: &GfSystem, alg: &FloatAlgebra, y: &[Float]) -> Result<(Vec<Float>, Vec<Vec<Float>>), NodeId> {
    let n = y.len();
    let dual = Dual::new(alg, alloc::vec![None; n]);
    let seeded: Vec<_> = y.iter().enumerate().map(|(j, v)| dual.seeded(v.clone(), j)).collect();
    let h = gfs.apply(&dual, &seeded)?;
    Ok(h.into_iter().map(|e| (e.value, e.tangent)).unzip())
}

/// Approximate least fixed point by Newton iteration from zero.
fn approximate(gfs: &GfSystem, point: &Point, cfg: &OracleConfig, prec: Precision) -> Result<Vec<Float>, OracleError> {
    let alg = FloatAlgebra {
        prec,
        point: point.values().iter().map(|v| Float::from_ratio(v.numer(), v.denom(), prec, Round::Down).expect("positive denominator")).collect(),
    };
    let n = gfs.class_count();
    let limit = Float::from_f64(cfg.growth_limit);
    let mut y = alloc::vec![Float::zero(); n];
    let budget = cfg.budget();
    for it in 0..budget {
        let divergent = OracleError::Divergent { iterations: it + 1 };
        let (h, j) = float_jacobian(gfs, &alg, &y).map_err(|_| divergent.clone())?;
        let r: Vec<Float> = h.iter().zip(&y).map(|(a, b)| a.sub(b, prec, Round::Down)).collect();
        let delta = solve_m_matrix(&j, &r, prec).ok_or(divergent.clone())?;
        let mut done = true;
        for (yi, di) in y.iter_mut().zip(&delta) {
            let next = yi.add(di, prec, Round::Down);
            if next.is_negative() || next > limit {
                return Err(divergent);
            }
            // Converged once the step is below the last few bits.
            if !di.is_zero() && di.abs() > next.abs().mul_pow2(-(prec as i64 - 4)) {
                done = false;
            }
            *yi = next;
        }
        if done {
            return Ok(y);
        }
    }
    Err(OracleError::Divergent { iterations: budget })
}

/// Direction `v = (I - J)^{-1} (|y| + tiny)`: moving along it changes the
/// residual `H(y) - y` by a strictly positive amount in every component,
/// including classes that merely alias sums of others.
fn inflation_direction(j: &[Vec<Float>], y: &[Float], tiny: &Float, prec: Precision) -> Option<Vec<Float>> {
    let w: Vec<Float> = y.iter().map(|v| v.abs().add(tiny, prec, Round::Up)).collect();
    let v = solve_m_matrix(j, &w, prec)?;
    v.iter().all(Float::is_positive).then_some(v)
}

fn inflate(y: &Float, dir: &Float, eps_log2: i64, prec: Precision) -> (Float, Float) {
    let d = dir.mul_pow2(eps_log2);
    let lo = y.sub(&d, prec, Round::Down);
    let lo = if lo.is_negative() { Float::zero() } else { lo };
    let hi = y.add(&d, prec, Round::Up);
    (lo, hi)
}

fn interval_jacobian_hi(gfs: &GfSystem, alg: &IntervalAlgebra, y: &[Interval]) -> Result<Vec<Vec<Interval>>, OracleError> {
    let n = y.len();
    let dual = Dual::new(alg, alloc::vec![None; n]);
    let seeded: Vec<_> = y.iter().enumerate().map(|(j, v)| dual.seeded(v.clone(), j)).collect();
    Ok(gfs.apply(&dual, &seeded)?.into_iter().map(|e| e.tangent).collect())
}

/// `J v < v` componentwise with `J` rounded up: certifies spectral radius
/// below one for every matrix under `J`.
fn strictly_contracts(j: &[Vec<Interval>], prec: Precision) -> bool {
    let n = j.len();
    let mid: Vec<Vec<Float>> = j.iter().map(|row| row.iter().map(|x| x.hi().clone()).collect()).collect();
    let Some(v) = solve_m_matrix(&mid, &alloc::vec![Float::one(); n], prec) else {
        return false;
    };
    if v.iter().any(|x| !x.is_positive()) {
        return false;
    }
    (0..n).all(|r| {
        let mut acc = Float::zero();
        for c in 0..n {
            acc = acc.add(&j[r][c].hi().mul(&v[c], prec, Round::Up), prec, Round::Up);
        }
        acc < v[r]
    })
}

/// Certified enclosures of all node values at `point`.
pub fn eval_system(gfs: &GfSystem, point: &Point, cfg: &OracleConfig) -> Result<NodeValues, OracleError> {
    let p = cfg.precision;
    if p < 24 {
        return Err(OracleError::PrecisionTooLow(p));
    }
    let w = p + 32;
    let y = approximate(gfs, point, cfg, w)?;
    let alg = IntervalAlgebra { prec: w, point: point.enclose(w) };
    let tiny = Float::pow2(-(w as i64) - 16);
    let n = gfs.class_count();
    let falg = FloatAlgebra { prec: w, point: alg.point.iter().map(Interval::midpoint).collect() };
    let (_, jy) = float_jacobian(gfs, &falg, &y).map_err(|node| OracleError::SeqOperandAtOne { node })?;
    let dir = inflation_direction(&jy, &y, &tiny, w).ok_or(OracleError::ContractionFailed { precision: p })?;
    let mut certified = None;
    for attempt in 0..cfg.attempts {
        let eps_log2 = -(p as i64 + 4) + 4 * attempt as i64;
        let (lo, hi): (Vec<Float>, Vec<Float>) = y.iter().zip(&dir).map(|(v, d)| inflate(v, d, eps_log2, w)).unzip();
        let upper: Vec<Interval> = hi.iter().map(|v| Interval::point(v.clone())).collect();
        let h_up = gfs.apply(&alg, &upper)?;
        if (0..n).any(|i| h_up[i].hi() > &hi[i]) {
            continue;
        }
        let lower: Vec<Interval> = lo.iter().map(|v| Interval::point(v.clone())).collect();
        let h_down = gfs.apply(&alg, &lower)?;
        if (0..n).any(|i| h_down[i].lo() < &lo[i]) {
            continue;
        }
        let j = interval_jacobian_hi(gfs, &alg, &upper)?;
        if !strictly_contracts(&j, w) {
            continue;
        }
        certified = Some(lo.into_iter().zip(hi).map(|(a, b)| Interval::new(a, b)).collect::<Vec<_>>());
        break;
    }
    let mut classes = certified.ok_or(OracleError::ContractionFailed { precision: p })?;
    let nodes = gfs.eval_nodes(&alg, &classes)?;
    for (c, cls) in classes.iter_mut().enumerate() {
        let root = &nodes[gfs.root(ClassId(c as u32)).index()];
        if let Some(t) = cls.intersect(root) {
            *cls = t;
        }
    }
    let nodes = gfs.eval_nodes(&alg, &classes)?;
    Ok(NodeValues {
        precision: p,
        nodes: nodes.iter().map(|v| v.round_out(p)).collect(),
        classes: classes.iter().map(|v| v.round_out(p)).collect(),
    })
}

/// Enclosures of class derivatives with respect to each variable.
#[derive(Clone, Debug)]
pub struct Derivatives {
    /// `x_v ∂Y_c/∂x_v`, indexed `[class][variable]`.
    pub theta: Vec<Vec<Interval>>,
    /// `∂Y_c/∂x_v`, indexed `[class][variable]`.
    pub partial: Vec<Vec<Interval>>,
}

/// Differentiates `Y = H(Y, x)`: `(I - ∂H/∂Y) θY = θH` where `θ = x ∂/∂x`,
/// certified by an enclosure check of the affine map `D ↦ J D + g`.
pub fn eval_derivatives(gfs: &GfSystem, point: &Point, values: &NodeValues) -> Result<Derivatives, OracleError> {
    let p = values.precision;
    let w = p + 32;
    let n = gfs.class_count();
    let nv = gfs.variables().len();
    let alg = IntervalAlgebra { prec: w, point: point.enclose(w) };
    let singular = OracleError::SingularJacobian { precision: p };

    let theta: Vec<Option<usize>> = (0..nv).map(Some).chain((0..n).map(|_| None)).collect();
    let dual = Dual::new(&alg, theta);
    let seeded: Vec<_> = values.classes.iter().enumerate().map(|(j, v)| dual.seeded(v.clone(), nv + j)).collect();
    let h = gfs.apply(&dual, &seeded)?;
    // g[c][v] = θ_v H_c, jac[c][j] = ∂H_c/∂Y_j, all nonnegative.
    let g: Vec<Vec<Interval>> = h.iter().map(|e| e.tangent[..nv].to_vec()).collect();
    let jac: Vec<Vec<Interval>> = h.iter().map(|e| e.tangent[nv..].to_vec()).collect();
    if !strictly_contracts(&jac, w) {
        return Err(singular);
    }
    let jmid: Vec<Vec<Float>> = jac.iter().map(|r| r.iter().map(Interval::midpoint).collect()).collect();
    let tiny = Float::pow2(-(w as i64) - 16);

    let mut theta_out = alloc::vec![alloc::vec![Interval::zero(); nv]; n];
    for v in 0..nv {
        let gmid: Vec<Float> = (0..n).map(|c| g[c][v].midpoint()).collect();
        let d = solve_m_matrix(&jmid, &gmid, w).ok_or(singular.clone())?;
        let dir = inflation_direction(&jmid, &d, &tiny, w).ok_or(singular.clone())?;
        let mut found = None;
        for attempt in 0..8 {
            let eps_log2 = -(p as i64) + 4 * attempt as i64;
            let (lo, hi): (Vec<Float>, Vec<Float>) = d.iter().zip(&dir).map(|(x, e)| inflate(x, e, eps_log2, w)).unzip();
            let ok = (0..n).all(|r| {
                let mut up = g[r][v].hi().clone();
                let mut down = g[r][v].lo().clone();
                for c in 0..n {
                    up = up.add(&jac[r][c].hi().mul(&hi[c], w, Round::Up), w, Round::Up);
                    down = down.add(&jac[r][c].lo().mul(&lo[c], w, Round::Down), w, Round::Down);
                }
                up <= hi[r] && down >= lo[r]
            });
            if ok {
                found = Some((lo, hi));
                break;
            }
        }
        let (lo, hi) = found.ok_or(singular.clone())?;
        for c in 0..n {
            theta_out[c][v] = Interval::new(lo[c].clone(), hi[c].clone()).round_out(p);
        }
    }
    let xs = point.enclose(w);
    let partial = theta_out
        .iter()
        .map(|row| row.iter().zip(&xs).map(|(t, x)| t.div(x, w).expect("positive point").round_out(p)).collect())
        .collect();
    Ok(Derivatives { theta: theta_out, partial })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_str;
    use crate::system::transfer;

    fn gfs(text: &str) -> GfSystem {
        transfer(&parse_str(text).unwrap()).unwrap()
    }

    fn point(g: &GfSystem, pairs: &[(&str, &str)]) -> Point {
        let vals: Vec<(String, Ratio)> = pairs.iter().map(|(k, v)| ((*k).into(), v.parse().unwrap())).collect();
        Point::new(g, &vals).unwrap()
    }

    #[test]
    fn binary_trees_at_one_fifth() {
        let g = gfs("B = z + (z*B*B)");
        let vals = eval_system(&g, &point(&g, &[("z", "0.2")]), &OracleConfig::new(53)).unwrap();
        let b = vals.class(ClassId(0));
        let exact = (1.0 - (1.0f64 - 4.0 * 0.04).sqrt()) / 0.4;
        assert!(b.lo().to_f64() <= exact + 1e-15 && b.hi().to_f64() >= exact - 1e-15);
        assert!(b.width(53) <= Float::pow2(-40));
    }

    #[test]
    fn atom_value_is_exact() {
        let g = gfs("A = z");
        let vals = eval_system(&g, &point(&g, &[("z", "0.3")]), &OracleConfig::new(53)).unwrap();
        let a = vals.class(ClassId(0));
        assert!(a.contains(&Float::from_f64(0.3)) || a.width(53) <= Float::pow2(-53));
    }

    #[test]
    fn divergence_beyond_singularity() {
        let g = gfs("B = z + (z*B*B)");
        let r = eval_system(&g, &point(&g, &[("z", "0.6")]), &OracleConfig::new(53));
        assert!(matches!(r, Err(OracleError::Divergent { .. })), "{r:?}");
        let s = gfs("S = Seq(z)");
        let r = eval_system(&s, &point(&s, &[("z", "1")]), &OracleConfig::new(53));
        assert!(r.is_err());
    }

    #[test]
    fn derivatives() {
        let g = gfs("B = z + (z*B*B)");
        let pt = point(&g, &[("z", "0.2")]);
        let vals = eval_system(&g, &pt, &OracleConfig::new(53)).unwrap();
        let d = eval_derivatives(&g, &pt, &vals).unwrap();
        let b = (1.0 - (1.0f64 - 0.16).sqrt()) / 0.4;
        let db = (b * b + 1.0) / (1.0 - 0.4 * b);
        let enc = &d.partial[0][0];
        assert!(enc.lo().to_f64() <= db + 1e-12 && enc.hi().to_f64() >= db - 1e-12, "{enc:?} vs {db}");

        let m = gfs("A = z*u");
        let pt = point(&m, &[("z", "0.2"), ("u", "0.3")]);
        let vals = eval_system(&m, &pt, &OracleConfig::new(53)).unwrap();
        let d = eval_derivatives(&m, &pt, &vals).unwrap();
        assert!(d.partial[0][1].contains(&Float::from_f64(0.2)) || d.partial[0][1].width(53) < Float::pow2(-50));
    }

    #[test]
    fn sequence_operands_stay_below_one() {
        let g = gfs("T = z*Seq(T)");
        let vals = eval_system(&g, &point(&g, &[("z", "0.24")]), &OracleConfig::new(53)).unwrap();
        // Seq node is 2, its operand the class reference 3.
        assert!(vals.node(NodeId(3)).hi() < &Float::one());
    }

    #[test]
    fn higher_precision_is_not_wider() {
        let g = gfs("M = C + (C * M) + (C * M * M) + (C * M * M * M)\nC = c + c13\nc = atom(z: 1)\nc13 = atom(z: 1, u: 1)");
        let pt = point(&g, &[("z", "0.25"), ("u", "0.1")]);
        let a = eval_system(&g, &pt, &OracleConfig::new(53)).unwrap();
        let b = eval_system(&g, &pt, &OracleConfig::new(106)).unwrap();
        for (x, y) in a.nodes.iter().zip(&b.nodes) {
            assert!(y.width(106) <= x.width(106));
        }
    }
}

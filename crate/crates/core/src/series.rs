//! Exact truncated power series and Newton iteration for counting.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use smallvec::SmallVec;

use crate::gf::{Algebra, Dual, GfSystem};
use crate::system::{ClassId, NodeId, SizeVector};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SeriesError {
    #[error("quasi-inverse of a series with nonzero constant term{}", .node.map(|n| alloc::format!(" at node {n}")).unwrap_or_default())]
    ConstantTermNonzero { node: Option<NodeId> },
    #[error("Newton iteration did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("multivariate system: every variable other than `{0}` needs an explicit bound")]
    MissingBound(String),
    #[error("bounds list has {got} entries, system has {expected} variables")]
    BoundsArity { expected: usize, got: usize },
}

/// Truncation box: exponent `e_v ≤ bounds[v]` for each variable. Indices are
/// mixed-radix with variable 0 varying fastest.
#[derive(Debug, PartialEq, Eq)]
pub struct SeriesShape {
    bounds: SmallVec<[u32; 2]>,
    strides: SmallVec<[usize; 2]>,
    len: usize,
    degree: Vec<u32>,
}

impl SeriesShape {
    pub fn new(bounds: &[u32]) -> Arc<Self> {
        let mut strides = SmallVec::new();
        let mut len = 1usize;
        for b in bounds {
            strides.push(len);
            len = len.checked_mul(*b as usize + 1).expect("truncation box too large");
        }
        let mut degree = alloc::vec![0u32; len];
        for (i, d) in degree.iter_mut().enumerate() {
            let mut rest = i;
            for b in bounds {
                *d += (rest % (*b as usize + 1)) as u32;
                rest /= *b as usize + 1;
            }
        }
        Arc::new(SeriesShape { bounds: SmallVec::from_slice(bounds), strides, len, degree })
    }

    pub fn bounds(&self) -> &[u32] {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Total degree bound of the box.
    pub fn max_degree(&self) -> u32 {
        self.bounds.iter().sum()
    }

    pub fn index(&self, exps: &[u32]) -> Option<usize> {
        let mut idx = 0;
        for ((e, b), s) in exps.iter().zip(&self.bounds).zip(&self.strides) {
            if e > b {
                return None;
            }
            idx += *e as usize * s;
        }
        Some(idx)
    }

    pub fn exponents(&self, mut idx: usize) -> SmallVec<[u32; 2]> {
        self.bounds
            .iter()
            .map(|b| {
                let e = idx % (*b as usize + 1);
                idx /= *b as usize + 1;
                e as u32
            })
            .collect()
    }

    /// Whether `i + j` stays inside the box, i.e. no per-variable carry.
    fn fits(&self, i: usize, j: usize) -> bool {
        let (mut a, mut b) = (i, j);
        for bd in &self.bounds {
            let r = *bd as usize + 1;
            if a % r + b % r >= r {
                return false;
            }
            a /= r;
            b /= r;
        }
        true
    }
}

/// Exact series over a truncation box, further truncated at total degree
/// `cap`. Coefficients above the cap are always zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedSeries {
    shape: Arc<SeriesShape>,
    cap: u32,
    coeffs: Vec<BigInt>,
}

impl TruncatedSeries {
    pub fn zero(shape: &Arc<SeriesShape>) -> Self {
        TruncatedSeries { shape: shape.clone(), cap: shape.max_degree(), coeffs: alloc::vec![BigInt::zero(); shape.len()] }
    }

    pub fn one(shape: &Arc<SeriesShape>) -> Self {
        let mut s = Self::zero(shape);
        s.coeffs[0] = BigInt::one();
        s
    }

    pub fn monomial(shape: &Arc<SeriesShape>, exps: &[u32]) -> Self {
        let mut s = Self::zero(shape);
        if let Some(i) = shape.index(exps) {
            s.coeffs[i] = BigInt::one();
        }
        s
    }

    pub fn shape(&self) -> &Arc<SeriesShape> {
        &self.shape
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    /// Re-truncates at total degree `cap` (at most the box degree).
    pub fn with_cap(mut self, cap: u32) -> Self {
        let cap = cap.min(self.shape.max_degree());
        if cap < self.cap {
            for (c, d) in self.coeffs.iter_mut().zip(&self.shape.degree) {
                if *d > cap {
                    c.set_zero();
                }
            }
        }
        self.cap = cap;
        self
    }

    pub fn coeff(&self, exps: &[u32]) -> BigInt {
        self.shape.index(exps).map(|i| self.coeffs[i].clone()).unwrap_or_default()
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn constant_term(&self) -> &BigInt {
        &self.coeffs[0]
    }

    /// Nonzero coefficients with their exponent vectors, in index order.
    pub fn nonzero(&self) -> impl Iterator<Item = (SmallVec<[u32; 2]>, &BigInt)> + '_ {
        self.coeffs.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(i, c)| (self.shape.exponents(i), c))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    fn check(&self, other: &Self) {
        assert!(Arc::ptr_eq(&self.shape, &other.shape) || self.shape == other.shape, "series shapes differ");
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check(other);
        let cap = self.cap.min(other.cap);
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        TruncatedSeries { shape: self.shape.clone(), cap: self.cap.max(other.cap), coeffs }.with_cap(cap)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.check(other);
        let cap = self.cap.min(other.cap);
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        TruncatedSeries { shape: self.shape.clone(), cap: self.cap.max(other.cap), coeffs }.with_cap(cap)
    }

    pub fn neg(&self) -> Self {
        TruncatedSeries { shape: self.shape.clone(), cap: self.cap, coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }

    pub fn scale(&self, k: &BigInt) -> Self {
        TruncatedSeries { shape: self.shape.clone(), cap: self.cap, coeffs: self.coeffs.iter().map(|c| c * k).collect() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.check(other);
        let cap = self.cap.min(other.cap);
        let shape = &self.shape;
        let deg = &shape.degree;
        let mut out = alloc::vec![BigInt::zero(); shape.len()];
        let b_nz: Vec<usize> = (0..other.coeffs.len()).filter(|&j| !other.coeffs[j].is_zero()).collect();
        let univariate = shape.bounds.len() <= 1;
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() || deg[i] > cap {
                continue;
            }
            for &j in &b_nz {
                if deg[i] + deg[j] > cap {
                    if univariate {
                        break;
                    }
                    continue;
                }
                if !univariate && !shape.fits(i, j) {
                    continue;
                }
                out[i + j] += a * &other.coeffs[j];
            }
        }
        TruncatedSeries { shape: shape.clone(), cap, coeffs: out }
    }

    /// `Σ_{k≥0} a^k`, requiring a zero constant term.
    pub fn quasi_inverse(&self) -> Result<Self, SeriesError> {
        if !self.coeffs[0].is_zero() {
            return Err(SeriesError::ConstantTermNonzero { node: None });
        }
        let shape = &self.shape;
        let a_nz: Vec<usize> = (1..self.coeffs.len()).filter(|&j| !self.coeffs[j].is_zero()).collect();
        let mut q = alloc::vec![BigInt::zero(); shape.len()];
        q[0] = BigInt::one();
        let univariate = shape.bounds.len() <= 1;
        for e in 1..shape.len() {
            if shape.degree[e] > self.cap {
                continue;
            }
            let mut acc = BigInt::zero();
            for &f in &a_nz {
                if f > e {
                    break;
                }
                let g = e - f;
                if !univariate && !shape.fits(f, g) {
                    continue;
                }
                if !q[g].is_zero() {
                    acc += &self.coeffs[f] * &q[g];
                }
            }
            q[e] = acc;
        }
        Ok(TruncatedSeries { shape: shape.clone(), cap: self.cap, coeffs: q })
    }

    /// Inverse of a series whose constant term is ±1.
    pub fn inverse_unit(&self) -> Option<Self> {
        let c = self.coeffs[0].clone();
        let sign = if c.is_one() {
            BigInt::one()
        } else if (-&c).is_one() {
            -BigInt::one()
        } else {
            return None;
        };
        // 1/p = s / (1 - (1 - s p)) with s = ±1.
        let one = TruncatedSeries::one(&self.shape).with_cap(self.cap);
        let rest = one.sub(&self.scale(&sign));
        let inv = rest.quasi_inverse().ok()?;
        Some(inv.scale(&sign))
    }

    /// Nonnegative coefficients as unsigned integers.
    pub fn to_unsigned(&self) -> Vec<BigUint> {
        self.coeffs.iter().map(|c| c.to_biguint().unwrap_or_default()).collect()
    }
}

/// Series evaluation of generating-function equations over a shared shape.
pub struct SeriesAlgebra {
    pub shape: Arc<SeriesShape>,
    pub cap: u32,
}

impl Algebra for SeriesAlgebra {
    type Elem = TruncatedSeries;
    type Error = SeriesError;

    fn zero(&self) -> TruncatedSeries {
        TruncatedSeries::zero(&self.shape).with_cap(self.cap)
    }

    fn one(&self) -> TruncatedSeries {
        TruncatedSeries::one(&self.shape).with_cap(self.cap)
    }

    fn monomial(&self, size: &SizeVector) -> TruncatedSeries {
        let exps: SmallVec<[u32; 2]> = size.as_slice().iter().map(|&n| n.min(u32::MAX as u64) as u32).collect();
        TruncatedSeries::monomial(&self.shape, &exps).with_cap(self.cap)
    }

    fn add(&self, a: &TruncatedSeries, b: &TruncatedSeries) -> TruncatedSeries {
        a.add(b)
    }

    fn mul(&self, a: &TruncatedSeries, b: &TruncatedSeries) -> TruncatedSeries {
        a.mul(b)
    }

    fn scale(&self, a: &TruncatedSeries, k: u64) -> TruncatedSeries {
        a.scale(&BigInt::from(k))
    }

    fn quasi_inverse(&self, node: NodeId, a: &TruncatedSeries) -> Result<TruncatedSeries, SeriesError> {
        a.quasi_inverse().map_err(|_| SeriesError::ConstantTermNonzero { node: Some(node) })
    }
}

/// Truncated counting series of every class.
#[derive(Clone, Debug)]
pub struct SeriesSolution {
    pub class_names: Vec<String>,
    pub variables: Vec<String>,
    pub series: Vec<TruncatedSeries>,
}

impl SeriesSolution {
    pub fn get(&self, class: &str) -> Option<&TruncatedSeries> {
        self.class_names.iter().position(|n| n == class).map(|i| &self.series[i])
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SolveMethod {
    #[default]
    Newton,
    /// Plain fixed-point iteration `Y ← H(Y)`, kept as an independent check.
    Naive,
}

fn solution(gfs: &GfSystem, series: Vec<TruncatedSeries>) -> SeriesSolution {
    SeriesSolution { class_names: gfs.class_names().to_vec(), variables: gfs.variables().to_vec(), series }
}

pub fn solve(gfs: &GfSystem, bounds: &[u32], method: SolveMethod) -> Result<SeriesSolution, SeriesError> {
    match method {
        SolveMethod::Newton => newton_solve(gfs, bounds),
        SolveMethod::Naive => naive_solve(gfs, bounds),
    }
}

pub fn newton_solve(gfs: &GfSystem, bounds: &[u32]) -> Result<SeriesSolution, SeriesError> {
    newton_solve_observed(gfs, bounds, |_, _| {})
}

/// Newton iteration with a callback after every step, receiving the
/// truncation cap used and the updated class series.
pub fn newton_solve_observed(
    gfs: &GfSystem,
    bounds: &[u32],
    mut observe: impl FnMut(u32, &[TruncatedSeries]),
) -> Result<SeriesSolution, SeriesError> {
    if bounds.len() != gfs.variables().len() {
        return Err(SeriesError::BoundsArity { expected: gfs.variables().len(), got: bounds.len() });
    }
    let shape = SeriesShape::new(bounds);
    let full = shape.max_degree();
    let n = gfs.class_count();
    let mut y: Vec<TruncatedSeries> = (0..n).map(|_| TruncatedSeries::zero(&shape).with_cap(0)).collect();
    let mut cap = 0u32;
    let mut steps = 0usize;
    let budget = 2 * (32 - full.leading_zeros() as usize) + 64;
    loop {
        // 1, 3, 7, ... then the full box degree until stable.
        cap = cap.saturating_mul(2).saturating_add(1).min(full);
        let alg = SeriesAlgebra { shape: shape.clone(), cap };
        let cur: Vec<TruncatedSeries> = y.into_iter().map(|s| s.with_cap(cap)).collect();
        let h = gfs.apply(&alg, &cur)?;
        let residual: Vec<TruncatedSeries> = h.iter().zip(&cur).map(|(a, b)| a.sub(b)).collect();
        if cap == full && residual.iter().all(TruncatedSeries::is_zero) {
            return Ok(solution(gfs, cur));
        }
        steps += 1;
        if steps > budget {
            return Err(SeriesError::NonConvergence { iterations: steps - 1 });
        }
        let jac = jacobian(gfs, &alg, &cur)?;
        let delta = solve_linear(&alg, jac, residual)?;
        y = cur.iter().zip(&delta).map(|(a, d)| a.add(d)).collect();
        observe(cap, &y);
    }
}

/// Rows of `I - ∂H/∂Y` as series.
fn jacobian(gfs: &GfSystem, alg: &SeriesAlgebra, y: &[TruncatedSeries]) -> Result<Vec<Vec<TruncatedSeries>>, SeriesError> {
    let n = y.len();
    let dual = Dual::new(alg, alloc::vec![None; n]);
    let seeded: Vec<_> = y.iter().enumerate().map(|(j, v)| dual.seeded(v.clone(), j)).collect();
    let h = gfs.apply(&dual, &seeded)?;
    Ok(h
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            e.tangent
                .into_iter()
                .enumerate()
                .map(|(j, d)| if i == j { alg.one().sub(&d) } else { d.neg() })
                .collect()
        })
        .collect())
}

/// Gaussian elimination over the series ring with unit pivots.
fn solve_linear(
    alg: &SeriesAlgebra,
    mut m: Vec<Vec<TruncatedSeries>>,
    mut rhs: Vec<TruncatedSeries>,
) -> Result<Vec<TruncatedSeries>, SeriesError> {
    let n = rhs.len();
    let mut inv_pivots = Vec::with_capacity(n);
    for k in 0..n {
        let row = (k..n)
            .find(|&r| {
                let c = m[r][k].constant_term();
                c.is_one() || (-c).is_one()
            })
            .ok_or(SeriesError::NonConvergence { iterations: 0 })?;
        m.swap(k, row);
        rhs.swap(k, row);
        let inv = m[k][k].inverse_unit().expect("unit pivot");
        for i in k + 1..n {
            if m[i][k].is_zero() {
                continue;
            }
            let f = m[i][k].mul(&inv);
            for j in k + 1..n {
                if !m[k][j].is_zero() {
                    m[i][j] = m[i][j].sub(&f.mul(&m[k][j]));
                }
            }
            rhs[i] = rhs[i].sub(&f.mul(&rhs[k]));
            m[i][k] = alg.zero();
        }
        inv_pivots.push(inv);
    }
    let mut x: Vec<TruncatedSeries> = alloc::vec![alg.zero(); n];
    for k in (0..n).rev() {
        let mut acc = rhs[k].clone();
        for j in k + 1..n {
            if !m[k][j].is_zero() {
                acc = acc.sub(&m[k][j].mul(&x[j]));
            }
        }
        x[k] = inv_pivots[k].mul(&acc);
    }
    Ok(x)
}

pub fn naive_solve(gfs: &GfSystem, bounds: &[u32]) -> Result<SeriesSolution, SeriesError> {
    if bounds.len() != gfs.variables().len() {
        return Err(SeriesError::BoundsArity { expected: gfs.variables().len(), got: bounds.len() });
    }
    let shape = SeriesShape::new(bounds);
    let budget = (gfs.class_count() + 1) * (shape.max_degree() as usize + 1) + 1;
    iterate(gfs, &shape, budget).map(|y| solution(gfs, y)).map_err(|e| match e {
        IterError::Series(e) => e,
        IterError::Budget(iterations) => SeriesError::NonConvergence { iterations },
    })
}

enum IterError {
    Series(SeriesError),
    Budget(usize),
}

fn iterate(gfs: &GfSystem, shape: &Arc<SeriesShape>, budget: usize) -> Result<Vec<TruncatedSeries>, IterError> {
    let alg = SeriesAlgebra { shape: shape.clone(), cap: shape.max_degree() };
    let mut y: Vec<TruncatedSeries> = (0..gfs.class_count()).map(|_| alg.zero()).collect();
    for _ in 0..budget {
        let next = gfs.apply(&alg, &y).map_err(IterError::Series)?;
        if next == y {
            return Ok(y);
        }
        y = next;
    }
    Err(IterError::Budget(budget))
}

/// Whether fixed-point iteration from zero stabilizes within `budget` steps
/// at the given box; on failure returns the number of steps tried.
pub(crate) fn stabilizes(gfs: &GfSystem, bounds: &[u32], budget: usize) -> Result<(), usize> {
    let shape = SeriesShape::new(bounds);
    match iterate(gfs, &shape, budget) {
        Ok(_) => Ok(()),
        Err(IterError::Budget(n)) => Err(n),
        Err(IterError::Series(_)) => Err(0),
    }
}

/// Coefficients `c_0..=c_n` of a class in a univariate system.
pub fn counting_sequence(gfs: &GfSystem, class: &str, n: u32) -> Result<Vec<BigUint>, SeriesError> {
    let vars = gfs.variables();
    if vars.len() > 1 {
        return Err(SeriesError::MissingBound(vars[0].clone()));
    }
    let c = gfs.class_id(class).ok_or_else(|| SeriesError::UnknownClass(class.into()))?;
    if vars.is_empty() {
        // No atoms at all: only size-zero objects.
        let sol = newton_solve(gfs, &[])?;
        let mut out = alloc::vec![BigUint::zero(); n as usize + 1];
        out[0] = sol.series[c.index()].to_unsigned()[0].clone();
        return Ok(out);
    }
    let sol = newton_solve(gfs, &[n])?;
    Ok(sol.series[c.index()].to_unsigned())
}

/// Coefficients in `var` up to `n`, summed over the other variables'
/// exponents within the explicitly given bounds.
pub fn counting_sequence_in(
    gfs: &GfSystem,
    class: &str,
    var: &str,
    n: u32,
    others: &[(String, u32)],
) -> Result<Vec<BigUint>, SeriesError> {
    let c = gfs.class_id(class).ok_or_else(|| SeriesError::UnknownClass(class.into()))?;
    let vi = gfs.variable_index(var).ok_or_else(|| SeriesError::UnknownVariable(var.into()))?;
    let mut bounds = alloc::vec![None; gfs.variables().len()];
    bounds[vi] = Some(n);
    for (name, b) in others {
        let i = gfs.variable_index(name).ok_or_else(|| SeriesError::UnknownVariable(name.clone()))?;
        bounds[i] = Some(*b);
    }
    let bounds: Vec<u32> = bounds
        .iter()
        .enumerate()
        .map(|(i, b)| b.ok_or_else(|| SeriesError::MissingBound(gfs.variables()[i].clone())))
        .collect::<Result<_, _>>()?;
    let sol = newton_solve(gfs, &bounds)?;
    let mut out = alloc::vec![BigInt::zero(); n as usize + 1];
    for (exps, coeff) in sol.series[c.index()].nonzero() {
        out[exps[vi] as usize] += coeff;
    }
    Ok(out.into_iter().map(|c| c.to_biguint().unwrap_or_default()).collect())
}

/// Full coefficient table of a class within per-variable bounds.
pub fn counting_table(gfs: &GfSystem, class: &str, bounds: &[u32]) -> Result<TruncatedSeries, SeriesError> {
    let c: ClassId = gfs.class_id(class).ok_or_else(|| SeriesError::UnknownClass(class.into()))?;
    let sol = newton_solve(gfs, bounds)?;
    Ok(sol.series[c.index()].clone())
}

/// Helper for tests and callers wanting signed coefficients as decimal strings.
pub fn decimal_strings(coeffs: &[BigUint]) -> Vec<String> {
    coeffs.iter().map(|c| alloc::format!("{c}")).collect()
}

#[cfg(test)]
fn is_nonnegative(s: &TruncatedSeries) -> bool {
    s.coeffs.iter().all(|c| *c >= BigInt::zero())
}

//! Control-parameter tuning: find a point whose expected size matches a target.

use alloc::string::String;
use alloc::vec::Vec;

use crate::gf::GfSystem;
use crate::interval::{Interval, Precision, Ratio};
use crate::oracle::{self, OracleConfig, OracleError, Point};
use crate::system::ClassId;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TuneError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("target is not reachable inside the domain of convergence")]
    Infeasible { best: Option<Point> },
    #[error("tuning did not converge within {budget} iterations")]
    NoConvergence { budget: usize, best: Option<Point> },
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("invalid target for `{0}`")]
    InvalidTarget(String),
}

#[derive(Clone, Debug)]
pub struct TuneConfig {
    /// Relative stopping tolerance on expected sizes.
    pub tolerance: f64,
    /// Maximum number of oracle probes.
    pub budget: usize,
    pub precision: Precision,
    /// Significant decimal digits of the returned point.
    pub digits: u32,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig { tolerance: 0.005, budget: 200, precision: 53, digits: 12 }
    }
}

#[derive(Clone, Debug)]
pub struct Tuned {
    pub point: Point,
    /// Expected size enclosures at `point`, one per variable.
    pub expected: Vec<Interval>,
}

/// `E_v(x) = x_v·∂C/∂x_v / C` for every variable, as enclosures.
pub fn expected_size(gfs: &GfSystem, class: ClassId, point: &Point, precision: Precision) -> Result<Vec<Interval>, OracleError> {
    let values = oracle::eval_system(gfs, point, &OracleConfig::new(precision))?;
    let d = oracle::eval_derivatives(gfs, point, &values)?;
    let y = values.class(class);
    let p = values.precision;
    d.theta[class.index()]
        .iter()
        .map(|t| t.div(y, p + 8).map(|e| e.round_out(p)).ok_or(OracleError::SingularJacobian { precision: p }))
        .collect()
}

fn ln(x: f64) -> f64 {
    <f64 as num_traits::Float>::ln(x)
}

fn exp(x: f64) -> f64 {
    <f64 as num_traits::Float>::exp(x)
}

struct Probe<'a> {
    gfs: &'a GfSystem,
    class: ClassId,
    /// Parameters of untargeted variables, in system order.
    fixed: Vec<Option<f64>>,
    targeted: Vec<usize>,
    cfg: &'a TuneConfig,
    used: usize,
}

impl Probe<'_> {
    fn point(&self, xs: &[f64]) -> Option<Point> {
        let mut values = Vec::with_capacity(self.fixed.len());
        let mut it = xs.iter();
        for f in &self.fixed {
            let x = match f {
                Some(x) => *x,
                None => *it.next()?,
            };
            if !(x.is_finite() && x > 0.0) {
                return None;
            }
            values.push(Ratio::from_f64_decimal(x, self.cfg.digits)?);
        }
        Some(Point::from_values(values))
    }

    /// Expected sizes of the targeted variables, or `None` outside the domain.
    fn eval(&mut self, xs: &[f64]) -> Result<Option<Vec<f64>>, TuneError> {
        if self.used >= self.cfg.budget {
            return Err(TuneError::NoConvergence { budget: self.cfg.budget, best: None });
        }
        self.used += 1;
        let Some(point) = self.point(xs) else { return Ok(None) };
        match expected_size(self.gfs, self.class, &point, self.cfg.precision) {
            Ok(e) => Ok(Some(self.targeted.iter().map(|v| e[*v].to_f64()).collect())),
            Err(_) => Ok(None),
        }
    }

    fn finish(&self, xs: &[f64]) -> Result<Tuned, TuneError> {
        let point = self.point(xs).ok_or(TuneError::Infeasible { best: None })?;
        let expected = expected_size(self.gfs, self.class, &point, self.cfg.precision)?;
        Ok(Tuned { point, expected })
    }
}

/// Tunes `class` so that its expected size in each targeted variable is
/// within `cfg.tolerance` of the target. Variables without a target, or
/// with target zero, are pinned at 1.
pub fn tune(gfs: &GfSystem, class: &str, targets: &[(String, Ratio)], cfg: &TuneConfig) -> Result<Tuned, TuneError> {
    let c = gfs.class_id(class).ok_or_else(|| TuneError::UnknownClass(class.into()))?;
    let mut fixed = alloc::vec![Some(1.0); gfs.variables().len()];
    let mut goal = alloc::vec![0.0; gfs.variables().len()];
    for (name, t) in targets {
        let v = gfs.variable_index(name).ok_or_else(|| TuneError::UnknownVariable(name.clone()))?;
        let t = t.to_f64();
        if !t.is_finite() {
            return Err(TuneError::InvalidTarget(name.clone()));
        }
        if t > 0.0 {
            fixed[v] = None;
            goal[v] = t;
        }
    }
    let targeted: Vec<usize> = (0..fixed.len()).filter(|v| fixed[*v].is_none()).collect();
    let goal: Vec<f64> = targeted.iter().map(|v| goal[*v]).collect();
    let mut probe = Probe { gfs, class: c, fixed, targeted, cfg, used: 0 };
    match goal.len() {
        0 => probe.finish(&[]),
        1 => tune_univariate(&mut probe, goal[0]),
        _ => tune_multivariate(&mut probe, &goal),
    }
}

fn close(e: f64, t: f64, tol: f64) -> bool {
    (e - t).abs() <= tol * t
}

fn tune_univariate(probe: &mut Probe<'_>, target: f64) -> Result<Tuned, TuneError> {
    let tol = probe.cfg.tolerance;
    let infeasible = |probe: &Probe<'_>, x: Option<f64>| TuneError::Infeasible { best: x.and_then(|x| probe.point(&[x])) };
    // Bracket [lo, hi] with E(lo) < target and E(hi) > target or undefined.
    let mut x = 1.0f64;
    let (mut lo, mut hi);
    match probe.eval(&[x])? {
        Some(e) if close(e[0], target, tol) => return probe.finish(&[x]),
        Some(e) if e[0] < target => {
            lo = x;
            loop {
                x *= 2.0;
                if x > 1e300 {
                    return Err(infeasible(probe, Some(lo)));
                }
                match probe.eval(&[x])? {
                    Some(e) if close(e[0], target, tol) => return probe.finish(&[x]),
                    Some(e) if e[0] < target => lo = x,
                    _ => {
                        hi = x;
                        break;
                    }
                }
            }
        }
        _ => {
            hi = x;
            loop {
                x *= 0.5;
                if x < 1e-300 {
                    return Err(infeasible(probe, None));
                }
                match probe.eval(&[x])? {
                    Some(e) if close(e[0], target, tol) => return probe.finish(&[x]),
                    Some(e) if e[0] < target => {
                        lo = x;
                        break;
                    }
                    _ => hi = x,
                }
            }
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(infeasible(probe, Some(lo)));
        }
        match probe.eval(&[mid])? {
            Some(e) if close(e[0], target, tol) => return probe.finish(&[mid]),
            Some(e) if e[0] < target => lo = mid,
            _ => hi = mid,
        }
    }
}

/// Solves `a·x = b` by Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|i, j| a[*i][col].abs().total_cmp(&a[*j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for k in col..n {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = alloc::vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn residual(e: &[f64], goal: &[f64]) -> Vec<f64> {
    e.iter().zip(goal).map(|(e, t)| ln(*e) - ln(*t)).collect()
}

fn norm(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum::<f64>()
}

fn tune_multivariate(probe: &mut Probe<'_>, goal: &[f64]) -> Result<Tuned, TuneError> {
    let tol = probe.cfg.tolerance;
    let k = goal.len();
    let done = |e: &[f64]| e.iter().zip(goal).all(|(e, t)| close(*e, *t, tol));
    let to_x = |s: &[f64]| s.iter().map(|s| exp(*s)).collect::<Vec<_>>();
    let wrap = |probe: &Probe<'_>, s: &[f64], err: TuneError| match err {
        TuneError::NoConvergence { budget, .. } => TuneError::NoConvergence { budget, best: probe.point(&to_x(s)) },
        e => e,
    };

    // Start on the diagonal at the largest power of two inside the domain.
    let mut s = alloc::vec![0.0; k];
    let mut e = loop {
        match probe.eval(&to_x(&s)).map_err(|err| wrap(probe, &s, err))? {
            Some(e) => break e,
            None => s.iter_mut().for_each(|x| *x -= core::f64::consts::LN_2),
        }
        if s[0] < -700.0 {
            return Err(TuneError::Infeasible { best: None });
        }
    };
    let h = 1e-4;
    loop {
        if done(&e) {
            return probe.finish(&to_x(&s));
        }
        let r = residual(&e, goal);
        let step = newton_step(probe, &s, h).map_err(|err| wrap(probe, &s, err))?;
        let mut improved = false;
        if let Some(jac) = step {
            if let Some(delta) = solve_dense(jac, r.iter().map(|x| -x).collect()) {
                let mut lambda = 1.0;
                for _ in 0..20 {
                    let cand: Vec<f64> = s.iter().zip(&delta).map(|(s, d)| s + lambda * d).collect();
                    if let Some(ec) = probe.eval(&to_x(&cand)).map_err(|err| wrap(probe, &s, err))? {
                        if norm(&residual(&ec, goal)) < norm(&r) {
                            s = cand;
                            e = ec;
                            improved = true;
                            break;
                        }
                    }
                    lambda *= 0.5;
                }
            }
        }
        if !improved {
            // Stagnation: one sweep of coordinate bisection.
            let before = norm(&r);
            for v in 0..k {
                s[v] = bisect_coordinate(probe, &s, v, goal[v]).map_err(|err| wrap(probe, &s, err))?;
            }
            e = probe
                .eval(&to_x(&s))
                .map_err(|err| wrap(probe, &s, err))?
                .ok_or(TuneError::Infeasible { best: probe.point(&to_x(&s)) })?;
            if norm(&residual(&e, goal)) >= before && !done(&e) {
                return Err(TuneError::Infeasible { best: probe.point(&to_x(&s)) });
            }
        }
    }
}

/// Jacobian of `ln E` with respect to log parameters, by central differences.
fn newton_step(probe: &mut Probe<'_>, s: &[f64], h: f64) -> Result<Option<Vec<Vec<f64>>>, TuneError> {
    let k = s.len();
    let mut jac = alloc::vec![alloc::vec![0.0; k]; k];
    for w in 0..k {
        let mut up = s.to_vec();
        let mut down = s.to_vec();
        up[w] += h;
        down[w] -= h;
        let xu: Vec<f64> = up.iter().map(|x| exp(*x)).collect();
        let xd: Vec<f64> = down.iter().map(|x| exp(*x)).collect();
        let (Some(eu), Some(ed)) = (probe.eval(&xu)?, probe.eval(&xd)?) else { return Ok(None) };
        for v in 0..k {
            jac[v][w] = (ln(eu[v]) - ln(ed[v])) / (2.0 * h);
        }
    }
    Ok(Some(jac))
}

/// Bisects the log parameter `v` so that `E_v` approaches its target, the
/// other parameters held fixed. Returns the best value found.
fn bisect_coordinate(probe: &mut Probe<'_>, s: &[f64], v: usize, target: f64) -> Result<f64, TuneError> {
    let tol = probe.cfg.tolerance;
    let mut lo = s[v] - 8.0;
    let mut hi = s[v] + 8.0;
    let mut cur = s.to_vec();
    for _ in 0..24 {
        let mid = 0.5 * (lo + hi);
        cur[v] = mid;
        let xs: Vec<f64> = cur.iter().map(|x| exp(*x)).collect();
        match probe.eval(&xs)? {
            Some(e) if close(e[v], target, tol) => return Ok(mid),
            Some(e) if e[v] < target => lo = mid,
            _ => hi = mid,
        }
    }
    Ok(lo)
}

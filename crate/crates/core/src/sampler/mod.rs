//! Exact Boltzmann sampling: choice tables, the attempt loop with precision
//! escalation, and deferred construction from choice traces.

mod build;
mod engine;
mod random;
mod table;

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

pub use build::{build, AtomRef, BuildError, Builder, Term, TermBuilder, TreeBuilder};
pub use engine::{
    replay, verify_trace, Attempt, ChoiceTrace, CompiledSampler, RejectReason, Rejection, SampleError, SampleStats, Sampler,
    SamplerConfig, TraceDecision, Window,
};
pub use random::{attempt_rng, EntropyExhausted, RandomReal};
pub use table::{ChoiceTable, Decision, TableKind};

use crate::gf::GfSystem;
use crate::interval::Ratio;
use crate::oracle::Point;
use crate::series;
use crate::system::ClassId;
use crate::tuner::{self, TuneConfig, Tuned};

/// How the control point is chosen.
#[derive(Clone, Debug)]
pub enum Control {
    Point(Point),
    /// Expected sizes per variable; the point is tuned.
    Target(Vec<(String, Ratio)>),
}

#[derive(Clone, Debug)]
pub struct SampleRequest {
    pub class: String,
    pub n: usize,
    pub control: Control,
    /// Relative window half-width around the targets.
    pub tolerance: Option<Ratio>,
    /// Explicit window, overriding the one derived from targets.
    pub window: Option<Window>,
    pub seed: u64,
    pub config: SamplerConfig,
    pub tune: TuneConfig,
    /// Gives up after this many attempts.
    pub max_attempts: Option<u64>,
}

impl SampleRequest {
    pub fn at_point(class: &str, point: Point, n: usize) -> Self {
        SampleRequest {
            class: class.into(),
            n,
            control: Control::Point(point),
            tolerance: None,
            window: None,
            seed: 0,
            config: SamplerConfig::default(),
            tune: TuneConfig::default(),
            max_attempts: None,
        }
    }

    pub fn with_target(class: &str, target: Vec<(String, Ratio)>, tolerance: Option<Ratio>, n: usize) -> Self {
        SampleRequest { control: Control::Target(target), tolerance, ..SampleRequest::at_point(class, Point::from_values(Vec::new()), n) }
    }
}

#[derive(Clone, Debug)]
pub struct SampleOutput<T> {
    pub objects: Vec<T>,
    pub traces: Vec<ChoiceTrace>,
    pub point: Point,
    pub tuned: Option<Tuned>,
    pub window: Option<Window>,
    pub stats: SampleStats,
}

/// Box sizes up to which window feasibility is decided by exact counting.
const COUNTING_LIMIT: u64 = 512;

/// Whether some object of `class` has a size inside `window`, decided by
/// size bounds and, for small windows, by counting.
pub fn window_feasible(gfs: &GfSystem, class: ClassId, window: &Window) -> bool {
    if window.is_empty() {
        return false;
    }
    let b = gfs.bounds(gfs.root(class));
    for v in 0..window.lo.len() {
        if window.hi[v].is_some_and(|h| b.min.get(v) > h) || b.max[v].is_some_and(|m| m < window.lo[v]) {
            return false;
        }
    }
    let Some(his) = window.hi.iter().copied().collect::<Option<Vec<u64>>>() else { return true };
    let cells = his.iter().try_fold(1u64, |acc, h| acc.checked_mul(h + 1));
    if !cells.is_some_and(|c| c <= COUNTING_LIMIT) {
        return true;
    }
    let bounds: Vec<u32> = his.iter().map(|h| *h as u32).collect();
    match series::counting_table(gfs, &gfs.class_names()[class.index()], &bounds) {
        Ok(t) => t.nonzero().any(|(e, _)| e.iter().zip(&window.lo).all(|(e, l)| u64::from(*e) >= *l)),
        Err(_) => true,
    }
}

/// Draws `request.n` accepted objects, tuning first when targets are given,
/// and builds each through `builder`. Attempt `i` uses entropy stream `i`.
pub fn sample<B>(gfs: Arc<GfSystem>, request: &SampleRequest, builder: &mut B) -> Result<SampleOutput<B::Output>, SampleError>
where
    B: Builder,
    B::Error: core::fmt::Debug + core::fmt::Display,
{
    let class = gfs.class_id(&request.class).ok_or_else(|| SampleError::UnknownClass(request.class.clone()))?;
    let (point, tuned, derived) = match &request.control {
        Control::Point(p) => (p.clone(), None, None),
        Control::Target(t) => {
            let tuned = tuner::tune(&gfs, &request.class, t, &request.tune)?;
            let window = request.tolerance.as_ref().map(|tol| {
                let mut targets = alloc::vec![None; gfs.variables().len()];
                for (name, v) in t {
                    if let Some(i) = gfs.variable_index(name) {
                        targets[i] = Some(v.clone());
                    }
                }
                Window::from_targets(&targets, tol)
            });
            (tuned.point.clone(), Some(tuned), window)
        }
    };
    let window = request.window.clone().or(derived);
    if let Some(w) = &window {
        if !window_feasible(&gfs, class, w) {
            return Err(SampleError::WindowEmpty);
        }
    }
    let mut sampler = Sampler::new(gfs.clone(), &point, request.config.clone())?;
    let mut traces = Vec::with_capacity(request.n);
    let mut attempt = 0u64;
    while traces.len() < request.n {
        if request.max_attempts.is_some_and(|m| attempt >= m) {
            return Err(SampleError::AttemptLimit { attempts: attempt });
        }
        let mut rng = attempt_rng(request.seed, attempt);
        attempt += 1;
        if let Attempt::Accepted(t) = sampler.attempt(class, window.as_ref(), &mut rng)? {
            traces.push(t);
        }
    }
    let objects = traces
        .iter()
        .map(|t| {
            build(&gfs, t, builder).map_err(|e| match e {
                BuildError::Builder { node, position, error } => SampleError::Builder { node, position, message: error.to_string() },
                BuildError::Malformed { position } => SampleError::Builder { node: gfs.root(class), position, message: "malformed trace".into() },
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(SampleOutput { objects, traces, point, tuned, window, stats: *sampler.stats() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_str;
    use crate::system::transfer;

    fn gfs(text: &str) -> Arc<GfSystem> {
        Arc::new(transfer(&parse_str(text).unwrap()).unwrap())
    }

    fn at(g: &GfSystem, x: &str) -> Point {
        Point::new(g, &[("z".into(), x.parse().unwrap())]).unwrap()
    }

    #[test]
    fn single_atom_has_no_decisions() {
        let g = gfs("A = z");
        let mut s = Sampler::new(g.clone(), &at(&g, "0.3"), SamplerConfig::default()).unwrap();
        let Attempt::Accepted(t) = s.attempt(ClassId(0), None, &mut attempt_rng(1, 0)).unwrap() else { panic!() };
        assert!(t.decisions.is_empty());
        assert_eq!(t.size.as_slice(), &[1]);
        assert_eq!(build(&g, &t, &mut TermBuilder).unwrap(), "z");
    }

    #[test]
    fn even_sizes_are_infeasible() {
        let g = gfs("B = z + (z*B*B)");
        assert!(!window_feasible(&g, ClassId(0), &Window::exact(&[2])));
        assert!(window_feasible(&g, ClassId(0), &Window::exact(&[3])));
        let mut req = SampleRequest::at_point("B", at(&g, "0.2"), 1);
        req.window = Some(Window::exact(&[2]));
        assert!(matches!(sample(g.clone(), &req, &mut TermBuilder), Err(SampleError::WindowEmpty)));
        let mut s = Sampler::new(g.clone(), &at(&g, "0.2"), SamplerConfig::default()).unwrap();
        for i in 0..200 {
            let a = s.attempt(ClassId(0), Some(&Window::exact(&[2])), &mut attempt_rng(3, i)).unwrap();
            assert!(matches!(a, Attempt::Rejected(_)));
        }
    }

    #[test]
    fn terms_and_empty_sequences() {
        let g = gfs("T = z * Seq(T)");
        let req = SampleRequest::at_point("T", at(&g, "0.2"), 50);
        let out = sample(g.clone(), &req, &mut TermBuilder).unwrap();
        assert!(out.objects.iter().any(|o| o == "Prod(z, Seq())"));
        for (o, t) in out.objects.iter().zip(&out.traces) {
            assert_eq!(o.matches('z').count() as u64, t.size.get(0));
        }
    }

    #[test]
    fn low_precision_escalates_and_replays() {
        let g = gfs("B = z + (B*B)");
        let config = SamplerConfig { precision: 8, ..SamplerConfig::default() };
        let mut s = Sampler::new(g.clone(), &at(&g, "0.2"), config).unwrap();
        for i in 0..2000 {
            if let Attempt::Accepted(t) = s.attempt(ClassId(0), None, &mut attempt_rng(9, i)).unwrap() {
                let level = (t.precision / 8).trailing_zeros() as usize;
                let compiled = s.level(level).unwrap().clone();
                verify_trace(&compiled, &t).unwrap();
            }
        }
        assert!(s.stats().escalations > 0);
    }

    #[test]
    fn targeted_sampling_stays_in_window() {
        let g = gfs("B = z + (z*B*B)");
        let req = SampleRequest::with_target("B", alloc::vec![("z".into(), "100".parse().unwrap())], Some("0.1".parse().unwrap()), 5);
        let out = sample(g, &req, &mut TermBuilder).unwrap();
        for t in &out.traces {
            assert!((90..=110).contains(&t.size.get(0)));
        }
    }
}

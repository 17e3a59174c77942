//! Sampler invariants: escalation stability, early-rejection equivalence,
//! replay determinism and sequence truncation.

use std::sync::Arc;

use combkit_core::gf::GfSystem;
use combkit_core::interval::{Float, Interval, Round};
use combkit_core::oracle::Point;
use combkit_core::sampler::{
    attempt_rng, build, Attempt, ChoiceTable, CompiledSampler, Decision, Sampler, SamplerConfig, TermBuilder, TreeBuilder, Window,
};
use combkit_core::system::{ClassId, NodeId};
use combkit_core::{parse_str, transfer};
use proptest::prelude::*;

fn gfs(text: &str) -> Arc<GfSystem> {
    Arc::new(transfer(&parse_str(text).unwrap()).unwrap())
}

fn at(g: &GfSystem, x: &str) -> Point {
    Point::new(g, &[("z".into(), x.parse().unwrap())]).unwrap()
}

#[test]
fn resolved_decisions_survive_every_higher_precision() {
    let g = gfs("B = z + (B*B)");
    let config = SamplerConfig { precision: 8, ..SamplerConfig::default() };
    let mut s = Sampler::new(g.clone(), &at(&g, "0.2"), config).unwrap();
    let levels: Vec<Arc<CompiledSampler>> = (0..5).map(|i| s.level(i).unwrap().clone()).collect();
    let mut extra = attempt_rng(u64::MAX, 0);
    let mut checked = 0;
    for i in 0..10_000 {
        let Attempt::Accepted(mut t) = s.attempt(ClassId(0), None, &mut attempt_rng(11, i)).unwrap() else { unreachable!() };
        for level in levels.iter().filter(|l| l.precision() >= t.precision) {
            for d in &mut t.decisions {
                d.real.extend_to(level.precision(), &mut extra).unwrap();
                let table = level.table(d.node).unwrap();
                assert_eq!(table.decide(&d.real), Decision::Outcome(d.outcome));
                checked += 1;
            }
        }
    }
    assert!(checked > 10_000);
    assert!(s.stats().escalations > 0);
}

fn outcomes(s: &mut Sampler, window: &Window, seed: u64, n: u64) -> Vec<Attempt> {
    (0..n).map(|i| s.attempt(ClassId(0), Some(window), &mut attempt_rng(seed, i)).unwrap()).collect()
}

#[test]
fn early_rejection_changes_nothing_observable() {
    let g = gfs("B = z + (z*B*B)");
    let point = at(&g, "0.48");
    let window = Window::new(&[40], &[Some(60)]);
    let mut early = Sampler::new(g.clone(), &point, SamplerConfig::default()).unwrap();
    let mut base = Sampler::new(g.clone(), &point, SamplerConfig { early_rejection: false, ..SamplerConfig::default() }).unwrap();
    let a = outcomes(&mut early, &window, 5, 10_000);
    let b = outcomes(&mut base, &window, 5, 10_000);
    for (x, y) in a.iter().zip(&b) {
        match (x, y) {
            (Attempt::Accepted(x), Attempt::Accepted(y)) => assert_eq!(x, y),
            (Attempt::Rejected(_), Attempt::Rejected(_)) => {}
            _ => panic!("outcomes differ"),
        }
    }
    assert!(early.stats().early_aborts > 0);
    assert_eq!(base.stats().early_aborts, 0);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn equivalence_holds_for_random_windows(seed in any::<u64>(), lo in 1u64..30, width in 0u64..30, tree in 0usize..3) {
        let (text, x) = [("B = z + (z*B*B)", "0.45"), ("T = z * Seq(T)", "0.2"), ("M = C + (C*M) + (C*M*M)\nC = z + u", "0.1")][tree];
        let g = gfs(text);
        let point = Point::new(&g, &g.variables().iter().map(|v| (v.clone(), x.parse().unwrap())).collect::<Vec<_>>()).unwrap();
        let vars = g.variables().len();
        let mut window = Window::unbounded(vars);
        window.lo[0] = lo;
        window.hi[0] = Some(lo + width);
        let mut early = Sampler::new(g.clone(), &point, SamplerConfig::default()).unwrap();
        let mut base = Sampler::new(g.clone(), &point, SamplerConfig { early_rejection: false, ..SamplerConfig::default() }).unwrap();
        let a = outcomes(&mut early, &window, seed, 300);
        let b = outcomes(&mut base, &window, seed, 300);
        for (x, y) in a.iter().zip(&b) {
            match (x, y) {
                (Attempt::Accepted(x), Attempt::Accepted(y)) => prop_assert_eq!(x, y),
                (Attempt::Rejected(_), Attempt::Rejected(_)) => {}
                _ => prop_assert!(false, "outcomes differ"),
            }
        }
    }

    #[test]
    fn builds_are_pure(seed in any::<u64>()) {
        let g = gfs("T = z * Seq(T + u)");
        let point = Point::new(&g, &[("z".into(), "0.2".parse().unwrap()), ("u".into(), "0.1".parse().unwrap())]).unwrap();
        let mut s = Sampler::new(g.clone(), &point, SamplerConfig::default()).unwrap();
        let Attempt::Accepted(t) = s.attempt(ClassId(0), None, &mut attempt_rng(seed, 0)).unwrap() else { unreachable!() };
        prop_assert_eq!(build(&g, &t, &mut TermBuilder).unwrap(), build(&g, &t, &mut TermBuilder).unwrap());
        prop_assert_eq!(build(&g, &t, &mut TreeBuilder).unwrap(), build(&g, &t, &mut TreeBuilder).unwrap());
    }

    #[test]
    fn sequence_tables_stop_where_bounds_overlap(a in 0.001f64..0.999, w in 0.0f64..1e-3, p in 8u32..200) {
        let lo = Float::from_f64(a);
        let hi = Float::from_f64((a + w).min(0.9999));
        let t = ChoiceTable::sequence(NodeId(0), &Interval::new(lo.clone(), hi.clone()), p);
        let k = t.len();
        prop_assert!(k >= 1);
        // Lower bound of outcome k (0-based), built the same way as the table.
        let q = Float::one().sub(&hi, p, Round::Down);
        let mut pow = Float::one();
        for _ in 0..k {
            pow = pow.mul(&lo, p, Round::Down);
        }
        let next = t.lower[k - 1].add(&q.mul(&pow, p, Round::Down), p, Round::Down);
        prop_assert!(t.upper[k - 1] >= next || k == 1 << 20);
        for j in 1..k {
            prop_assert!(t.upper[j - 1] < t.lower[j]);
        }
        let mut rng = attempt_rng(a.to_bits(), p as u64);
        for _ in 0..64 {
            let mut r = combkit_core::sampler::RandomReal::new();
            r.extend_to(p, &mut rng).unwrap();
            if let Decision::Outcome(o) = t.decide(&r) {
                prop_assert!((o as usize) < k);
            }
        }
    }
}

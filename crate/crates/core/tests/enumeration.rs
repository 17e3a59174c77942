//! Newton and naive enumeration against exhaustive object generation.

#[path = "common/brute.rs"]
mod brute;

use brute::{brute_force, counts, total, MAX_TOTAL, SYSTEMS};
use combkit_core::series::{naive_solve, newton_solve};
use combkit_core::{parse_str, transfer};

#[test]
fn newton_naive_and_brute_force_agree() {
    for text in SYSTEMS {
        let sys = parse_str(text).unwrap();
        assert!(sys.validate().is_ok(), "{text}");
        let gfs = transfer(&sys).unwrap();
        let bounds = vec![MAX_TOTAL as u32; sys.variables().len()];
        let newton = newton_solve(&gfs, &bounds).unwrap();
        let naive = naive_solve(&gfs, &bounds).unwrap();
        let brute = brute_force(&sys);
        for (c, name) in sys.class_names().iter().enumerate() {
            let expected = counts(&brute[c]);
            let ns = newton.get(name).unwrap();
            let fs = naive.get(name).unwrap();
            assert_eq!(ns.coeffs(), fs.coeffs(), "{text}: class {name}");
            for (exps, coeff) in ns.nonzero() {
                let size: Vec<u64> = exps.iter().map(|e| u64::from(*e)).collect();
                if total(&size) <= MAX_TOTAL {
                    let want = expected.get(&size).copied().unwrap_or(0);
                    assert_eq!(coeff.to_string(), want.to_string(), "{text}: {name} at {size:?}");
                }
            }
            for (size, n) in &expected {
                let exps: Vec<u32> = size.iter().map(|s| *s as u32).collect();
                assert_eq!(ns.coeff(&exps).to_string(), n.to_string(), "{text}: {name} at {size:?}");
            }
        }
    }
}

#[test]
fn min_sizes_match_brute_force() {
    for text in SYSTEMS {
        let sys = parse_str(text).unwrap();
        let brute = brute_force(&sys);
        let mins = sys.min_sizes();
        for c in 0..sys.class_count() {
            let min = mins[c].as_ref().unwrap();
            for v in 0..sys.variables().len() {
                let b = brute[c].iter().map(|(_, s)| s[v]).min().unwrap();
                assert_eq!(min.get(v), b, "{text}: class {c} var {v}");
            }
        }
    }
}

#[test]
fn validation_accepts_exactly_the_finite_systems() {
    for text in SYSTEMS {
        assert!(parse_str(text).unwrap().validate().is_ok(), "{text}");
    }
    // Infinitely many objects of one size, or no objects at all.
    for text in ["A = Seq(A)", "A = A * z", "A = z + Seq(u*u + B)\nB = Seq(z)", "A = B\nB = A"] {
        assert!(!parse_str(text).unwrap().validate().is_ok(), "{text}");
    }
}

//! Experiment harnesses: conditioned uniformity and paired early-rejection
//! benchmarks.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use combkit_core::gf::GfSystem;
use combkit_core::interval::Ratio;
use combkit_core::oracle::Point;
use combkit_core::sampler::{attempt_rng, Attempt, CompiledSampler, SampleError, Sampler, SamplerConfig, Window};
use combkit_core::series::{counting_sequence, SeriesError};
use combkit_core::system::ClassId;
use combkit_core::tuner::{tune, TuneConfig, TuneError};
use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::batch::Batch;
use crate::stats::{bootstrap_mean_ci, chi_square_sparse, mean, ChiSquare};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Tune(#[from] TuneError),
    #[error("size {size} has {count} structures; at least 2 are needed")]
    TooFewCategories { size: u64, count: BigUint },
    #[error("the harness needs a univariate class")]
    Multivariate,
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("size {size}: {observed} distinct choice sequences exceed the {count} structures")]
    Ambiguous { size: u64, observed: usize, count: BigUint },
    #[error("stopped after {attempts} attempts with too few samples")]
    AttemptLimit { attempts: u64 },
}

#[derive(Clone, Debug)]
pub struct UniformityConfig {
    pub class: String,
    pub sizes: (u64, u64),
    /// Conditioned samples per size.
    pub samples: u64,
    pub seed: u64,
    /// Control point; tuned to expected size `sizes.1` when absent.
    pub point: Option<Point>,
    pub sampler: SamplerConfig,
    pub max_attempts: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct UniformityRow {
    pub size: u64,
    pub structures: BigUint,
    pub observed: usize,
    pub samples: u64,
    pub chi_square: ChiSquare,
}

#[derive(Clone, Debug)]
pub struct Uniformity {
    pub point: Point,
    pub rows: Vec<UniformityRow>,
    pub attempts: u64,
    pub escalations: u64,
    pub seconds: f64,
}

fn class_id(gfs: &GfSystem, name: &str) -> Result<ClassId, HarnessError> {
    gfs.class_id(name).ok_or_else(|| HarnessError::UnknownClass(name.into()))
}

/// Draws window-conditioned samples, bins them by size and keys each by its
/// choice sequence, which identifies the structure in an unambiguous
/// grammar. The first `samples` of each size, by attempt index, are tested
/// against the uniform law over all `c_n` structures.
pub fn uniformity(gfs: Arc<GfSystem>, cfg: &UniformityConfig) -> Result<Uniformity, HarnessError> {
    let start = Instant::now();
    if gfs.variables().len() != 1 {
        return Err(HarnessError::Multivariate);
    }
    let class = class_id(&gfs, &cfg.class)?;
    let (a, b) = cfg.sizes;
    let counts = counting_sequence(&gfs, &cfg.class, b as u32)?;
    for s in a..=b {
        if counts[s as usize] < BigUint::from(2u32) {
            return Err(HarnessError::TooFewCategories { size: s, count: counts[s as usize].clone() });
        }
    }
    let point = match &cfg.point {
        Some(p) => p.clone(),
        None => {
            let target = vec![(gfs.variables()[0].clone(), Ratio::from_integer(b))];
            tune(&gfs, &cfg.class, &target, &TuneConfig::default())?.point
        }
    };
    let base = Arc::new(CompiledSampler::compile(gfs.clone(), &point, cfg.sampler.precision).map_err(SampleError::from)?);
    let window = Window::new(&[a], &[Some(b)]);
    let batch = Batch { base, config: cfg.sampler.clone(), class, window: Some(window), seed: cfg.seed };
    let bins = (b - a + 1) as usize;
    let mut seen: Vec<HashMap<Vec<u32>, u64>> = vec![HashMap::new(); bins];
    let mut filled = vec![0u64; bins];
    let mut escalations = 0u64;
    let mut next = 0u64;
    let wave = 1u64 << 18;
    while filled.iter().any(|f| *f < cfg.samples) {
        let end = cfg.max_attempts.map_or(next + wave, |m| m.min(next + wave));
        if end <= next {
            return Err(HarnessError::AttemptLimit { attempts: next });
        }
        let accepted = batch.run(next..end, |r| {
            let esc = r.escalations;
            match r.attempt {
                Attempt::Accepted(t) => Some((esc, Some((t.size.get(0), t.outcomes().collect::<Vec<u32>>())))),
                Attempt::Rejected(_) => (esc > 0).then_some((esc, None)),
            }
        })?;
        for (esc, hit) in accepted {
            escalations += esc;
            let Some((size, key)) = hit else { continue };
            let bin = (size - a) as usize;
            if filled[bin] < cfg.samples {
                filled[bin] += 1;
                *seen[bin].entry(key).or_insert(0) += 1;
            }
        }
        next = end;
    }
    let mut rows = Vec::with_capacity(bins);
    for (i, observed) in seen.iter().enumerate() {
        let size = a + i as u64;
        let structures = counts[size as usize].clone();
        let k = structures.to_u64().unwrap_or(u64::MAX);
        let mut cells: Vec<u64> = observed.values().copied().collect();
        cells.sort_unstable();
        let chi_square = chi_square_sparse(&cells, k)
            .ok_or_else(|| HarnessError::Ambiguous { size, observed: observed.len(), count: structures.clone() })?;
        rows.push(UniformityRow { size, structures, observed: observed.len(), samples: filled[i], chi_square });
    }
    Ok(Uniformity { point, rows, attempts: next, escalations, seconds: start.elapsed().as_secs_f64() })
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub class: String,
    pub point: Point,
    pub window: Window,
    pub blocks: usize,
    pub block_size: u64,
    pub seed: u64,
    pub precision: u32,
}

#[derive(Clone, Debug)]
pub struct Bench {
    pub attempts: u64,
    pub mismatches: u64,
    pub accepted: u64,
    pub early_aborts: u64,
    /// Baseline time over early-rejecting time, per block.
    pub speedups: Vec<f64>,
    pub mean_speedup: f64,
    pub ci95: (f64, f64),
    pub baseline_ns_per_attempt: f64,
    pub early_ns_per_attempt: f64,
}

fn timed_block(s: &mut Sampler, class: ClassId, window: &Window, seed: u64, range: std::ops::Range<u64>) -> Result<(Vec<Attempt>, f64), SampleError> {
    let mut out = Vec::with_capacity((range.end - range.start) as usize);
    let t = Instant::now();
    for i in range {
        out.push(s.attempt(class, Some(window), &mut attempt_rng(seed, i))?);
    }
    Ok((out, t.elapsed().as_secs_f64()))
}

fn same_outcome(x: &Attempt, y: &Attempt) -> bool {
    match (x, y) {
        (Attempt::Accepted(x), Attempt::Accepted(y)) => x == y,
        (Attempt::Rejected(_), Attempt::Rejected(_)) => true,
        _ => false,
    }
}

/// Times the early-rejecting sampler against the baseline on the same
/// attempt streams, block by block with alternating order, and checks that
/// every attempt has the same outcome under both.
pub fn bench_rejection(gfs: Arc<GfSystem>, cfg: &BenchConfig) -> Result<Bench, HarnessError> {
    let class = class_id(&gfs, &cfg.class)?;
    let base = Arc::new(CompiledSampler::compile(gfs, &cfg.point, cfg.precision).map_err(SampleError::from)?);
    let config = SamplerConfig { precision: cfg.precision, ..SamplerConfig::default() };
    let mut early = Sampler::from_compiled(base.clone(), SamplerConfig { early_rejection: true, ..config.clone() });
    let mut plain = Sampler::from_compiled(base, SamplerConfig { early_rejection: false, ..config });
    let m = cfg.block_size;
    // Warm caches and lazily built levels outside the timed region.
    timed_block(&mut early, class, &cfg.window, cfg.seed, 0..m.min(256))?;
    timed_block(&mut plain, class, &cfg.window, cfg.seed, 0..m.min(256))?;
    early.reset_stats();
    let mut speedups = Vec::with_capacity(cfg.blocks);
    let (mut t_plain, mut t_early) = (0.0, 0.0);
    let mut mismatches = 0u64;
    for b in 0..cfg.blocks as u64 {
        let range = b * m..(b + 1) * m;
        let ((pa, pt), (ea, et)) = if b % 2 == 0 {
            let p = timed_block(&mut plain, class, &cfg.window, cfg.seed, range.clone())?;
            (p, timed_block(&mut early, class, &cfg.window, cfg.seed, range)?)
        } else {
            let e = timed_block(&mut early, class, &cfg.window, cfg.seed, range.clone())?;
            (timed_block(&mut plain, class, &cfg.window, cfg.seed, range)?, e)
        };
        mismatches += pa.iter().zip(&ea).filter(|(x, y)| !same_outcome(x, y)).count() as u64;
        speedups.push(pt / et);
        t_plain += pt;
        t_early += et;
    }
    let attempts = cfg.blocks as u64 * m;
    let ci95 = bootstrap_mean_ci(&speedups, 0.95, 10_000, cfg.seed);
    Ok(Bench {
        attempts,
        mismatches,
        accepted: early.stats().accepted,
        early_aborts: early.stats().early_aborts,
        mean_speedup: mean(&speedups),
        speedups,
        ci95,
        baseline_ns_per_attempt: t_plain * 1e9 / attempts as f64,
        early_ns_per_attempt: t_early * 1e9 / attempts as f64,
    })
}

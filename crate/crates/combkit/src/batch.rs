//! Parallel attempt batches whose results depend only on the seed and the
//! attempt indices, never on scheduling.

use std::ops::Range;
use std::sync::Arc;

use combkit_core::sampler::{attempt_rng, Attempt, ChoiceTrace, CompiledSampler, SampleError, SampleStats, Sampler, SamplerConfig, Window};
use combkit_core::system::ClassId;
use rayon::prelude::*;

/// Attempts handed to one worker at a time.
const CHUNK: u64 = 1024;

#[derive(Clone, Debug)]
pub struct AttemptResult {
    pub index: u64,
    pub attempt: Attempt,
    pub escalations: u64,
}

#[derive(Clone)]
pub struct Batch {
    pub base: Arc<CompiledSampler>,
    pub config: SamplerConfig,
    pub class: ClassId,
    pub window: Option<Window>,
    pub seed: u64,
}

impl Batch {
    fn chunks(range: Range<u64>) -> Vec<Range<u64>> {
        let mut out = Vec::new();
        let mut s = range.start;
        while s < range.end {
            let e = (s + CHUNK).min(range.end);
            out.push(s..e);
            s = e;
        }
        out
    }

    /// Runs every attempt in `range` and keeps `f`'s non-`None` results in
    /// attempt order.
    pub fn run<A, F>(&self, range: Range<u64>, f: F) -> Result<Vec<A>, SampleError>
    where
        A: Send,
        F: Fn(AttemptResult) -> Option<A> + Sync,
    {
        let parts: Vec<Result<Vec<A>, SampleError>> = Self::chunks(range)
            .into_par_iter()
            .map_init(
                || Sampler::from_compiled(self.base.clone(), self.config.clone()),
                |s, chunk| {
                    let mut out = Vec::new();
                    for index in chunk {
                        let before = s.stats().escalations;
                        let attempt = s.attempt(self.class, self.window.as_ref(), &mut attempt_rng(self.seed, index))?;
                        let escalations = s.stats().escalations - before;
                        out.extend(f(AttemptResult { index, attempt, escalations }));
                    }
                    Ok(out)
                },
            )
            .collect();
        let mut all = Vec::new();
        for p in parts {
            all.extend(p?);
        }
        Ok(all)
    }

    /// The first `n` accepted traces by attempt index, with counters over
    /// exactly the attempts up to the last one used.
    pub fn collect_accepted(&self, n: usize, max_attempts: Option<u64>) -> Result<(Vec<ChoiceTrace>, SampleStats), SampleError> {
        let mut stats = SampleStats { max_precision: self.base.precision(), ..SampleStats::default() };
        let mut traces = Vec::with_capacity(n);
        let wave = CHUNK * rayon::current_num_threads() as u64 * 4;
        let mut next = 0u64;
        while traces.len() < n {
            let end = max_attempts.map_or(next + wave, |m| m.min(next + wave));
            if end <= next {
                return Err(SampleError::AttemptLimit { attempts: next });
            }
            for r in self.run(next..end, Some)? {
                stats.attempts += 1;
                stats.escalations += r.escalations;
                match r.attempt {
                    Attempt::Accepted(t) => {
                        stats.accepted += 1;
                        stats.max_precision = stats.max_precision.max(t.precision);
                        traces.push(t);
                        if traces.len() == n {
                            return Ok((traces, stats));
                        }
                    }
                    Attempt::Rejected(r) if r.early => stats.early_aborts += 1,
                    Attempt::Rejected(_) => stats.rejections += 1,
                }
            }
            next = end;
        }
        Ok((traces, stats))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use combkit_core::oracle::Point;
    use combkit_core::sampler::{sample, SampleRequest, TermBuilder};
    use combkit_core::{parse_str, transfer};

    #[test]
    fn matches_the_sequential_sampler() {
        let g = Arc::new(transfer(&parse_str("B = z + (z*B*B)").unwrap()).unwrap());
        let p = Point::new(&g, &[("z".into(), "0.45".parse().unwrap())]).unwrap();
        let window = Window::new(&[9], &[Some(21)]);
        let mut req = SampleRequest::at_point("B", p.clone(), 40);
        req.seed = 99;
        req.window = Some(window.clone());
        let seq = sample(g.clone(), &req, &mut TermBuilder).unwrap();
        let base = Arc::new(CompiledSampler::compile(g, &p, 53).unwrap());
        let batch = Batch { base, config: SamplerConfig::default(), class: ClassId(0), window: Some(window), seed: 99 };
        let (traces, stats) = batch.collect_accepted(40, None).unwrap();
        assert_eq!(traces, seq.traces);
        assert_eq!(stats, seq.stats);
    }
}

//! Versioned JSON files of accepted choice traces.

use combkit_core::gf::GfSystem;
use combkit_core::oracle::Point;
use combkit_core::sampler::{ChoiceTrace, RandomReal, TraceDecision};
use combkit_core::system::{NodeId, SizeVector};
use serde::{Deserialize, Serialize};

pub const FORMAT: &str = "combkit-trace";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub node: u32,
    pub outcome: u32,
    /// Observed bits of the random real, most significant first.
    pub bits: String,
    /// Number of observed bits.
    pub len: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFile {
    pub format: String,
    pub version: u32,
    pub class: String,
    /// Control point as exact decimal strings, in variable order.
    pub point: Vec<(String, String)>,
    pub precision: u32,
    pub size: Vec<u64>,
    pub decisions: Vec<DecisionRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceIoError {
    #[error("not a trace file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported trace format `{format}` version {version}")]
    Version { format: String, version: u32 },
    #[error("malformed trace: {0}")]
    Malformed(String),
}

impl TraceFile {
    pub fn new(gfs: &GfSystem, point: &Point, trace: &ChoiceTrace) -> Self {
        TraceFile {
            format: FORMAT.into(),
            version: VERSION,
            class: gfs.class_names()[trace.class.index()].clone(),
            point: gfs.variables().iter().cloned().zip(point.values().iter().map(ToString::to_string)).collect(),
            precision: trace.precision,
            size: trace.size.as_slice().to_vec(),
            decisions: trace
                .decisions
                .iter()
                .map(|d| DecisionRecord { node: d.node.0, outcome: d.outcome, bits: d.real.to_hex(), len: d.real.len() })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TraceIoError> {
        let t: TraceFile = serde_json::from_str(text)?;
        if t.format != FORMAT || t.version != VERSION {
            return Err(TraceIoError::Version { format: t.format, version: t.version });
        }
        Ok(t)
    }

    /// Rebuilds the in-memory trace against `gfs`.
    pub fn to_trace(&self, gfs: &GfSystem) -> Result<ChoiceTrace, TraceIoError> {
        let class = gfs.class_id(&self.class).ok_or_else(|| TraceIoError::Malformed(format!("unknown class `{}`", self.class)))?;
        let decisions = self
            .decisions
            .iter()
            .map(|d| {
                let real = RandomReal::from_hex(&d.bits).filter(|r| r.len() == d.len);
                let real = real.ok_or_else(|| TraceIoError::Malformed(format!("bad bits at node {}", d.node)))?;
                if d.node as usize >= gfs.nodes().len() {
                    return Err(TraceIoError::Malformed(format!("node {} out of range", d.node)));
                }
                Ok(TraceDecision { node: NodeId(d.node), outcome: d.outcome, real })
            })
            .collect::<Result<_, _>>()?;
        if self.size.len() != gfs.variables().len() {
            return Err(TraceIoError::Malformed("size arity".into()));
        }
        Ok(ChoiceTrace { class, decisions, size: SizeVector::from_slice(&self.size), precision: self.precision })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use combkit_core::sampler::{attempt_rng, Attempt, Sampler, SamplerConfig};
    use combkit_core::system::ClassId;
    use combkit_core::{parse_str, transfer};
    use std::sync::Arc;

    #[test]
    fn round_trip() {
        let g = Arc::new(transfer(&parse_str("B = z + (z*B*B)").unwrap()).unwrap());
        let p = Point::new(&g, &[("z".into(), "0.4".parse().unwrap())]).unwrap();
        let mut s = Sampler::new(g.clone(), &p, SamplerConfig::default()).unwrap();
        let Attempt::Accepted(t) = s.attempt(ClassId(0), None, &mut attempt_rng(4, 2)).unwrap() else { unreachable!() };
        let file = TraceFile::new(&g, &p, &t);
        let back = TraceFile::from_json(&file.to_json()).unwrap();
        assert_eq!(back.to_trace(&g).unwrap(), t);
        let bad = file.to_json().replace("\"version\":1", "\"version\":9");
        assert!(matches!(TraceFile::from_json(&bad), Err(TraceIoError::Version { .. })));
    }
}

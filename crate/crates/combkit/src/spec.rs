//! Loading specifications and parsing command-line value syntax.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use combkit_core::gf::GfSystem;
use combkit_core::grammar::{parse, spec_file_sources, EquationSource, Origin, ParseError};
use combkit_core::interval::Ratio;
use combkit_core::{transfer, ClassSystem, ValidationReport};

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("specification is invalid")]
    Invalid(ValidationReport),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
}

/// A parsed, validated specification ready for enumeration and sampling.
#[derive(Clone, Debug)]
pub struct LoadedSpec {
    pub system: ClassSystem,
    pub gfs: Arc<GfSystem>,
}

impl LoadedSpec {
    /// The class named `name`, or the first equation's class.
    pub fn class_name<'a>(&'a self, name: Option<&'a str>) -> Result<&'a str, SpecError> {
        match name {
            Some(n) if self.gfs.class_id(n).is_some() => Ok(n),
            Some(n) => Err(SpecError::UnknownClass(n.to_string())),
            None => Ok(&self.gfs.class_names()[0]),
        }
    }
}

/// Inline specs accept `;` or newlines between equations.
pub fn inline_sources(text: &str) -> Vec<EquationSource> {
    text.split([';', '\n'])
        .enumerate()
        .filter(|(_, s)| !s.split('#').next().unwrap_or("").trim().is_empty())
        .map(|(i, s)| EquationSource { text: s.split('#').next().unwrap_or("").to_string(), origin: Origin { file: None, line: i as u32 + 1 } })
        .collect()
}

pub fn read_sources(path: &Path) -> Result<Vec<EquationSource>, SpecError> {
    let text = fs::read_to_string(path).map_err(|source| SpecError::Io { path: path.display().to_string(), source })?;
    Ok(spec_file_sources(&text, Some(&path.display().to_string())))
}

/// Parses without validating; callers that only report diagnostics use this.
pub fn parse_sources(sources: &[EquationSource]) -> Result<ClassSystem, SpecError> {
    Ok(parse(sources)?)
}

pub fn load(sources: &[EquationSource]) -> Result<LoadedSpec, SpecError> {
    let system = parse_sources(sources)?;
    let gfs = transfer(&system).map_err(|e| SpecError::Invalid(e.report))?;
    Ok(LoadedSpec { system, gfs: Arc::new(gfs) })
}

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum ValueError {
    #[error("expected `name=value`, got `{0}`")]
    Assignment(String),
    #[error("invalid number `{0}`")]
    Number(String),
    #[error("expected a range `a..b`, got `{0}`")]
    Range(String),
}

/// `name=value` with an exact decimal or `p/q` value.
pub fn parse_assignment(s: &str) -> Result<(String, Ratio), ValueError> {
    let (name, value) = s.split_once('=').ok_or_else(|| ValueError::Assignment(s.into()))?;
    let name = name.trim();
    if name.is_empty() {
        return Err(ValueError::Assignment(s.into()));
    }
    let value: Ratio = value.trim().parse().map_err(|_| ValueError::Number(value.trim().into()))?;
    Ok((name.to_string(), value))
}

/// Inclusive range `a..b`, or `a..` for an unbounded upper end.
pub fn parse_range(s: &str) -> Result<(u64, Option<u64>), ValueError> {
    let err = || ValueError::Range(s.into());
    let (a, b) = s.split_once("..").ok_or_else(err)?;
    let a: u64 = a.trim().parse().map_err(|_| err())?;
    let b = b.trim().trim_start_matches('=');
    if b.is_empty() {
        return Ok((a, None));
    }
    let b: u64 = b.parse().map_err(|_| err())?;
    if b < a {
        return Err(err());
    }
    Ok((a, Some(b)))
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn ranges_round_trip(a in 0u64..1 << 40, span in proptest::option::of(0u64..1 << 20)) {
            let text = match span {
                Some(d) => format!("{a}..{}", a + d),
                None => format!("{a}.."),
            };
            prop_assert_eq!(parse_range(&text).unwrap(), (a, span.map(|d| a + d)));
        }

        #[test]
        fn reversed_ranges_fail(a in 1u64..1 << 40, d in 1u64..1 << 20) {
            let lo = a.saturating_sub(d);
            prop_assume!(lo < a);
            let text = format!("{a}..{lo}");
            prop_assert!(parse_range(&text).is_err());
        }
    }
}

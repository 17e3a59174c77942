//! Combinatorial class specifications, exact enumeration and exact
//! Boltzmann sampling.
//!
//! A system of equations such as `B = z + (z*B*B)` is parsed with
//! [`grammar::parse`], checked with [`system::ClassSystem::validate`] and
//! turned into generating-function equations by [`system::transfer`]. From
//! there [`series`] counts objects exactly, [`oracle`] evaluates certified
//! enclosures of the generating functions, [`sampler`] draws uniform objects
//! with dynamic precision and [`tuner`] picks control parameters for a
//! target size.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod gf;
pub mod grammar;
pub mod interval;
pub mod oracle;
pub mod sampler;
pub mod series;
pub mod system;
pub mod tuner;

pub use grammar::{parse, parse_str, EquationSource, ParseError};
pub use system::{transfer, ClassSystem, SizeVector, ValidationReport};

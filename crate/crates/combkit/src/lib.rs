//! Spec-file IO, JSON reports, trace files, parallel batches, experiment
//! harnesses and the `combkit` command line on top of `combkit-core`.

pub mod batch;
pub mod cli;
pub mod harness;
pub mod report;
pub mod spec;
pub mod stats;
pub mod trace_io;

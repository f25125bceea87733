//! Predictive data-race detection over recorded execution traces.
//!
//! Traces are parsed by [`trace`], analyzed in a single streaming pass by
//! [`engine`], and the resulting concurrent pairs and ordering edges are
//! turned into race candidates by [`graph`]. [`oracle`] holds brute-force
//! reference checks for small traces, [`baseline`] the comparison detectors,
//! and [`tracegen`] seeded random trace generation. [`analysis`] wraps the
//! named detector variants, [`fuzz`] and [`compare`] check them against the
//! oracle.

pub mod analysis;
pub mod baseline;
pub mod clock;
pub mod compare;
pub mod engine;
pub mod fuzz;
pub mod graph;
pub mod oracle;
pub mod trace;
pub mod tracegen;
